//! Smooth under-approximations of `min` and `max`.
//!
//! `smooth_min` is the scaled log-sum-exp of the negated values and
//! `smooth_max` is the softmax-weighted mean. Both never exceed the true
//! extremum and approach it as the sharpness grows. Exponentials are
//! evaluated after shifting by the true extremum, which leaves the result
//! algebraically unchanged while keeping every exponent non-positive.

use super::EvalError;

/// Sharpness parameters for the smoothed robustness, plus the value
/// assigned to the constant `true`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingParams {
    pub k1: f64,
    pub k2: f64,
    #[serde(default = "default_rho_max")]
    pub rho_max: f64,
}

pub const DEFAULT_RHO_MAX: f64 = 1.0e6;

fn default_rho_max() -> f64 {
    DEFAULT_RHO_MAX
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            k1: 100.0,
            k2: 100.0,
            rho_max: DEFAULT_RHO_MAX,
        }
    }
}

impl SmoothingParams {
    pub fn new(k1: f64, k2: f64, rho_max: f64) -> Result<Self, EvalError> {
        let params = Self { k1, k2, rho_max };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.k1) {
            return Err(EvalError::InvalidParameter(format!(
                "k1 must be positive and finite, got {}",
                self.k1
            )));
        }
        if !ok(self.k2) {
            return Err(EvalError::InvalidParameter(format!(
                "k2 must be positive and finite, got {}",
                self.k2
            )));
        }
        if !ok(self.rho_max) {
            return Err(EvalError::InvalidParameter(format!(
                "rho_max must be positive and finite, got {}",
                self.rho_max
            )));
        }
        Ok(())
    }
}

/// `-(1/k) * ln(sum_i exp(-k * a_i))`.
pub fn smooth_min(values: &[f64], k: f64) -> Result<f64, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyAggregation);
    }
    Ok(smooth_min_unchecked(values, k))
}

/// Softmax-weighted mean `sum_i a_i exp(k a_i) / sum_i exp(k a_i)`.
pub fn smooth_max(values: &[f64], k: f64) -> Result<f64, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyAggregation);
    }
    Ok(smooth_max_unchecked(values, k))
}

pub(crate) fn smooth_min_unchecked(values: &[f64], k: f64) -> f64 {
    let mut acc = SmoothMinAcc::new(k);
    for &v in values {
        acc.push(v);
    }
    acc.value()
}

pub(crate) fn smooth_max_unchecked(values: &[f64], k: f64) -> f64 {
    let mut acc = SmoothMaxAcc::new(k);
    for &v in values {
        acc.push(v);
    }
    acc.value()
}

/// Streaming form of [`smooth_min`]. Holds the running minimum `m` and
/// `sum exp(-k (a - m))`, rescaling whenever a new minimum arrives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SmoothMinAcc {
    k: f64,
    min: f64,
    sum: f64,
}

impl SmoothMinAcc {
    pub(crate) fn new(k: f64) -> Self {
        Self {
            k,
            min: f64::INFINITY,
            sum: 0.0,
        }
    }

    pub(crate) fn push(&mut self, a: f64) {
        if self.sum == 0.0 {
            self.min = a;
            self.sum = 1.0;
        } else if a >= self.min {
            self.sum += (-self.k * (a - self.min)).exp();
        } else {
            self.sum = self.sum * (-self.k * (self.min - a)).exp() + 1.0;
            self.min = a;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        debug_assert!(self.sum > 0.0, "empty smooth-min accumulator");
        self.min - self.sum.ln() / self.k
    }
}

/// Streaming form of [`smooth_max`], shifted by the running maximum.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SmoothMaxAcc {
    k: f64,
    max: f64,
    num: f64,
    den: f64,
}

impl SmoothMaxAcc {
    pub(crate) fn new(k: f64) -> Self {
        Self {
            k,
            max: f64::NEG_INFINITY,
            num: 0.0,
            den: 0.0,
        }
    }

    pub(crate) fn push(&mut self, a: f64) {
        if self.den == 0.0 {
            self.max = a;
            self.num = a;
            self.den = 1.0;
        } else if a <= self.max {
            let w = (self.k * (a - self.max)).exp();
            self.num += a * w;
            self.den += w;
        } else {
            let scale = (self.k * (self.max - a)).exp();
            self.num = self.num * scale + a;
            self.den = self.den * scale + 1.0;
            self.max = a;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        debug_assert!(self.den > 0.0, "empty smooth-max accumulator");
        // The weighted mean can drift a few ulps past the maximum.
        (self.num / self.den).min(self.max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct evaluation without shifting; only valid for moderate k * a.
    fn naive_min(values: &[f64], k: f64) -> f64 {
        -(values.iter().map(|a| (-k * a).exp()).sum::<f64>()).ln() / k
    }

    fn naive_max(values: &[f64], k: f64) -> f64 {
        let num: f64 = values.iter().map(|a| a * (k * a).exp()).sum();
        let den: f64 = values.iter().map(|a| (k * a).exp()).sum();
        num / den
    }

    #[test]
    fn single_element_is_identity() {
        assert_eq!(smooth_min(&[3.25], 7.0).unwrap(), 3.25);
        assert_eq!(smooth_max(&[3.25], 7.0).unwrap(), 3.25);
    }

    #[test]
    fn repeated_element() {
        let k = 4.0;
        let v = smooth_min(&[1.5, 1.5], k).unwrap();
        assert!((v - (1.5 - 2f64.ln() / k)).abs() < 1e-14);
        assert!((smooth_max(&[1.5, 1.5], k).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn matches_naive_oracle() {
        let v = smooth_min(&[0.0, 10.0], 1.0).unwrap();
        assert!((v - naive_min(&[0.0, 10.0], 1.0)).abs() < 1e-15);
        assert!((v - (-4.5398899216870535e-5)).abs() < 1e-12);

        let w = smooth_max(&[0.0, 1.0], 2.0).unwrap();
        let e2 = 2f64.exp();
        assert!((w - e2 / (1.0 + e2)).abs() < 1e-15);
        assert!((w - naive_max(&[0.0, 1.0], 2.0)).abs() < 1e-15);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(smooth_min(&[], 1.0), Err(EvalError::EmptyAggregation)));
        assert!(matches!(smooth_max(&[], 1.0), Err(EvalError::EmptyAggregation)));
    }

    #[test]
    fn no_overflow_for_large_magnitudes() {
        let v = smooth_min(&[1.0e6, -1.0e6, 3.0], 100.0).unwrap();
        assert!((v - -1.0e6).abs() < 1e-9);
        let w = smooth_max(&[1.0e6, -1.0e6, 3.0], 100.0).unwrap();
        assert!((w - 1.0e6).abs() < 1e-9);
    }

    #[test]
    fn streaming_order_does_not_matter() {
        let a = [0.3, -1.2, 2.0, 0.7, -0.1];
        let mut b = a;
        b.reverse();
        let k = 3.0;
        assert!((smooth_min(&a, k).unwrap() - smooth_min(&b, k).unwrap()).abs() < 1e-14);
        assert!((smooth_max(&a, k).unwrap() - smooth_max(&b, k).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn params_validation() {
        assert!(SmoothingParams::new(1.0, 1.0, 1.0).is_ok());
        assert!(SmoothingParams::new(0.0, 1.0, 1.0).is_err());
        assert!(SmoothingParams::new(1.0, -1.0, 1.0).is_err());
        assert!(SmoothingParams::new(1.0, 1.0, f64::INFINITY).is_err());
    }
}
