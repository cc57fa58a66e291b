use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::OptimizerError;

const SYMMETRY_TOL: f64 = 1e-9;
const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Gaussian search distribution over stacked shape parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDistribution {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl SearchDistribution {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self, OptimizerError> {
        let n = mean.len();
        if covariance.shape() != (n, n) {
            return Err(OptimizerError::Shape(format!(
                "covariance is {:?}, expected {n}x{n}",
                covariance.shape()
            )));
        }
        check_symmetric(&covariance)?;
        Ok(Self { mean, covariance })
    }

    /// `N(mean, lambda I)`.
    pub fn isotropic(mean: DVector<f64>, lambda: f64) -> Self {
        let n = mean.len();
        Self {
            mean,
            covariance: DMatrix::identity(n, n) * lambda,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), OptimizerError> {
    if !m.is_square() {
        return Err(OptimizerError::Shape(format!(
            "matrix is {:?}, expected square",
            m.shape()
        )));
    }
    let scale = m.amax().max(1.0);
    let asymmetry = (m - m.transpose()).amax();
    if !(asymmetry <= SYMMETRY_TOL * scale) {
        return Err(OptimizerError::NonSymmetric { asymmetry });
    }
    Ok(())
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Square-root factor `A = V sqrt(max(Lambda, 0))` of the covariance, so that
/// `mean + A xi` with `xi ~ N(0, I)` has the requested distribution.
pub(crate) struct Sampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl Sampler {
    pub(crate) fn new(dist: &SearchDistribution) -> Result<Self, OptimizerError> {
        check_symmetric(&dist.covariance)?;
        let eig = SymmetricEigen::new(symmetrize(&dist.covariance));
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = eig.eigenvectors * DMatrix::from_diagonal(&roots);
        Ok(Self {
            mean: dist.mean.clone(),
            factor,
        })
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let xi = DVector::from_fn(self.mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.factor * xi
    }
}

/// Draws `m` independent samples `mean + eps`, `eps ~ N(0, covariance)`.
/// Negative eigenvalues (round-off) are treated as zero.
pub fn sample_parameters<R: Rng + ?Sized>(
    dist: &SearchDistribution,
    m: usize,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>, OptimizerError> {
    let sampler = Sampler::new(dist)?;
    Ok((0..m).map(|_| sampler.draw(rng)).collect())
}

/// Normalized exponentiation of costs:
/// `P_m ∝ exp(-h (J_m - J_min) / (J_max - J_min))`. A zero cost range gives
/// uniform weights, as does `h = 0`.
pub fn compute_sample_weights(costs: &[f64], eliteness: f64) -> Vec<f64> {
    let n = costs.len();
    if n == 0 {
        return Vec::new();
    }
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) || eliteness == 0.0 {
        return vec![1.0 / n as f64; n];
    }
    let raw: Vec<f64> = costs.iter().map(|c| (-eliteness * (c - lo) / range).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// Clamps the eigenvalues of a symmetric matrix into `[lambda_min, lambda_max]`
/// (`None` leaves the top unbounded). A matrix already within bounds is
/// returned as is.
pub fn bound_covariance(
    cov: &DMatrix<f64>,
    lambda_min: f64,
    lambda_max: Option<f64>,
) -> Result<DMatrix<f64>, OptimizerError> {
    check_symmetric(cov)?;
    if !(lambda_min >= 0.0) || lambda_max.is_some_and(|m| !(m >= lambda_min)) {
        return Err(OptimizerError::Config(format!(
            "eigenvalue bounds [{lambda_min}, {lambda_max:?}] are empty"
        )));
    }
    let upper = lambda_max.unwrap_or(f64::INFINITY);
    let eig = SymmetricEigen::new(symmetrize(cov));
    if eig.eigenvalues.iter().all(|&l| l >= lambda_min && l <= upper) {
        return Ok(cov.clone());
    }
    let clamped = eig.eigenvalues.map(|l| l.clamp(lambda_min, upper));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    Ok(symmetrize(&rebuilt))
}

/// Weighted-averaging update. The covariance is the weighted scatter about
/// the current mean, bounded; the new mean is the weighted sample average.
pub fn update_distribution(
    dist: &SearchDistribution,
    samples: &[DVector<f64>],
    weights: &[f64],
    lambda_min: f64,
    lambda_max: Option<f64>,
) -> Result<SearchDistribution, OptimizerError> {
    if samples.len() != weights.len() || samples.is_empty() {
        return Err(OptimizerError::Shape(format!(
            "{} samples but {} weights",
            samples.len(),
            weights.len()
        )));
    }
    let n = dist.dim();
    if let Some(s) = samples.iter().find(|s| s.len() != n) {
        return Err(OptimizerError::Shape(format!(
            "sample of length {} for {n} parameters",
            s.len()
        )));
    }
    let sum: f64 = weights.iter().sum();
    if !((sum - 1.0).abs() <= WEIGHT_SUM_TOL) || weights.iter().any(|w| *w < 0.0) {
        return Err(OptimizerError::WeightSum { sum });
    }
    let mut scatter = DMatrix::zeros(n, n);
    let mut mean = DVector::zeros(n);
    for (theta, &p) in samples.iter().zip(weights) {
        let eps = theta - &dist.mean;
        scatter.ger(p, &eps, &eps, 1.0);
        mean.axpy(p, theta, 1.0);
    }
    let covariance = bound_covariance(&symmetrize(&scatter), lambda_min, lambda_max)?;
    Ok(SearchDistribution { mean, covariance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_distribution_returns_the_mean() {
        let mean = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let dist = SearchDistribution::new(mean.clone(), DMatrix::zeros(3, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in sample_parameters(&dist, 5, &mut rng).unwrap() {
            assert_eq!(s, mean);
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let dist = SearchDistribution::isotropic(DVector::zeros(4), 0.3);
        let a = sample_parameters(&dist, 10, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = sample_parameters(&dist, 10, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_symmetric_covariance_rejected() {
        let mut cov = DMatrix::identity(2, 2);
        cov[(0, 1)] = 0.5;
        assert!(matches!(
            SearchDistribution::new(DVector::zeros(2), cov.clone()),
            Err(OptimizerError::NonSymmetric { .. })
        ));
        assert!(matches!(
            bound_covariance(&cov, 0.1, None),
            Err(OptimizerError::NonSymmetric { .. })
        ));
    }

    #[test]
    fn weights_by_hand() {
        let p = compute_sample_weights(&[0.0, 1.0], 10.0);
        let e = (-10f64).exp();
        assert!((p[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((p[1] - e / (1.0 + e)).abs() < 1e-15);
        assert!((p[0] - 0.9999546).abs() < 1e-7);
        assert!((p[1] - 4.5398e-5).abs() < 1e-9);
        assert_eq!(compute_sample_weights(&[3.0; 4], 10.0), vec![0.25; 4]);
        assert_eq!(compute_sample_weights(&[0.0, 1.0, 5.0], 0.0), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn update_cases() {
        let dist = SearchDistribution::isotropic(DVector::zeros(2), 1.0);
        let samples = vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![2.0, 2.0])];
        let next = update_distribution(&dist, &samples, &[0.5, 0.5], 1e-3, None).unwrap();
        assert_eq!(next.mean.as_slice(), &[1.0, 1.0]);
        // Scatter about the old mean (origin): 0.5 * [2,2][2,2]^T = [[2,2],[2,2]],
        // eigenvalues {4, 0}; the zero is lifted to lambda_min.
        let eig = SymmetricEigen::new(next.covariance.clone());
        let mut ls: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ls.sort_by(f64::total_cmp);
        assert!((ls[0] - 1e-3).abs() < 1e-12 && (ls[1] - 4.0).abs() < 1e-12);

        let one_hot = update_distribution(&dist, &samples, &[0.0, 1.0], 1e-3, None).unwrap();
        assert_eq!(one_hot.mean, samples[1]);

        assert!(matches!(
            update_distribution(&dist, &samples, &[0.5, 0.6], 1e-3, None),
            Err(OptimizerError::WeightSum { .. })
        ));
    }

    #[test]
    fn bounding_cases() {
        let small = DMatrix::identity(3, 3) * 0.01;
        let b = bound_covariance(&small, 0.05, None).unwrap();
        assert!((b - DMatrix::identity(3, 3) * 0.05).amax() < 1e-15);

        let inside = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.3]);
        let same = bound_covariance(&inside, 0.05, Some(1.0)).unwrap();
        assert!((same - &inside).amax() <= 1e-12);

        let both = DMatrix::from_diagonal(&DVector::from_vec(vec![0.01, 10.0]));
        let clamped = bound_covariance(&both, 0.05, Some(1.0)).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.05, 1.0]));
        assert!((clamped - expected).amax() < 1e-12);
    }
}
