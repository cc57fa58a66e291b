//! Multi-dimensional dynamic movement primitives.
//!
//! Each dimension is a critically damped point attractor perturbed by a
//! forcing term, and all dimensions share one exponentially decaying phase:
//!
//! ```text
//! (1/tau) z' = alpha_z (beta_z (g - y) - z) + f
//! (1/tau) y' = z
//! (1/tau) s' = -alpha_s s                   =>  s(t) = exp(-alpha_s tau t)
//! f          = sum_i theta_i psi_i(s) s / sum_l psi_l(s) * (g - y0)
//! psi_i(s)   = exp(-(s - c_i)^2 / (2 sigma_i))
//! ```
//!
//! The phase uses its closed form; the transformation system is stepped with
//! fixed-step explicit Euler.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DmpError {
    #[error("invalid kernel layout: {0}")]
    Layout(String),
    #[error("invalid movement primitive: {0}")]
    System(String),
    #[error("invalid integration settings: {0}")]
    Integration(String),
    #[error("all kernel activations vanish at phase {phase}")]
    DegenerateActivations { phase: f64 },
    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },
}

/// Gaussian kernels in phase space: centers `c_i` and variances `sigma_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelLayout {
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl KernelLayout {
    pub fn new(centers: Vec<f64>, widths: Vec<f64>) -> Result<Self, DmpError> {
        if centers.is_empty() {
            return Err(DmpError::Layout("at least one kernel is required".into()));
        }
        if centers.len() != widths.len() {
            return Err(DmpError::Layout(format!(
                "{} centers but {} widths",
                centers.len(),
                widths.len()
            )));
        }
        if let Some(w) = widths.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(DmpError::Layout(format!("kernel widths must be positive, got {w}")));
        }
        if centers.iter().any(|c| !c.is_finite()) || centers.windows(2).any(|p| p[1] >= p[0]) {
            return Err(DmpError::Layout(
                "centers must be finite and strictly decreasing".into(),
            ));
        }
        Ok(Self { centers, widths })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }
}

/// Places `count` kernels at the phase values reached at equally spaced
/// times over `[0, duration]`, so `c_i = exp(-alpha_s tau t_i)`. Each width
/// is chosen so the kernel's activation at the next center is 1/2; the last
/// kernel reuses the previous gap.
pub fn default_kernel_layout(count: usize, alpha_s: f64, tau: f64, duration: f64) -> Result<KernelLayout, DmpError> {
    if count == 0 {
        return Err(DmpError::Layout("at least one kernel is required".into()));
    }
    for (name, v) in [("alpha_s", alpha_s), ("tau", tau), ("duration", duration)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(DmpError::Layout(format!("{name} must be positive, got {v}")));
        }
    }
    let rate = alpha_s * tau;
    let centers: Vec<f64> = if count == 1 {
        vec![1.0]
    } else {
        (0..count)
            .map(|i| (-rate * duration * i as f64 / (count - 1) as f64).exp())
            .collect()
    };
    let half_height = |gap: f64| gap * gap / (2.0 * std::f64::consts::LN_2);
    let widths = if count == 1 {
        vec![half_height(1.0 - (-rate * duration).exp())]
    } else {
        (0..count)
            .map(|i| {
                let gap = if i + 1 < count {
                    centers[i] - centers[i + 1]
                } else {
                    centers[i - 1] - centers[i]
                };
                half_height(gap)
            })
            .collect()
    };
    KernelLayout::new(centers, widths)
}

/// Unnormalized kernel activations at phase `s`.
pub fn basis_activations(s: f64, layout: &KernelLayout) -> Vec<f64> {
    layout
        .centers
        .iter()
        .zip(&layout.widths)
        .map(|(c, w)| (-(s - c) * (s - c) / (2.0 * w)).exp())
        .collect()
}

/// Normalized, phase-gated basis `psi_i s / sum psi` (without the goal factor).
fn normalized_basis(s: f64, layout: &KernelLayout, out: &mut [f64]) -> Result<(), DmpError> {
    let mut total = 0.0;
    for ((o, c), w) in out.iter_mut().zip(&layout.centers).zip(&layout.widths) {
        *o = (-(s - c) * (s - c) / (2.0 * w)).exp();
        total += *o;
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(DmpError::DegenerateActivations { phase: s });
    }
    let scale = s / total;
    out.iter_mut().for_each(|o| *o *= scale);
    Ok(())
}

/// Forcing term `f = basis(s)^T theta` for one dimension.
pub fn forcing_term(s: f64, theta: &[f64], goal: f64, start: f64, layout: &KernelLayout) -> Result<f64, DmpError> {
    if theta.len() != layout.len() {
        return Err(DmpError::System(format!(
            "{} shape parameters for {} kernels",
            theta.len(),
            layout.len()
        )));
    }
    let mut basis = vec![0.0; layout.len()];
    normalized_basis(s, layout, &mut basis)?;
    Ok(dot(&basis, theta) * (goal - start))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gains shared by every dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    pub alpha_z: f64,
    pub beta_z: f64,
    pub alpha_s: f64,
    pub tau: f64,
}

impl Default for Gains {
    /// Critically damped: `beta_z = alpha_z / 4`.
    fn default() -> Self {
        Self {
            alpha_z: 25.0,
            beta_z: 6.25,
            alpha_s: 4.0,
            tau: 1.0,
        }
    }
}

impl Gains {
    fn validate(&self) -> Result<(), DmpError> {
        for (name, v) in [
            ("alpha_z", self.alpha_z),
            ("beta_z", self.beta_z),
            ("alpha_s", self.alpha_s),
            ("tau", self.tau),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(DmpError::System(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// 2% settling-time estimate `4 / (zeta omega_n)` of the unforced system.
    pub fn settling_time(&self) -> f64 {
        let omega = self.tau * (self.alpha_z * self.beta_z).sqrt();
        let zeta = self.alpha_z / (2.0 * (self.alpha_z * self.beta_z).sqrt());
        4.0 / (zeta * omega)
    }
}

/// Fixed-step integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub steps: usize,
}

impl IntegrationConfig {
    /// 200 steps over `1 / tau` seconds.
    pub fn for_tau(tau: f64) -> Self {
        Self {
            dt: 1.0 / tau / 200.0,
            steps: 200,
        }
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn validate(&self) -> Result<(), DmpError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(DmpError::Integration(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(DmpError::Integration("steps must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self::for_tau(1.0)
    }
}

/// A `d`-dimensional movement primitive with `d * L` stacked shape
/// parameters (all of dimension 0 first, then dimension 1, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct DmpSystem {
    start: Vec<f64>,
    goal: Vec<f64>,
    theta: Vec<f64>,
    gains: Gains,
    layout: KernelLayout,
}

impl DmpSystem {
    /// New system with all shape parameters zero.
    pub fn new(start: Vec<f64>, goal: Vec<f64>, gains: Gains, layout: KernelLayout) -> Result<Self, DmpError> {
        if start.is_empty() {
            return Err(DmpError::System("dimension must be at least 1".into()));
        }
        if start.len() != goal.len() {
            return Err(DmpError::System(format!(
                "start has {} coordinates, goal has {}",
                start.len(),
                goal.len()
            )));
        }
        if start.iter().chain(&goal).any(|v| !v.is_finite()) {
            return Err(DmpError::System("start and goal must be finite".into()));
        }
        gains.validate()?;
        let theta = vec![0.0; start.len() * layout.len()];
        Ok(Self {
            start,
            goal,
            theta,
            gains,
            layout,
        })
    }

    pub fn with_theta(mut self, theta: &[f64]) -> Result<Self, DmpError> {
        self.set_theta(theta)?;
        Ok(self)
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<(), DmpError> {
        if theta.len() != self.theta.len() {
            return Err(DmpError::System(format!(
                "expected {} shape parameters, got {}",
                self.theta.len(),
                theta.len()
            )));
        }
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn kernels(&self) -> usize {
        self.layout.len()
    }

    /// Total number of optimized parameters, `d * L`.
    pub fn num_parameters(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Shape parameters of one dimension.
    pub fn theta_of(&self, dim: usize) -> &[f64] {
        let l = self.layout.len();
        &self.theta[dim * l..(dim + 1) * l]
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn goal(&self) -> &[f64] {
        &self.goal
    }

    pub fn gains(&self) -> &Gains {
        &self.gains
    }

    pub fn layout(&self) -> &KernelLayout {
        &self.layout
    }

    /// Phase at time `t`.
    pub fn phase(&self, t: f64) -> f64 {
        (-self.gains.alpha_s * self.gains.tau * t).exp()
    }
}

/// Integrates the system from rest at `start`, returning `steps + 1` positions.
pub fn rollout(sys: &DmpSystem, cfg: &IntegrationConfig) -> Result<Trace, DmpError> {
    cfg.validate()?;
    let d = sys.dim();
    let l = sys.kernels();
    let Gains {
        alpha_z, beta_z, tau, ..
    } = sys.gains;
    let mut y = sys.start.clone();
    let mut z = vec![0.0; d];
    let mut data = Vec::with_capacity((cfg.steps + 1) * d);
    data.extend_from_slice(&y);
    let mut basis = vec![0.0; l];
    for step in 0..cfg.steps {
        let s = sys.phase(step as f64 * cfg.dt);
        normalized_basis(s, &sys.layout, &mut basis)?;
        for i in 0..d {
            let f = dot(&basis, sys.theta_of(i)) * (sys.goal[i] - sys.start[i]);
            let z_rate = tau * (alpha_z * (beta_z * (sys.goal[i] - y[i]) - z[i]) + f);
            let y_rate = tau * z[i];
            y[i] += cfg.dt * y_rate;
            z[i] += cfg.dt * z_rate;
        }
        if y.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(DmpError::NonFinite { step: step + 1 });
        }
        data.extend_from_slice(&y);
    }
    Ok(Trace::from_flat(data, d, cfg.dt).expect("rollout produces a well-formed trace"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout10() -> KernelLayout {
        default_kernel_layout(10, 4.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn layout_placement() {
        let one = default_kernel_layout(1, 4.0, 1.0, 1.0).unwrap();
        assert_eq!(one.centers(), &[1.0]);

        let l = default_kernel_layout(10, 100f64.ln(), 1.0, 1.0).unwrap();
        assert!((l.centers()[0] - 1.0).abs() < 1e-15);
        assert!((l.centers()[9] - 0.01).abs() < 1e-12);
        // log-spaced: constant ratio 100^(-1/9)
        let ratio = 100f64.powf(-1.0 / 9.0);
        for w in l.centers().windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-12);
        }
        assert!(default_kernel_layout(0, 4.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn neighbours_cross_at_half_height() {
        let l = layout10();
        for i in 0..9 {
            let a = basis_activations(l.centers()[i + 1], &l);
            assert!((a[i] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn activation_shape() {
        let l = layout10();
        for i in 0..l.len() {
            let c = l.centers()[i];
            let w = l.widths()[i];
            assert!((basis_activations(c, &l)[i] - 1.0).abs() < 1e-15);
            let at = basis_activations(c + (2.0 * w).sqrt(), &l)[i];
            assert!((at - (-1f64).exp()).abs() < 1e-12);
            let mut prev = 1.0;
            for k in 1..20 {
                let a = basis_activations(c + k as f64 * 0.01, &l)[i];
                assert!(a < prev || (a == 0.0 && prev == 0.0));
                prev = a;
            }
        }
        for s in [0.01, 0.3, 1.0] {
            let act = basis_activations(s, &l);
            assert!(act.iter().all(|&a| (0.0..=1.0).contains(&a)));
            assert!(act.iter().any(|&a| a > 0.1));
        }
    }

    #[test]
    fn forcing_term_cases() {
        let l = layout10();
        let theta: Vec<f64> = (0..10).map(|i| i as f64 - 3.0).collect();
        assert_eq!(forcing_term(0.4, &theta, 2.0, 2.0, &l).unwrap(), 0.0);
        assert_eq!(forcing_term(0.4, &[0.0; 10], 1.0, 0.0, &l).unwrap(), 0.0);
        let single = default_kernel_layout(1, 4.0, 1.0, 1.0).unwrap();
        let f = forcing_term(0.37, &[2.5], 1.2, 0.2, &single).unwrap();
        assert!((f - 2.5 * 0.37 * 1.0).abs() < 1e-15);
        assert!(forcing_term(0.4, &[1.0; 3], 1.0, 0.0, &l).is_err());
    }

    #[test]
    fn degenerate_layout_reports_phase() {
        let l = KernelLayout::new(vec![0.9, 0.8], vec![1e-9, 1e-9]).unwrap();
        assert!(matches!(
            forcing_term(0.1, &[1.0, 1.0], 1.0, 0.0, &l),
            Err(DmpError::DegenerateActivations { .. })
        ));
    }

    #[test]
    fn equilibrium_start_stays_put() {
        let sys = DmpSystem::new(vec![0.3], vec![0.3], Gains::default(), layout10()).unwrap();
        let tr = rollout(&sys, &IntegrationConfig::default()).unwrap();
        assert_eq!(tr.len(), 201);
        assert!(tr.states().all(|s| (s[0] - 0.3).abs() < 1e-9));
    }

    #[test]
    fn identical_dimensions_stay_identical() {
        let theta: Vec<f64> = (0..20).map(|i| ((i % 10) as f64 * 0.7).sin() * 40.0).collect();
        let sys = DmpSystem::new(vec![0.1, 0.1], vec![0.9, 0.9], Gains::default(), layout10())
            .unwrap()
            .with_theta(&theta)
            .unwrap();
        let tr = rollout(&sys, &IntegrationConfig::default()).unwrap();
        assert!(tr.states().all(|s| s[0] == s[1]));
        assert_eq!(tr.state(0), &[0.1, 0.1]);
    }

    #[test]
    fn divergence_is_reported() {
        let gains = Gains {
            alpha_z: 1.0e6,
            beta_z: 2.5e5,
            alpha_s: 4.0,
            tau: 1.0,
        };
        let sys = DmpSystem::new(vec![0.0], vec![1.0], gains, layout10()).unwrap();
        assert!(matches!(
            rollout(&sys, &IntegrationConfig::default()),
            Err(DmpError::NonFinite { .. })
        ));
    }

    #[test]
    fn parameter_count() {
        let sys = DmpSystem::new(vec![0.0; 2], vec![1.0; 2], Gains::default(), layout10()).unwrap();
        assert_eq!(sys.num_parameters(), 20);
        assert!(sys.clone().with_theta(&[0.0; 19]).is_err());
    }
}
