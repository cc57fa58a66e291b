use crate::dmp::{rollout, DmpSystem, IntegrationConfig};
use crate::formula::{EvalError, Formula, Monitor, PredicateRegistry, SmoothingParams};
use crate::trace::Trace;

use super::{minimize, BoxError, Objective, OptimizationResult, OptimizerConfig, OptimizerError, Outcome};

/// Cost of a smoothed robustness value: its violation depth, zero once
/// non-negative.
pub fn cost_from_robustness(smoothed: f64) -> f64 {
    if smoothed < 0.0 {
        -smoothed
    } else {
        0.0
    }
}

/// Temporal-logic cost of a trace.
pub fn tltl_cost(
    trace: &Trace,
    formula: &Formula,
    registry: &PredicateRegistry,
    params: &SmoothingParams,
) -> Result<f64, EvalError> {
    crate::formula::smooth_robustness(formula, trace, registry, params).map(cost_from_robustness)
}

/// Rolls out the primitive with candidate shape parameters and scores the
/// trajectory against a formula.
pub struct TltlObjective {
    system: DmpSystem,
    integration: IntegrationConfig,
    monitor: Monitor,
    smoothing: SmoothingParams,
}

impl TltlObjective {
    pub fn new(
        system: DmpSystem,
        integration: IntegrationConfig,
        formula: &Formula,
        registry: &PredicateRegistry,
        smoothing: SmoothingParams,
    ) -> Result<Self, EvalError> {
        smoothing.validate()?;
        let monitor = Monitor::new(formula, registry, system.dim())?;
        Ok(Self {
            system,
            integration,
            monitor,
            smoothing,
        })
    }

    pub fn trajectory(&self, theta: &[f64]) -> Result<Trace, BoxError> {
        let sys = self.system.clone().with_theta(theta)?;
        Ok(rollout(&sys, &self.integration)?)
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    pub fn system(&self) -> &DmpSystem {
        &self.system
    }
}

impl Objective for TltlObjective {
    fn evaluate(&self, theta: &[f64]) -> Result<Outcome, BoxError> {
        let trace = self.trajectory(theta)?;
        let rho = self.monitor.smooth_robustness(&trace, &self.smoothing)?;
        Ok(Outcome {
            cost: cost_from_robustness(rho),
            robustness: Some(rho),
        })
    }
}

/// Learns shape parameters for `sys` so its rollout satisfies `formula`,
/// starting from the parameters already in `sys`.
pub fn optimize(
    sys: &DmpSystem,
    integration: &IntegrationConfig,
    formula: &Formula,
    registry: &PredicateRegistry,
    smoothing: &SmoothingParams,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult, OptimizerError> {
    let objective = TltlObjective::new(sys.clone(), *integration, formula, registry, *smoothing).map_err(|e| {
        OptimizerError::Evaluation {
            update: 0,
            sample: None,
            source: Box::new(e),
        }
    })?;
    minimize(&objective, sys.theta(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmp::{default_kernel_layout, Gains};
    use crate::formula::parse;

    #[test]
    fn cost_branches() {
        assert_eq!(cost_from_robustness(-0.2), 0.2);
        assert_eq!(cost_from_robustness(0.3), 0.0);
        assert_eq!(cost_from_robustness(0.0), 0.0);
    }

    #[test]
    fn satisfied_start_converges_immediately() {
        let layout = default_kernel_layout(10, 4.0, 1.0, 1.0).unwrap();
        let sys = DmpSystem::new(vec![0.0], vec![1.0], Gains::default(), layout).unwrap();
        let f = parse("F x(0) > 0.9").unwrap();
        let res = optimize(
            &sys,
            &IntegrationConfig::default(),
            &f,
            &PredicateRegistry::with_coordinates(),
            &SmoothingParams::default(),
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(res.converged);
        assert_eq!(res.updates, 0);
        assert_eq!(res.theta, vec![0.0; 10]);
    }

    #[test]
    fn unknown_predicate_fails_before_optimizing() {
        let layout = default_kernel_layout(3, 4.0, 1.0, 1.0).unwrap();
        let sys = DmpSystem::new(vec![0.0], vec![1.0], Gains::default(), layout).unwrap();
        let f = parse("F nope").unwrap();
        let err = optimize(
            &sys,
            &IntegrationConfig::default(),
            &f,
            &PredicateRegistry::new(),
            &SmoothingParams::default(),
            &OptimizerConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            OptimizerError::Evaluation {
                update: 0,
                sample: None,
                ..
            }
        ));
    }
}
