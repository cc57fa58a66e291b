//! Black-box policy improvement by weighted averaging.
//!
//! Each update draws `M` parameter vectors from `N(mean, cov)`, scores them
//! with an [`Objective`], turns costs into probabilities by normalized
//! exponentiation with eliteness `h`, and then
//!
//! 1. recomputes the covariance as the probability-weighted scatter of the
//!    samples about the *current* mean,
//! 2. clamps its eigenvalues into `[lambda_min, lambda_max]`,
//! 3. moves the mean to the probability-weighted sample average.
//!
//! There is no step-size path or rank-one update: exploration changes only
//! through the weighted scatter and the eigenvalue clamp.

mod distribution;
mod tltl;

pub use distribution::{
    bound_covariance, compute_sample_weights, sample_parameters, update_distribution, SearchDistribution,
};
pub use tltl::{cost_from_robustness, optimize, tltl_cost, TltlObjective};

use std::error::Error as StdError;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use distribution::Sampler;

pub type BoxError = Box<dyn StdError + Send + Sync + 'static>;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("covariance is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },
    #[error("sample weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("{0}")]
    Shape(String),
    #[error("invalid optimizer settings: {0}")]
    Config(String),
    #[error("evaluation failed at update {update}, {}: {source}", match sample { Some(m) => format!("sample {m}"), None => "mean".to_string() })]
    Evaluation {
        update: usize,
        /// `None` when the failing evaluation was the mean parameters.
        sample: Option<usize>,
        #[source]
        source: BoxError,
    },
    #[error("could not build evaluation thread pool: {0}")]
    ThreadPool(String),
}

/// Cost of one parameter vector, plus the smoothed robustness behind it when
/// the objective has one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub cost: f64,
    pub robustness: Option<f64>,
}

/// A black-box cost to minimize. Implementations must be pure: the same
/// parameters always give the same outcome.
pub trait Objective: Sync {
    fn evaluate(&self, theta: &[f64]) -> Result<Outcome, BoxError>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, theta: &[f64]) -> Result<Outcome, BoxError> {
        Ok(Outcome {
            cost: self(theta),
            robustness: None,
        })
    }
}

fn default_threshold() -> f64 {
    1e-6
}

/// Settings of the exploration/evaluation/update loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Samples per update (`M`).
    #[serde(rename = "M")]
    pub samples: usize,
    /// Eliteness `h`; zero gives uniform weights and no learning.
    #[serde(rename = "h")]
    pub eliteness: f64,
    pub lambda_init: f64,
    pub lambda_min: f64,
    /// `None` leaves the largest eigenvalue unbounded.
    #[serde(default)]
    pub lambda_max: Option<f64>,
    pub max_updates: usize,
    /// The loop stops once the mean parameters cost at most this much.
    #[serde(default = "default_threshold")]
    pub convergence_threshold: f64,
    pub seed: u64,
    /// Worker threads for sample evaluation; `None` uses the global pool.
    /// Results do not depend on this.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            samples: 20,
            eliteness: 10.0,
            lambda_init: 0.05,
            lambda_min: 0.05,
            lambda_max: None,
            max_updates: 300,
            convergence_threshold: default_threshold(),
            seed: 0,
            threads: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let fail = |m: String| Err(OptimizerError::Config(m));
        if self.samples < 2 {
            return fail(format!("M must be at least 2, got {}", self.samples));
        }
        if !(self.eliteness.is_finite() && self.eliteness >= 0.0) {
            return fail(format!("h must be non-negative, got {}", self.eliteness));
        }
        if !(self.lambda_min.is_finite() && self.lambda_min > 0.0) {
            return fail(format!("lambda_min must be positive, got {}", self.lambda_min));
        }
        if !(self.lambda_init.is_finite() && self.lambda_init >= self.lambda_min) {
            return fail(format!(
                "lambda_init must be at least lambda_min ({}), got {}",
                self.lambda_min, self.lambda_init
            ));
        }
        if let Some(max) = self.lambda_max {
            if !(max >= self.lambda_min) {
                return fail(format!("lambda_max must be at least lambda_min, got {max}"));
            }
        }
        if !(self.convergence_threshold >= 0.0) {
            return fail(format!(
                "convergence_threshold must be non-negative, got {}",
                self.convergence_threshold
            ));
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        Ok(())
    }
}

/// One row of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    /// 1-based update index.
    pub update: usize,
    /// Cost of the mean parameters after this update.
    pub mean_cost: f64,
    /// Lowest cost among this update's samples.
    pub min_cost: f64,
    /// Smoothed robustness of the mean parameters after this update.
    pub mean_robustness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// Final mean parameters.
    pub theta: Vec<f64>,
    pub history: Vec<UpdateRecord>,
    pub converged: bool,
    pub updates: usize,
    /// Outcome of the final mean parameters.
    pub outcome: Outcome,
}

/// What one call to [`Pibb::step`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub record: UpdateRecord,
    pub costs: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Stateful optimizer, for callers that want to inspect or stop the loop
/// themselves. [`minimize`] drives it to convergence.
pub struct Pibb<'a, O: Objective + ?Sized> {
    objective: &'a O,
    cfg: OptimizerConfig,
    dist: SearchDistribution,
    updates: usize,
    pool: Option<rayon::ThreadPool>,
}

impl<'a, O: Objective + ?Sized> Pibb<'a, O> {
    /// Starts from `initial` with covariance `lambda_init * I`.
    pub fn new(objective: &'a O, initial: &[f64], cfg: OptimizerConfig) -> Result<Self, OptimizerError> {
        cfg.validate()?;
        if initial.is_empty() {
            return Err(OptimizerError::Shape("parameter vector is empty".into()));
        }
        let pool = match cfg.threads {
            Some(n) if n > 1 => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| OptimizerError::ThreadPool(e.to_string()))?,
            ),
            _ => None,
        };
        let dist = SearchDistribution::isotropic(DVector::from_column_slice(initial), cfg.lambda_init);
        Ok(Self {
            objective,
            cfg,
            dist,
            updates: 0,
            pool,
        })
    }

    pub fn distribution(&self) -> &SearchDistribution {
        &self.dist
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn evaluate_mean(&self) -> Result<Outcome, OptimizerError> {
        self.objective
            .evaluate(self.dist.mean.as_slice())
            .map_err(|source| OptimizerError::Evaluation {
                update: self.updates,
                sample: None,
                source,
            })
    }

    /// Generator for sample `m` of update `u`: the master seed selects the
    /// key, `(u, m)` the stream, so draws do not depend on evaluation order.
    fn sample_rng(&self, update: usize, m: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(((update as u64) << 32) | m as u64);
        rng
    }

    fn evaluate_samples(&self, samples: &[DVector<f64>], update: usize) -> Result<Vec<f64>, OptimizerError> {
        let eval = |(m, theta): (usize, &DVector<f64>)| {
            self.objective
                .evaluate(theta.as_slice())
                .map(|o| o.cost)
                .map_err(|source| OptimizerError::Evaluation {
                    update,
                    sample: Some(m),
                    source,
                })
        };
        match (&self.pool, self.cfg.threads) {
            (_, Some(1)) => samples.iter().enumerate().map(eval).collect(),
            (Some(pool), _) => pool.install(|| samples.par_iter().enumerate().map(eval).collect()),
            (None, _) => samples.par_iter().enumerate().map(eval).collect(),
        }
    }

    /// Runs one exploration/evaluation/update round and evaluates the new mean.
    pub fn step(&mut self) -> Result<StepReport, OptimizerError> {
        let update = self.updates + 1;
        let sampler = Sampler::new(&self.dist)?;
        let samples: Vec<DVector<f64>> = (0..self.cfg.samples)
            .map(|m| sampler.draw(&mut self.sample_rng(update, m)))
            .collect();
        let costs = self.evaluate_samples(&samples, update)?;
        if let Some(bad) = costs.iter().position(|c| !c.is_finite()) {
            return Err(OptimizerError::Evaluation {
                update,
                sample: Some(bad),
                source: format!("non-finite cost {}", costs[bad]).into(),
            });
        }
        let weights = compute_sample_weights(&costs, self.cfg.eliteness);
        self.dist = update_distribution(&self.dist, &samples, &weights, self.cfg.lambda_min, self.cfg.lambda_max)?;
        self.updates = update;
        let mean = self.evaluate_mean()?;
        let record = UpdateRecord {
            update,
            mean_cost: mean.cost,
            min_cost: costs.iter().copied().fold(f64::INFINITY, f64::min),
            mean_robustness: mean.robustness,
        };
        Ok(StepReport { record, costs, weights })
    }
}

/// Minimizes `objective` from `initial` until the mean parameters cost at
/// most `cfg.convergence_threshold` or `cfg.max_updates` updates have run.
pub fn minimize<O: Objective + ?Sized>(
    objective: &O,
    initial: &[f64],
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult, OptimizerError> {
    minimize_with(objective, initial, cfg, |_| {})
}

/// [`minimize`], calling `on_update` after every update.
pub fn minimize_with<O: Objective + ?Sized>(
    objective: &O,
    initial: &[f64],
    cfg: &OptimizerConfig,
    mut on_update: impl FnMut(&UpdateRecord),
) -> Result<OptimizationResult, OptimizerError> {
    let mut opt = Pibb::new(objective, initial, cfg.clone())?;
    let mut outcome = opt.evaluate_mean()?;
    let mut converged = outcome.cost <= cfg.convergence_threshold;
    let mut history = Vec::new();
    while !converged && opt.updates() < cfg.max_updates {
        let report = opt.step()?;
        outcome = Outcome {
            cost: report.record.mean_cost,
            robustness: report.record.mean_robustness,
        };
        converged = outcome.cost <= cfg.convergence_threshold;
        on_update(&report.record);
        history.push(report.record);
    }
    Ok(OptimizationResult {
        theta: opt.distribution().mean.as_slice().to_vec(),
        updates: history.len(),
        history,
        converged,
        outcome,
    })
}
