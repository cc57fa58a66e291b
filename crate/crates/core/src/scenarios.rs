//! Planar task scenarios: discs for regions and obstacles, predicates over
//! them, the two reference tasks and a distance-based baseline cost.
//!
//! `in(NAME)` is the signed depth of the state inside region `NAME` and
//! `clear(NAME)` is the signed clearance from obstacle `NAME`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dmp::{default_kernel_layout, rollout, DmpError, DmpSystem, Gains, IntegrationConfig};
use crate::formula::{parse_with_weights, Arg, EvalError, Formula, Monitor, PredicateRegistry, SmoothingParams};
use crate::optimizer::{
    minimize_with, OptimizationResult, OptimizerConfig, OptimizerError, TltlObjective, UpdateRecord,
};
use crate::trace::Trace;

/// A named disc in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub name: String,
    pub center: [f64; 2],
    pub radius: f64,
}

impl Region {
    pub fn new(name: &str, center: [f64; 2], radius: f64) -> Self {
        Self {
            name: name.to_string(),
            center,
            radius,
        }
    }

    pub fn distance(&self, point: &[f64]) -> f64 {
        (point[0] - self.center[0]).hypot(point[1] - self.center[1])
    }
}

/// `radius - |point - center|`: positive inside the disc.
pub fn region_robustness(point: &[f64], region: &Region) -> f64 {
    region.radius - region.distance(point)
}

/// `|point - center| - radius`: positive outside the disc.
pub fn obstacle_clearance(point: &[f64], obstacle: &Region) -> f64 {
    obstacle.distance(point) - obstacle.radius
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    /// A field failed to parse or validate; `path` locates it, for example
    /// `regions[0].radius`.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown region `{0}`")]
    MissingRegion(String),
    #[error(transparent)]
    Dmp(#[from] DmpError),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

fn invalid(path: impl Into<String>, message: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        message: message.to_string(),
    }
}

fn default_kernels() -> usize {
    10
}

/// Movement primitive settings shared by both planar dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmpSettings {
    /// Kernels per dimension.
    #[serde(default = "default_kernels")]
    pub kernels: usize,
    #[serde(default)]
    pub gains: Gains,
}

impl Default for DmpSettings {
    fn default() -> Self {
        Self {
            kernels: default_kernels(),
            gains: Gains::default(),
        }
    }
}

/// Everything needed to learn one planar task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub start: [f64; 2],
    pub goal: [f64; 2],
    #[serde(default)]
    pub regions: Vec<Region>,
    #[serde(default)]
    pub obstacles: Vec<Region>,
    pub formula: String,
    /// Named weights usable inside weight lists, e.g. `||{w_A, w_B}`.
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub smoothing: SmoothingParams,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub dmp: DmpSettings,
}

impl ScenarioSpec {
    /// Parses and validates a JSON scenario. Errors carry the offending key
    /// path.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "<root>".to_string() } else { path }, e.into_inner())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (key, p) in [("start", self.start), ("goal", self.goal)] {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(invalid(key, "coordinates must be finite"));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for (key, list) in [("regions", &self.regions), ("obstacles", &self.obstacles)] {
            for (i, r) in list.iter().enumerate() {
                if r.name.is_empty() {
                    return Err(invalid(format!("{key}[{i}].name"), "name must not be empty"));
                }
                if !seen.insert((key, r.name.as_str())) {
                    return Err(invalid(
                        format!("{key}[{i}].name"),
                        format!("duplicate name `{}`", r.name),
                    ));
                }
                if r.center.iter().any(|v| !v.is_finite()) {
                    return Err(invalid(format!("{key}[{i}].center"), "coordinates must be finite"));
                }
                if !(r.radius.is_finite() && r.radius > 0.0) {
                    return Err(invalid(
                        format!("{key}[{i}].radius"),
                        format!("radius must be positive, got {}", r.radius),
                    ));
                }
            }
        }
        for (name, w) in &self.weights {
            if !(w.is_finite() && *w > 0.0) {
                return Err(invalid(
                    format!("weights.{name}"),
                    format!("weight must be positive, got {w}"),
                ));
            }
        }
        self.optimizer.validate().map_err(|e| invalid("optimizer", e))?;
        self.smoothing.validate().map_err(|e| invalid("smoothing", e))?;
        self.integration.validate().map_err(|e| invalid("integration", e))?;
        if self.dmp.kernels == 0 {
            return Err(invalid("dmp.kernels", "at least one kernel is required"));
        }
        let formula = self.parsed_formula()?;
        let registry = self.registry();
        for p in formula.predicates() {
            registry.bind(p, 2).map_err(|e| invalid("formula", e))?;
        }
        self.dmp_system().map_err(|e| invalid("dmp", e))?;
        Ok(())
    }

    pub fn region(&self, name: &str) -> Result<&Region, ScenarioError> {
        self.regions
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| ScenarioError::MissingRegion(name.to_string()))
    }

    pub fn parsed_formula(&self) -> Result<Formula, ScenarioError> {
        let table = self.weights.iter().map(|(k, v)| (k.clone(), *v)).collect();
        parse_with_weights(&self.formula, &table).map_err(|e| invalid("formula", e))
    }

    /// `in(NAME)` over the regions and `clear(NAME)` over the obstacles.
    pub fn registry(&self) -> PredicateRegistry {
        let mut reg = PredicateRegistry::new();
        let regions = Arc::new(self.regions.clone());
        let obstacles = Arc::new(self.obstacles.clone());
        reg.register_binder("in", 1, move |args, dim| {
            let r = lookup(&regions, &args[0], dim, "region")?;
            Ok(Arc::new(move |s: &[f64]| region_robustness(s, &r)))
        });
        reg.register_binder("clear", 1, move |args, dim| {
            let o = lookup(&obstacles, &args[0], dim, "obstacle")?;
            Ok(Arc::new(move |s: &[f64]| obstacle_clearance(s, &o)))
        });
        reg
    }

    /// Two-dimensional primitive from start to goal with zero shape
    /// parameters, kernels spread over the integration horizon.
    pub fn dmp_system(&self) -> Result<DmpSystem, DmpError> {
        let g = self.dmp.gains;
        let layout = default_kernel_layout(self.dmp.kernels, g.alpha_s, g.tau, self.integration.duration())?;
        DmpSystem::new(self.start.to_vec(), self.goal.to_vec(), g, layout)
    }
}

fn lookup(list: &[Region], arg: &Arg, dim: usize, kind: &str) -> Result<Region, String> {
    if dim != 2 {
        return Err(format!("{kind} predicates need planar states, got dimension {dim}"));
    }
    let name = match arg {
        Arg::Name(n) => n.as_str(),
        Arg::Number(v) => return Err(format!("expected a {kind} name, got {v}")),
    };
    list.iter()
        .find(|r| r.name == name)
        .cloned()
        .ok_or_else(|| format!("unknown {kind} `{name}`"))
}

pub const START: [f64; 2] = [0.05, 0.05];
pub const GOAL: [f64; 2] = [0.95, 0.95];
/// Radius of the goal region `G`, centered on the goal.
pub const GOAL_RADIUS: f64 = 0.08;

/// Visit `A`, then `B`, never `B` before `A`, and always avoid `O1` and `O2`.
pub const CASE1_FORMULA: &str = "(in(A) T in(B)) && (!in(B) U in(A)) && G (clear(O1) && clear(O2))";

/// Visit `A` or `B` (weighted by preference), reach `G` but not before `A` or
/// `B`, and always avoid `O`.
pub const CASE2_FORMULA: &str =
    "(F in(A) ||{w_A, w_B} F in(B)) && F in(G) && (!in(G) U (in(A) ||{w_A, w_B} in(B))) && G clear(O)";

fn reference_optimizer() -> OptimizerConfig {
    OptimizerConfig {
        samples: 20,
        eliteness: 10.0,
        lambda_init: 0.05,
        lambda_min: 0.05,
        lambda_max: None,
        max_updates: 300,
        ..OptimizerConfig::default()
    }
}

/// Two regions between start and goal, each behind an obstacle on the
/// diagonal.
pub fn build_case1() -> ScenarioSpec {
    ScenarioSpec {
        start: START,
        goal: GOAL,
        regions: vec![
            Region::new("A", [0.35, 0.65], 0.08),
            Region::new("B", [0.65, 0.35], 0.08),
            Region::new("G", GOAL, GOAL_RADIUS),
        ],
        obstacles: vec![
            Region::new("O1", [0.35, 0.35], 0.10),
            Region::new("O2", [0.65, 0.65], 0.10),
        ],
        formula: CASE1_FORMULA.to_string(),
        weights: BTreeMap::new(),
        optimizer: reference_optimizer(),
        smoothing: SmoothingParams::default(),
        integration: IntegrationConfig::default(),
        dmp: DmpSettings::default(),
    }
}

/// Two alternative routes around a central obstacle; the weights express
/// which region is preferred.
pub fn build_case2(w_a: f64, w_b: f64) -> ScenarioSpec {
    ScenarioSpec {
        start: START,
        goal: GOAL,
        regions: vec![
            Region::new("A", [0.30, 0.60], 0.08),
            Region::new("B", [0.60, 0.30], 0.08),
            Region::new("G", GOAL, GOAL_RADIUS),
        ],
        obstacles: vec![Region::new("O", [0.5, 0.5], 0.12)],
        formula: CASE2_FORMULA.to_string(),
        weights: BTreeMap::from([("w_A".to_string(), w_a), ("w_B".to_string(), w_b)]),
        optimizer: reference_optimizer(),
        smoothing: SmoothingParams::default(),
        integration: IntegrationConfig::default(),
        dmp: DmpSettings::default(),
    }
}

/// Whether any state of the trace lies inside the region (boundary included).
pub fn visits(trace: &Trace, region: &Region) -> bool {
    trace.states().any(|s| region_robustness(s, region) >= 0.0)
}

/// Closest approach of the trace to the region's center.
pub fn min_distance(trace: &Trace, region: &Region) -> f64 {
    trace.states().map(|s| region.distance(s)).fold(f64::INFINITY, f64::min)
}

/// Distance-based baseline `-c1 J_O + c2 J_G`. `J_O` sums, over obstacles,
/// the deepest penetration `min_t (d - r)` when negative and zero otherwise;
/// `J_G` is the sum of the closest approaches to regions `A` and `B`.
pub fn conventional_cost(trace: &Trace, scenario: &ScenarioSpec, c1: f64, c2: f64) -> Result<f64, ScenarioError> {
    let a = scenario.region("A")?;
    let b = scenario.region("B")?;
    let j_o: f64 = scenario
        .obstacles
        .iter()
        .map(|o| {
            let worst = trace
                .states()
                .map(|s| obstacle_clearance(s, o))
                .fold(f64::INFINITY, f64::min);
            worst.min(0.0)
        })
        .sum();
    let j_g = min_distance(trace, a) + min_distance(trace, b);
    Ok(-c1 * j_o + c2 * j_g)
}

/// Result of learning a scenario: the optimizer's output plus the final
/// trajectory and how well it does.
#[derive(Debug, Clone)]
pub struct Learned {
    pub result: OptimizationResult,
    pub trajectory: Trace,
    pub satisfied: bool,
    pub robustness: f64,
    pub smoothed_robustness: f64,
}

impl Learned {
    /// Converged and the final trajectory satisfies the formula.
    pub fn success(&self) -> bool {
        self.result.converged && self.satisfied
    }
}

/// Learns shape parameters for `spec` from zero, calling `on_update` after
/// each update.
pub fn learn(spec: &ScenarioSpec, on_update: impl FnMut(&UpdateRecord)) -> Result<Learned, ScenarioError> {
    spec.validate()?;
    let formula = spec.parsed_formula()?;
    let registry = spec.registry();
    let sys = spec.dmp_system()?;
    let objective = TltlObjective::new(sys.clone(), spec.integration, &formula, &registry, spec.smoothing)?;
    let result = minimize_with(&objective, sys.theta(), &spec.optimizer, on_update)?;
    let trajectory = rollout(&sys.with_theta(&result.theta)?, &spec.integration)?;
    let monitor = Monitor::new(&formula, &registry, 2)?;
    Ok(Learned {
        satisfied: monitor.satisfies(&trajectory)?,
        robustness: monitor.robustness(&trajectory, spec.smoothing.rho_max)?,
        smoothed_robustness: monitor.smooth_robustness(&trajectory, &spec.smoothing)?,
        result,
        trajectory,
    })
}
