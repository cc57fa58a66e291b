//! Boolean, weighted and smoothed evaluation of formulas over traces.
//!
//! Robustness and smoothed robustness share one recursion, parameterised by
//! an [`Aggregation`] that supplies `min` and `max`. Temporal operators are
//! evaluated over trace suffixes; a node only computes the suffixes its
//! parent asks for, so a top-level `Until` costs `O(n)` rather than `O(n^2)`.

use super::ast::Formula;
use super::registry::{PredicateRegistry, StateFn};
use super::smooth::{smooth_max_unchecked, smooth_min_unchecked, SmoothMaxAcc, SmoothMinAcc, SmoothingParams};
use super::EvalError;
use crate::trace::Trace;

/// Scale factor applied to one child value of a weighted conjunction:
/// `((1/2 - w) * sign(x) + 1/2) * x` with `w` the normalized weight.
/// Positive values shrink by `1 - w`, negative ones by `w`, zero stays zero.
#[inline]
fn scale_conjunct(x: f64, w_norm: f64) -> f64 {
    if x > 0.0 {
        (1.0 - w_norm) * x
    } else if x < 0.0 {
        w_norm * x
    } else {
        0.0
    }
}

/// Disjunction counterpart: `-scale_conjunct(-x, w)`.
#[inline]
fn scale_disjunct(x: f64, w_norm: f64) -> f64 {
    -scale_conjunct(-x, w_norm)
}

fn normalize(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Weighted conjunction aggregator: the minimum of the scaled child values.
pub fn weighted_and(weights: &[f64], values: &[f64]) -> Result<f64, EvalError> {
    check_aggregator_inputs(weights, values)?;
    let w = normalize(weights);
    Ok(values
        .iter()
        .zip(&w)
        .map(|(&x, &wi)| scale_conjunct(x, wi))
        .fold(f64::INFINITY, f64::min))
}

/// Weighted disjunction aggregator, `-weighted_and(w, -x)`.
pub fn weighted_or(weights: &[f64], values: &[f64]) -> Result<f64, EvalError> {
    check_aggregator_inputs(weights, values)?;
    let w = normalize(weights);
    Ok(values
        .iter()
        .zip(&w)
        .map(|(&x, &wi)| scale_disjunct(x, wi))
        .fold(f64::NEG_INFINITY, f64::max))
}

fn check_aggregator_inputs(weights: &[f64], values: &[f64]) -> Result<(), EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyAggregation);
    }
    if weights.len() != values.len() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(EvalError::InvalidParameter(format!(
            "need one positive weight per value ({} weights, {} values)",
            weights.len(),
            values.len()
        )));
    }
    Ok(())
}

trait Accumulator {
    fn push(&mut self, x: f64);
    fn value(&self) -> f64;
}

trait Aggregation {
    type MinAcc: Accumulator;
    type MaxAcc: Accumulator;
    fn min_acc(&self) -> Self::MinAcc;
    fn max_acc(&self) -> Self::MaxAcc;
    fn min(&self, v: &[f64]) -> f64;
    fn max(&self, v: &[f64]) -> f64;
}

struct ExactMin(f64);
struct ExactMax(f64);

impl Accumulator for ExactMin {
    fn push(&mut self, x: f64) {
        self.0 = self.0.min(x);
    }
    fn value(&self) -> f64 {
        self.0
    }
}

impl Accumulator for ExactMax {
    fn push(&mut self, x: f64) {
        self.0 = self.0.max(x);
    }
    fn value(&self) -> f64 {
        self.0
    }
}

impl Accumulator for SmoothMinAcc {
    fn push(&mut self, x: f64) {
        SmoothMinAcc::push(self, x)
    }
    fn value(&self) -> f64 {
        SmoothMinAcc::value(self)
    }
}

impl Accumulator for SmoothMaxAcc {
    fn push(&mut self, x: f64) {
        SmoothMaxAcc::push(self, x)
    }
    fn value(&self) -> f64 {
        SmoothMaxAcc::value(self)
    }
}

struct Exact;

impl Aggregation for Exact {
    type MinAcc = ExactMin;
    type MaxAcc = ExactMax;
    fn min_acc(&self) -> ExactMin {
        ExactMin(f64::INFINITY)
    }
    fn max_acc(&self) -> ExactMax {
        ExactMax(f64::NEG_INFINITY)
    }
    fn min(&self, v: &[f64]) -> f64 {
        v.iter().copied().fold(f64::INFINITY, f64::min)
    }
    fn max(&self, v: &[f64]) -> f64 {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Smooth {
    k1: f64,
    k2: f64,
}

impl Aggregation for Smooth {
    type MinAcc = SmoothMinAcc;
    type MaxAcc = SmoothMaxAcc;
    fn min_acc(&self) -> SmoothMinAcc {
        SmoothMinAcc::new(self.k1)
    }
    fn max_acc(&self) -> SmoothMaxAcc {
        SmoothMaxAcc::new(self.k2)
    }
    fn min(&self, v: &[f64]) -> f64 {
        smooth_min_unchecked(v, self.k1)
    }
    fn max(&self, v: &[f64]) -> f64 {
        smooth_max_unchecked(v, self.k2)
    }
}

/// Formula with every predicate resolved to a state function.
enum Node {
    True,
    Pred(StateFn),
    Not(Box<Node>),
    And(Vec<Node>, Vec<f64>),
    Or(Vec<Node>, Vec<f64>),
    Eventually(Box<Node>),
    Always(Box<Node>),
    Until(Box<Node>, Box<Node>),
    Then(Box<Node>, Box<Node>),
    Implies(Box<Node>, Box<Node>),
}

fn compile(f: &Formula, reg: &PredicateRegistry, dim: usize) -> Result<Node, EvalError> {
    let bx = |g: &Formula| compile(g, reg, dim).map(Box::new);
    Ok(match f {
        Formula::True => Node::True,
        Formula::Predicate(p) => Node::Pred(reg.bind(p, dim)?),
        Formula::Not(g) => Node::Not(bx(g)?),
        Formula::And { children, weights } => Node::And(
            children
                .iter()
                .map(|c| compile(c, reg, dim))
                .collect::<Result<_, _>>()?,
            normalize(weights),
        ),
        Formula::Or { children, weights } => Node::Or(
            children
                .iter()
                .map(|c| compile(c, reg, dim))
                .collect::<Result<_, _>>()?,
            normalize(weights),
        ),
        Formula::Eventually(g) => Node::Eventually(bx(g)?),
        Formula::Always(g) => Node::Always(bx(g)?),
        Formula::Until(a, b) => Node::Until(bx(a)?, bx(b)?),
        Formula::Then(a, b) => Node::Then(bx(a)?, bx(b)?),
        Formula::Implies(a, b) => Node::Implies(bx(a)?, bx(b)?),
    })
}

/// Which suffix start positions a node must produce values for.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Span {
    /// Only the whole trace (suffix starting at 0).
    First,
    /// Every suffix `t = 0..n`.
    All,
}

impl Span {
    fn len(self, n: usize) -> usize {
        match self {
            Span::First => 1,
            Span::All => n,
        }
    }
}

struct Evaluator<'a, A> {
    trace: &'a Trace,
    agg: A,
    rho_max: f64,
}

impl<A: Aggregation> Evaluator<'_, A> {
    fn eval(&self, node: &Node, span: Span) -> Vec<f64> {
        let n = self.trace.len();
        let len = span.len(n);
        match node {
            Node::True => vec![self.rho_max; len],
            Node::Pred(f) => (0..len).map(|t| f(self.trace.state(t))).collect(),
            Node::Not(g) => self.eval(g, span).into_iter().map(|x| -x).collect(),
            Node::And(children, w) => {
                let vals: Vec<Vec<f64>> = children.iter().map(|c| self.eval(c, span)).collect();
                let mut scratch = vec![0.0; children.len()];
                (0..len)
                    .map(|t| {
                        for (i, v) in vals.iter().enumerate() {
                            scratch[i] = scale_conjunct(v[t], w[i]);
                        }
                        self.agg.min(&scratch)
                    })
                    .collect()
            }
            Node::Or(children, w) => {
                let vals: Vec<Vec<f64>> = children.iter().map(|c| self.eval(c, span)).collect();
                let mut scratch = vec![0.0; children.len()];
                (0..len)
                    .map(|t| {
                        for (i, v) in vals.iter().enumerate() {
                            scratch[i] = scale_disjunct(v[t], w[i]);
                        }
                        self.agg.max(&scratch)
                    })
                    .collect()
            }
            Node::Eventually(g) => {
                let v = self.eval(g, Span::All);
                self.suffix_fold(&v, span, || self.agg.max_acc())
            }
            Node::Always(g) => {
                let v = self.eval(g, Span::All);
                self.suffix_fold(&v, span, || self.agg.min_acc())
            }
            Node::Until(a, b) => {
                let (va, vb) = (self.eval(a, Span::All), self.eval(b, Span::All));
                (0..len)
                    .map(|t| {
                        // max over t' >= t of min(b[t'], min over t'' in [t, t') of a[t''])
                        let mut outer = self.agg.max_acc();
                        let mut inner = self.agg.min_acc();
                        outer.push(vb[t]);
                        inner.push(va[t]);
                        for tp in t + 1..n {
                            outer.push(self.agg.min(&[vb[tp], inner.value()]));
                            inner.push(va[tp]);
                        }
                        outer.value()
                    })
                    .collect()
            }
            Node::Then(a, b) => {
                let (va, vb) = (self.eval(a, Span::All), self.eval(b, Span::All));
                (0..len)
                    .map(|t| {
                        // max over t' > t of min(b[t'], max over t'' in [t, t') of a[t''])
                        if t + 1 >= n {
                            return -self.rho_max;
                        }
                        let mut outer = self.agg.max_acc();
                        let mut inner = self.agg.max_acc();
                        inner.push(va[t]);
                        for tp in t + 1..n {
                            outer.push(self.agg.min(&[vb[tp], inner.value()]));
                            inner.push(va[tp]);
                        }
                        outer.value()
                    })
                    .collect()
            }
            Node::Implies(a, b) => {
                let (va, vb) = (self.eval(a, span), self.eval(b, span));
                va.iter().zip(&vb).map(|(&x, &y)| self.agg.max(&[-x, y])).collect()
            }
        }
    }

    /// Aggregates `v[t..n]` for each requested suffix start `t`.
    fn suffix_fold<C: Accumulator>(&self, v: &[f64], span: Span, mut acc: impl FnMut() -> C) -> Vec<f64> {
        match span {
            Span::First => {
                let mut a = acc();
                v.iter().for_each(|&x| a.push(x));
                vec![a.value()]
            }
            Span::All => {
                let mut a = acc();
                let mut out = vec![0.0; v.len()];
                for t in (0..v.len()).rev() {
                    a.push(v[t]);
                    out[t] = a.value();
                }
                out
            }
        }
    }
}

fn eval_bool(node: &Node, trace: &Trace, span: Span) -> Vec<bool> {
    let n = trace.len();
    let len = span.len(n);
    match node {
        Node::True => vec![true; len],
        Node::Pred(f) => (0..len).map(|t| f(trace.state(t)) > 0.0).collect(),
        Node::Not(g) => eval_bool(g, trace, span).into_iter().map(|x| !x).collect(),
        Node::And(children, _) => {
            let vals: Vec<Vec<bool>> = children.iter().map(|c| eval_bool(c, trace, span)).collect();
            (0..len).map(|t| vals.iter().all(|v| v[t])).collect()
        }
        Node::Or(children, _) => {
            let vals: Vec<Vec<bool>> = children.iter().map(|c| eval_bool(c, trace, span)).collect();
            (0..len).map(|t| vals.iter().any(|v| v[t])).collect()
        }
        Node::Eventually(g) => {
            let v = eval_bool(g, trace, Span::All);
            (0..len).map(|t| v[t..].iter().any(|&x| x)).collect()
        }
        Node::Always(g) => {
            let v = eval_bool(g, trace, Span::All);
            (0..len).map(|t| v[t..].iter().all(|&x| x)).collect()
        }
        Node::Until(a, b) => {
            let (va, vb) = (eval_bool(a, trace, Span::All), eval_bool(b, trace, Span::All));
            (0..len)
                .map(|t| (t..n).any(|tp| vb[tp] && va[t..tp].iter().all(|&x| x)))
                .collect()
        }
        Node::Then(a, b) => {
            let (va, vb) = (eval_bool(a, trace, Span::All), eval_bool(b, trace, Span::All));
            (0..len)
                .map(|t| (t + 1..n).any(|tp| vb[tp] && va[t..tp].iter().any(|&x| x)))
                .collect()
        }
        Node::Implies(a, b) => {
            let (va, vb) = (eval_bool(a, trace, span), eval_bool(b, trace, span));
            va.iter().zip(&vb).map(|(&x, &y)| !x || y).collect()
        }
    }
}

/// A formula bound to a registry for traces of a fixed state dimension.
///
/// Binding resolves every predicate once, so repeated evaluation (inside an
/// optimizer loop, say) skips name lookups.
pub struct Monitor {
    root: Node,
    dim: usize,
}

impl Monitor {
    pub fn new(formula: &Formula, registry: &PredicateRegistry, dim: usize) -> Result<Self, EvalError> {
        formula.validate()?;
        Ok(Self {
            root: compile(formula, registry, dim)?,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, trace: &Trace) -> Result<(), EvalError> {
        if trace.dim() != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                found: trace.dim(),
            });
        }
        Ok(())
    }

    pub fn satisfies(&self, trace: &Trace) -> Result<bool, EvalError> {
        self.check(trace)?;
        Ok(eval_bool(&self.root, trace, Span::First)[0])
    }

    pub fn robustness(&self, trace: &Trace, rho_max: f64) -> Result<f64, EvalError> {
        self.check(trace)?;
        if !(rho_max.is_finite() && rho_max > 0.0) {
            return Err(EvalError::InvalidParameter(format!(
                "rho_max must be positive, got {rho_max}"
            )));
        }
        let ev = Evaluator {
            trace,
            agg: Exact,
            rho_max,
        };
        Ok(ev.eval(&self.root, Span::First)[0])
    }

    pub fn smooth_robustness(&self, trace: &Trace, params: &SmoothingParams) -> Result<f64, EvalError> {
        self.check(trace)?;
        params.validate()?;
        let ev = Evaluator {
            trace,
            agg: Smooth {
                k1: params.k1,
                k2: params.k2,
            },
            rho_max: params.rho_max,
        };
        Ok(ev.eval(&self.root, Span::First)[0])
    }
}

/// Boolean satisfaction of `formula` by the whole trace.
pub fn satisfies(formula: &Formula, trace: &Trace, registry: &PredicateRegistry) -> Result<bool, EvalError> {
    Monitor::new(formula, registry, trace.dim())?.satisfies(trace)
}

/// Weighted robustness; the constant `true` evaluates to `rho_max`.
pub fn robustness(
    formula: &Formula,
    trace: &Trace,
    registry: &PredicateRegistry,
    rho_max: f64,
) -> Result<f64, EvalError> {
    Monitor::new(formula, registry, trace.dim())?.robustness(trace, rho_max)
}

/// Smoothed weighted robustness.
pub fn smooth_robustness(
    formula: &Formula,
    trace: &Trace,
    registry: &PredicateRegistry,
    params: &SmoothingParams,
) -> Result<f64, EvalError> {
    Monitor::new(formula, registry, trace.dim())?.smooth_robustness(trace, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, smooth_min};

    fn reg() -> PredicateRegistry {
        PredicateRegistry::with_coordinates()
    }

    fn tr(v: &[f64]) -> Trace {
        Trace::scalar(v, 1.0).unwrap()
    }

    #[test]
    fn always_bound_holds() {
        let f = parse("G x(0) < 5").unwrap();
        assert!(satisfies(&f, &tr(&[1.0, 2.0, 3.0]), &reg()).unwrap());
        assert_eq!(robustness(&f, &tr(&[1.0, 2.0, 3.0]), &reg(), 1e6).unwrap(), 2.0);
    }

    #[test]
    fn true_constant() {
        let f = parse("true").unwrap();
        assert!(satisfies(&f, &tr(&[7.0]), &reg()).unwrap());
        assert_eq!(robustness(&f, &tr(&[7.0]), &reg(), 42.0).unwrap(), 42.0);
        let sp = SmoothingParams::new(1.0, 1.0, 42.0).unwrap();
        assert_eq!(smooth_robustness(&f, &tr(&[7.0]), &reg(), &sp).unwrap(), 42.0);
    }

    #[test]
    fn predicate_margin() {
        let f = parse("x(0) < 5").unwrap();
        assert_eq!(robustness(&f, &tr(&[3.0]), &reg(), 1e6).unwrap(), 2.0);
        let sp = SmoothingParams::new(3.0, 3.0, 1e6).unwrap();
        assert_eq!(smooth_robustness(&f, &tr(&[3.0]), &reg(), &sp).unwrap(), 2.0);
    }

    #[test]
    fn aggregators_by_hand() {
        // w = [0.25, 0.75]; positives scaled by 1 - w: [1.5, 0.5].
        assert!((weighted_and(&[1.0, 3.0], &[2.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        // -and(w, [-1, 1]) = -min(2/3 * -1, 2/3 * 1) = 2/3
        assert!((weighted_or(&[2.0, 1.0], &[1.0, -1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        // Two equal weights halve the minimum.
        assert_eq!(weighted_and(&[1.0, 1.0], &[-3.0, 4.0]).unwrap(), -1.5);
        assert_eq!(weighted_and(&[1.0, 1.0], &[0.0, 4.0]).unwrap(), 0.0);
        assert!(weighted_and(&[1.0], &[]).is_err());
    }

    #[test]
    fn smooth_always_composes_smooth_min() {
        let f = parse("G x(0) < 5").unwrap();
        let sp = SmoothingParams::new(1.0, 1.0, 1e6).unwrap();
        let v = smooth_robustness(&f, &tr(&[1.0, 2.0, 3.0]), &reg(), &sp).unwrap();
        let oracle = -((-4f64).exp() + (-3f64).exp() + (-2f64).exp()).ln();
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 1.592394).abs() < 1e-6);
        assert!((v - smooth_min(&[4.0, 3.0, 2.0], 1.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn until_requires_left_before_right() {
        let a = "x(0) > 0.5 && x(0) < 1.5"; // in A  <=> value 1
        let b = "x(0) > 1.5 && x(0) < 2.5"; // in B  <=> value 2
        let f = parse(&format!("({a}) U ({b})")).unwrap();
        let g = parse(&format!("({a}) T ({b})")).unwrap();
        // Enters B at step 1 without A holding at step 0.
        let bad = tr(&[0.0, 2.0, 1.0]);
        assert!(!satisfies(&f, &bad, &reg()).unwrap());
        assert!(!satisfies(&g, &bad, &reg()).unwrap());
        let good = tr(&[1.0, 1.0, 2.0]);
        assert!(satisfies(&f, &good, &reg()).unwrap());
        assert!(satisfies(&g, &good, &reg()).unwrap());
        // Until is satisfied immediately when the right side holds at once.
        assert!(satisfies(&f, &tr(&[2.0, 0.0]), &reg()).unwrap());
        // Then needs a strictly earlier left witness.
        assert!(!satisfies(&g, &tr(&[2.0, 2.0]), &reg()).unwrap());
        assert!(robustness(&g, &tr(&[1.0]), &reg(), 9.0).unwrap() == -9.0);
    }

    #[test]
    fn implication() {
        let f = parse("x(0) > 0 -> F x(0) > 2").unwrap();
        assert!(satisfies(&f, &tr(&[-1.0, 0.0]), &reg()).unwrap());
        assert!(!satisfies(&f, &tr(&[1.0, 0.0]), &reg()).unwrap());
        assert!(satisfies(&f, &tr(&[1.0, 3.0]), &reg()).unwrap());
        assert_eq!(robustness(&f, &tr(&[1.0, 0.0]), &reg(), 1e6).unwrap(), -1.0);
    }

    #[test]
    fn unknown_predicate_is_an_evaluation_error() {
        let f = parse("F nowhere(Z)").unwrap();
        assert!(matches!(
            satisfies(&f, &tr(&[0.0]), &reg()),
            Err(EvalError::UnknownPredicate { ref name, arity: 1 }) if name == "nowhere"
        ));
        let g = parse("x(3) < 1").unwrap();
        assert!(matches!(
            robustness(&g, &tr(&[0.0]), &reg(), 1.0),
            Err(EvalError::BadPredicate { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let m = Monitor::new(&parse("x(0) < 1").unwrap(), &reg(), 2).unwrap();
        assert!(matches!(
            m.satisfies(&tr(&[0.0])),
            Err(EvalError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn nested_temporal_operators_all_suffixes() {
        // G F p on a trace where p holds only at the end: true (last suffix sees it).
        let f = parse("G F x(0) > 0").unwrap();
        assert!(satisfies(&f, &tr(&[-1.0, -1.0, 1.0]), &reg()).unwrap());
        assert_eq!(robustness(&f, &tr(&[-1.0, -1.0, 1.0]), &reg(), 1e6).unwrap(), 1.0);
        assert!(!satisfies(&f, &tr(&[1.0, -1.0, -1.0]), &reg()).unwrap());
        assert_eq!(robustness(&f, &tr(&[1.0, -1.0, -1.0]), &reg(), 1e6).unwrap(), -1.0);
    }
}
