//! Reference semantics written straight from the definitions, plus random
//! formula and trace generators shared by the integration tests.
//!
//! The oracle never calls into the monitor: it walks the syntax tree,
//! enumerates suffixes explicitly and evaluates predicates itself.

#![allow(dead_code)]

use rand::Rng;
use tldmp::formula::{Arg, Comparison, Formula, Predicate, PredicateRegistry};

/// Number of state coordinates (and bare predicates `p0..p2`).
pub const PREDICATES: usize = 3;

/// `p0`, `p1`, `p2` read one coordinate each; positive means true.
pub fn registry() -> PredicateRegistry {
    let mut reg = PredicateRegistry::new();
    for i in 0..PREDICATES {
        reg.register(&format!("p{i}"), 0, move |s, _| s[i]);
    }
    reg
}

fn atom_value(p: &Predicate, state: &[f64]) -> f64 {
    assert!(p.args.is_empty());
    let i: usize = p.name[1..].parse().unwrap();
    let v = state[i];
    match p.comparison {
        None => v,
        Some((Comparison::Less, c)) => c - v,
        Some((Comparison::Greater, c)) => v - c,
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Agg {
    Exact,
    Smooth { k1: f64, k2: f64 },
}

impl Agg {
    pub fn min(self, v: &[f64]) -> f64 {
        let m = v.iter().copied().fold(f64::INFINITY, f64::min);
        match self {
            Agg::Exact => m,
            Agg::Smooth { k1, .. } => {
                let s: f64 = v.iter().map(|x| (-k1 * (x - m)).exp()).sum();
                m - s.ln() / k1
            }
        }
    }

    pub fn max(self, v: &[f64]) -> f64 {
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self {
            Agg::Exact => m,
            Agg::Smooth { k2, .. } => {
                let e: Vec<f64> = v.iter().map(|x| (k2 * (x - m)).exp()).collect();
                let num: f64 = v.iter().zip(&e).map(|(x, w)| x * w).sum();
                num / e.iter().sum::<f64>()
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn normalized(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Robustness of `f` on the suffix of `trace` starting at `t`.
pub fn rho(f: &Formula, trace: &[Vec<f64>], t: usize, agg: Agg, rho_max: f64) -> f64 {
    let n = trace.len();
    let r = |g: &Formula, at: usize| rho(g, trace, at, agg, rho_max);
    match f {
        Formula::True => rho_max,
        Formula::Predicate(p) => atom_value(p, &trace[t]),
        Formula::Not(g) => -r(g, t),
        Formula::And { children, weights } => {
            let w = normalized(weights);
            let v: Vec<f64> = children
                .iter()
                .zip(&w)
                .map(|(c, wi)| {
                    let x = r(c, t);
                    ((0.5 - wi) * sign(x) + 0.5) * x
                })
                .collect();
            agg.min(&v)
        }
        Formula::Or { children, weights } => {
            let w = normalized(weights);
            let v: Vec<f64> = children
                .iter()
                .zip(&w)
                .map(|(c, wi)| {
                    let x = -r(c, t);
                    -(((0.5 - wi) * sign(x) + 0.5) * x)
                })
                .collect();
            agg.max(&v)
        }
        Formula::Eventually(g) => agg.max(&(t..n).map(|u| r(g, u)).collect::<Vec<_>>()),
        Formula::Always(g) => agg.min(&(t..n).map(|u| r(g, u)).collect::<Vec<_>>()),
        Formula::Until(a, b) => {
            let terms: Vec<f64> = (t..n)
                .map(|tp| {
                    if tp == t {
                        r(b, tp)
                    } else {
                        let before: Vec<f64> = (t..tp).map(|u| r(a, u)).collect();
                        agg.min(&[r(b, tp), agg.min(&before)])
                    }
                })
                .collect();
            agg.max(&terms)
        }
        Formula::Then(a, b) => {
            if t + 1 >= n {
                return -rho_max;
            }
            let terms: Vec<f64> = (t + 1..n)
                .map(|tp| {
                    let before: Vec<f64> = (t..tp).map(|u| r(a, u)).collect();
                    agg.min(&[r(b, tp), agg.max(&before)])
                })
                .collect();
            agg.max(&terms)
        }
        Formula::Implies(a, b) => agg.max(&[-r(a, t), r(b, t)]),
    }
}

/// Boolean satisfaction of `f` on the suffix starting at `t`.
pub fn holds(f: &Formula, trace: &[Vec<f64>], t: usize) -> bool {
    let n = trace.len();
    let h = |g: &Formula, at: usize| holds(g, trace, at);
    match f {
        Formula::True => true,
        Formula::Predicate(p) => atom_value(p, &trace[t]) > 0.0,
        Formula::Not(g) => !h(g, t),
        Formula::And { children, .. } => children.iter().all(|c| h(c, t)),
        Formula::Or { children, .. } => children.iter().any(|c| h(c, t)),
        Formula::Eventually(g) => (t..n).any(|u| h(g, u)),
        Formula::Always(g) => (t..n).all(|u| h(g, u)),
        Formula::Until(a, b) => (t..n).any(|tp| h(b, tp) && (t..tp).all(|u| h(a, u))),
        Formula::Then(a, b) => (t + 1..n).any(|tp| h(b, tp) && (t..tp).any(|u| h(a, u))),
        Formula::Implies(a, b) => !h(a, t) || h(b, t),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GenOptions {
    /// Only negate atoms; implication antecedents are atoms.
    pub nnf: bool,
    /// Draw non-unit weights for conjunctions and disjunctions.
    pub weighted: bool,
    /// Allow comparisons such as `p0 > 0.5` in atoms.
    pub comparisons: bool,
    /// Allow the constant `true`.
    pub constant: bool,
}

fn gen_atom<R: Rng>(rng: &mut R, opts: GenOptions) -> Formula {
    if opts.constant && rng.random_bool(0.05) {
        return Formula::True;
    }
    let mut p = Predicate::new(format!("p{}", rng.random_range(0..PREDICATES)), Vec::<Arg>::new());
    if opts.comparisons && rng.random_bool(0.3) {
        let c = (rng.random_range(-4..=4) as f64) * 0.25;
        p = if rng.random_bool(0.5) {
            p.less_than(c)
        } else {
            p.greater_than(c)
        };
    }
    Formula::pred(p)
}

fn gen_weights<R: Rng>(rng: &mut R, n: usize, opts: GenOptions) -> Option<Vec<f64>> {
    if opts.weighted && rng.random_bool(0.7) {
        Some((0..n).map(|_| rng.random_range(0.2..4.0)).collect())
    } else {
        None
    }
}

/// A random formula of depth at most `depth`.
pub fn gen_formula<R: Rng>(rng: &mut R, depth: usize, opts: GenOptions) -> Formula {
    if depth == 0 || rng.random_bool(0.2) {
        let a = gen_atom(rng, opts);
        return if opts.nnf && !matches!(a, Formula::True) && rng.random_bool(0.3) {
            Formula::not(a)
        } else {
            a
        };
    }
    let d = depth - 1;
    match rng.random_range(0..8) {
        0 if !opts.nnf => Formula::not(gen_formula(rng, d, opts)),
        0..=2 => {
            let n = rng.random_range(2..=3);
            let children: Vec<Formula> = (0..n).map(|_| gen_formula(rng, d, opts)).collect();
            let w = gen_weights(rng, n, opts);
            if rng.random_bool(0.5) {
                Formula::and(children, w).unwrap()
            } else {
                Formula::or(children, w).unwrap()
            }
        }
        3 => Formula::eventually(gen_formula(rng, d, opts)),
        4 => Formula::always(gen_formula(rng, d, opts)),
        5 => Formula::until(gen_formula(rng, d, opts), gen_formula(rng, d, opts)),
        6 => Formula::then(gen_formula(rng, d, opts), gen_formula(rng, d, opts)),
        _ => {
            let lhs = if opts.nnf {
                gen_atom(rng, opts)
            } else {
                gen_formula(rng, d, opts)
            };
            Formula::implies(lhs, gen_formula(rng, d, opts))
        }
    }
}

/// A random trace with `len` states of [`PREDICATES`] coordinates.
pub fn gen_states<R: Rng>(rng: &mut R, len: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| (0..PREDICATES).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}

/// A random trace whose coordinates are drawn from `grid`.
pub fn gen_grid_states<R: Rng>(rng: &mut R, len: usize, grid: &[f64]) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| (0..PREDICATES).map(|_| grid[rng.random_range(0..grid.len())]).collect())
        .collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
