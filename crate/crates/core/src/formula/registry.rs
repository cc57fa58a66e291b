use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::ast::{Arg, Comparison, Predicate};
use super::EvalError;

/// A predicate bound to concrete arguments: state vector to real value.
pub type StateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

type Binder = Arc<dyn Fn(&[Arg], usize) -> Result<StateFn, String> + Send + Sync>;

/// Maps `(name, arity)` to a real-valued function of the state.
///
/// For a bare predicate `p(args)` the function value is the robustness
/// (positive means the predicate holds). For a comparison `p(args) < c`
/// the value is `f(y)` and the robustness is `c - f(y)`; for `> c` it is
/// `f(y) - c`.
#[derive(Clone, Default)]
pub struct PredicateRegistry {
    entries: HashMap<(String, usize), Binder>,
}

impl fmt::Debug for PredicateRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut keys: Vec<_> = self.entries.keys().collect();
        keys.sort();
        f.debug_struct("PredicateRegistry").field("entries", &keys).finish()
    }
}

impl PredicateRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with `x(i)`, the i-th state coordinate. Useful with comparisons
    /// such as `x(0) < 5`.
    pub fn with_coordinates() -> Self {
        let mut reg = Self::new();
        reg.register_binder("x", 1, |args, dim| {
            let i = match args[0] {
                Arg::Number(v) if v >= 0.0 && v.fract() == 0.0 => v as usize,
                _ => return Err(format!("expected a coordinate index, got {}", args[0])),
            };
            if i >= dim {
                return Err(format!("coordinate {i} out of range for {dim}-dimensional states"));
            }
            Ok(Arc::new(move |s: &[f64]| s[i]))
        });
        reg
    }

    /// Registers a function evaluated with its arguments on every call.
    pub fn register<F>(&mut self, name: &str, arity: usize, f: F)
    where
        F: Fn(&[f64], &[Arg]) -> f64 + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        self.register_binder(name, arity, move |args, _dim| {
            let f = Arc::clone(&f);
            let args = args.to_vec();
            Ok(Arc::new(move |s: &[f64]| f(s, &args)))
        });
    }

    /// Registers a binder that resolves arguments once, before any state is
    /// evaluated. The binder also receives the state dimension and may reject
    /// it.
    pub fn register_binder<B>(&mut self, name: &str, arity: usize, binder: B)
    where
        B: Fn(&[Arg], usize) -> Result<StateFn, String> + Send + Sync + 'static,
    {
        self.entries.insert((name.to_string(), arity), Arc::new(binder));
    }

    pub fn contains(&self, name: &str, arity: usize) -> bool {
        self.entries.contains_key(&(name.to_string(), arity))
    }

    /// Resolves a predicate into its robustness function.
    pub fn bind(&self, p: &Predicate, dim: usize) -> Result<StateFn, EvalError> {
        let binder = self
            .entries
            .get(&(p.name.clone(), p.args.len()))
            .ok_or_else(|| EvalError::UnknownPredicate {
                name: p.name.clone(),
                arity: p.args.len(),
            })?;
        let f = binder(&p.args, dim).map_err(|reason| EvalError::BadPredicate {
            name: p.name.clone(),
            reason,
        })?;
        Ok(match p.comparison {
            None => f,
            Some((Comparison::Less, c)) => Arc::new(move |s: &[f64]| c - f(s)),
            Some((Comparison::Greater, c)) => Arc::new(move |s: &[f64]| f(s) - c),
        })
    }
}
