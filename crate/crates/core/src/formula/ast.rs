use std::fmt;

use super::ParseError;

/// Argument of a predicate call: either a number or a symbolic name
/// (a region or obstacle, for instance).
#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Number(f64),
    Name(String),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Number(x) => write!(f, "{x}"),
            Arg::Name(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// `f(y) < c`, robustness `c - f(y)`.
    Less,
    /// `f(y) > c`, robustness `f(y) - c`.
    Greater,
}

/// An atomic proposition. Without a comparison the registered function's
/// value is the robustness itself; with one, the value is `f(y)` and the
/// robustness is the signed margin to the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub name: String,
    pub args: Vec<Arg>,
    pub comparison: Option<(Comparison, f64)>,
}

impl Predicate {
    pub fn new(name: impl Into<String>, args: Vec<Arg>) -> Self {
        Self {
            name: name.into(),
            args,
            comparison: None,
        }
    }

    pub fn less_than(mut self, c: f64) -> Self {
        self.comparison = Some((Comparison::Less, c));
        self
    }

    pub fn greater_than(mut self, c: f64) -> Self {
        self.comparison = Some((Comparison::Greater, c));
        self
    }
}

/// Abstract syntax of a weighted temporal logic formula over finite traces.
///
/// `And` and `Or` are n-ary and carry one positive weight per child. The
/// other connectives have fixed arity, encoded in the variant shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Predicate(Predicate),
    Not(Box<Formula>),
    And { children: Vec<Formula>, weights: Vec<f64> },
    Or { children: Vec<Formula>, weights: Vec<f64> },
    Eventually(Box<Formula>),
    Always(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Then(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn pred(p: Predicate) -> Self {
        Formula::Predicate(p)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Formula::Always(Box::new(f))
    }

    pub fn until(lhs: Formula, rhs: Formula) -> Self {
        Formula::Until(Box::new(lhs), Box::new(rhs))
    }

    pub fn then(lhs: Formula, rhs: Formula) -> Self {
        Formula::Then(Box::new(lhs), Box::new(rhs))
    }

    pub fn implies(lhs: Formula, rhs: Formula) -> Self {
        Formula::Implies(Box::new(lhs), Box::new(rhs))
    }

    /// Weighted conjunction. `weights` defaults to all ones when `None`.
    pub fn and(children: Vec<Formula>, weights: Option<Vec<f64>>) -> Result<Self, ParseError> {
        let weights = check_weights(children.len(), weights)?;
        Ok(Formula::And { children, weights })
    }

    /// Weighted disjunction. `weights` defaults to all ones when `None`.
    pub fn or(children: Vec<Formula>, weights: Option<Vec<f64>>) -> Result<Self, ParseError> {
        let weights = check_weights(children.len(), weights)?;
        Ok(Formula::Or { children, weights })
    }

    /// Checks the structural invariants that the enum shape cannot express.
    pub fn validate(&self) -> Result<(), ParseError> {
        match self {
            Formula::True | Formula::Predicate(_) => Ok(()),
            Formula::And { children, weights } | Formula::Or { children, weights } => {
                check_weights(children.len(), Some(weights.clone()))?;
                children.iter().try_for_each(Formula::validate)
            }
            Formula::Not(f) | Formula::Eventually(f) | Formula::Always(f) => f.validate(),
            Formula::Until(a, b) | Formula::Then(a, b) | Formula::Implies(a, b) => {
                a.validate()?;
                b.validate()
            }
        }
    }

    /// Nesting depth; atoms have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Predicate(_) => 0,
            Formula::And { children, .. } | Formula::Or { children, .. } => {
                1 + children.iter().map(Formula::depth).max().unwrap_or(0)
            }
            Formula::Not(f) | Formula::Eventually(f) | Formula::Always(f) => 1 + f.depth(),
            Formula::Until(a, b) | Formula::Then(a, b) | Formula::Implies(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// True when negation is applied only to atoms and implications have an
    /// atomic antecedent, i.e. no smoothed aggregation sits under a sign flip.
    pub fn is_negation_normal(&self) -> bool {
        match self {
            Formula::True | Formula::Predicate(_) => true,
            Formula::Not(f) => matches!(**f, Formula::True | Formula::Predicate(_)),
            Formula::And { children, .. } | Formula::Or { children, .. } => {
                children.iter().all(Formula::is_negation_normal)
            }
            Formula::Eventually(f) | Formula::Always(f) => f.is_negation_normal(),
            Formula::Until(a, b) | Formula::Then(a, b) => a.is_negation_normal() && b.is_negation_normal(),
            Formula::Implies(a, b) => matches!(**a, Formula::True | Formula::Predicate(_)) && b.is_negation_normal(),
        }
    }

    /// Visits every predicate in the tree, left to right.
    pub fn predicates(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        self.collect_predicates(&mut out);
        out
    }

    fn collect_predicates<'a>(&'a self, out: &mut Vec<&'a Predicate>) {
        match self {
            Formula::True => {}
            Formula::Predicate(p) => out.push(p),
            Formula::And { children, .. } | Formula::Or { children, .. } => {
                children.iter().for_each(|c| c.collect_predicates(out))
            }
            Formula::Not(f) | Formula::Eventually(f) | Formula::Always(f) => f.collect_predicates(out),
            Formula::Until(a, b) | Formula::Then(a, b) | Formula::Implies(a, b) => {
                a.collect_predicates(out);
                b.collect_predicates(out);
            }
        }
    }
}

fn check_weights(n: usize, weights: Option<Vec<f64>>) -> Result<Vec<f64>, ParseError> {
    if n < 2 {
        return Err(ParseError::Arity {
            message: format!("weighted conjunction/disjunction needs at least 2 operands, got {n}"),
        });
    }
    let weights = weights.unwrap_or_else(|| vec![1.0; n]);
    if weights.len() != n {
        return Err(ParseError::Arity {
            message: format!("{} weights given for {} operands", weights.len(), n),
        });
    }
    if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(ParseError::NonPositiveWeight { value: w });
    }
    Ok(weights)
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        match self.comparison {
            Some((Comparison::Less, c)) => write!(f, " < {c}"),
            Some((Comparison::Greater, c)) => write!(f, " > {c}"),
            None => Ok(()),
        }
    }
}

/// Prints in the concrete syntax accepted by [`super::parse`]. Binary and
/// n-ary nodes are always parenthesised so the output re-parses to an
/// identical tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::Predicate(p) => {
                if p.comparison.is_some() {
                    write!(f, "({p})")
                } else {
                    write!(f, "{p}")
                }
            }
            Formula::Not(x) => write!(f, "!{x}"),
            Formula::Eventually(x) => write!(f, "F {x}"),
            Formula::Always(x) => write!(f, "G {x}"),
            Formula::And { children, weights } => write_nary(f, "&&", children, weights),
            Formula::Or { children, weights } => write_nary(f, "||", children, weights),
            Formula::Until(a, b) => write!(f, "({a} U {b})"),
            Formula::Then(a, b) => write!(f, "({a} T {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
        }
    }
}

fn write_nary(f: &mut fmt::Formatter<'_>, op: &str, children: &[Formula], weights: &[f64]) -> fmt::Result {
    f.write_str("(")?;
    for (i, c) in children.iter().enumerate() {
        if i > 0 {
            write!(f, " {op}")?;
            if i == 1 && weights.iter().any(|&w| w != 1.0) {
                f.write_str("{")?;
                for (j, w) in weights.iter().enumerate() {
                    if j > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{w}")?;
                }
                f.write_str("}")?;
            }
            f.write_str(" ")?;
        }
        write!(f, "{c}")?;
    }
    f.write_str(")")
}
