use std::fmt;

use thiserror::Error;

/// A numeric slot in a formula: either a literal or a named parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Num(f64),
    Param(String),
}

impl Term {
    pub fn value(&self) -> Option<f64> {
        match self {
            Term::Num(v) => Some(*v),
            Term::Param(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Num(v) => write!(f, "{v}"),
            Term::Param(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
        }
    }

    /// Robustness of `value <op> threshold`; strict and non-strict share it.
    pub fn robustness(self, value: f64, threshold: f64) -> f64 {
        match self {
            Comparison::Lt | Comparison::Le => threshold - value,
            Comparison::Gt | Comparison::Ge => value - threshold,
        }
    }

    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::Lt => value < threshold,
            Comparison::Le => value <= threshold,
            Comparison::Gt => value > threshold,
            Comparison::Ge => value >= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregate {
    Int,
    Min,
    Max,
}

impl Aggregate {
    pub fn keyword(self) -> &'static str {
        match self {
            Aggregate::Int => "Int",
            Aggregate::Min => "Min",
            Aggregate::Max => "Max",
        }
    }
}

/// Closed time window `[lo, hi]`, relative to the evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: Term,
    pub hi: Term,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo: Term::Num(lo),
            hi: Term::Num(hi),
        }
    }

    /// Both bounds, if neither is a parameter.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        Some((self.lo.value()?, self.hi.value()?))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// STL abstract syntax tree with aggregate window atoms.
///
/// `signal` indexes the channel (`x` and `x0` are channel 0).
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom {
        signal: usize,
        op: Comparison,
        threshold: Term,
    },
    AggAtom {
        window: Interval,
        agg: Aggregate,
        signal: usize,
        op: Comparison,
        threshold: Term,
    },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Globally(Interval, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
}

#[derive(Debug, Error, PartialEq)]
pub enum BindError {
    #[error("unbound parameter {0}")]
    Unbound(String),
    #[error("value for {name} is not finite")]
    NonFinite { name: String },
    #[error("interval [{lo}, {hi}] is reversed (parameters: {})", params.join(", "))]
    Reversed {
        lo: f64,
        hi: f64,
        params: Vec<String>,
    },
    #[error("interval [{lo}, {hi}] starts before 0 (parameters: {})", params.join(", "))]
    Negative {
        lo: f64,
        hi: f64,
        params: Vec<String>,
    },
}

impl Formula {
    pub fn atom(op: Comparison, threshold: f64) -> Self {
        Formula::Atom {
            signal: 0,
            op,
            threshold: Term::Num(threshold),
        }
    }

    pub fn agg(lo: f64, hi: f64, agg: Aggregate, op: Comparison, threshold: f64) -> Self {
        Formula::AggAtom {
            window: Interval::new(lo, hi),
            agg,
            signal: 0,
            op,
            threshold: Term::Num(threshold),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Formula) -> Self {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Formula) -> Self {
        Formula::Or(Box::new(self), Box::new(other))
    }

    pub fn globally(lo: f64, hi: f64, body: Formula) -> Self {
        Formula::Globally(Interval::new(lo, hi), Box::new(body))
    }

    pub fn eventually(lo: f64, hi: f64, body: Formula) -> Self {
        Formula::Eventually(Interval::new(lo, hi), Box::new(body))
    }

    pub fn until(lo: f64, hi: f64, hold: Formula, goal: Formula) -> Self {
        Formula::Until(Interval::new(lo, hi), Box::new(hold), Box::new(goal))
    }

    /// Parameter names in order of first appearance.
    pub fn params(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit_terms(&mut |t| {
            if let Term::Param(name) = t {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
        });
        out
    }

    pub fn is_ground(&self) -> bool {
        self.params().is_empty()
    }

    fn visit_terms(&self, f: &mut impl FnMut(&Term)) {
        match self {
            Formula::Atom { threshold, .. } => f(threshold),
            Formula::AggAtom {
                window, threshold, ..
            } => {
                f(&window.lo);
                f(&window.hi);
                f(threshold);
            }
            Formula::Not(a) => a.visit_terms(f),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.visit_terms(f);
                b.visit_terms(f);
            }
            Formula::Globally(w, a) | Formula::Eventually(w, a) => {
                f(&w.lo);
                f(&w.hi);
                a.visit_terms(f);
            }
            Formula::Until(w, a, b) => {
                f(&w.lo);
                f(&w.hi);
                a.visit_terms(f);
                b.visit_terms(f);
            }
        }
    }

    /// Replaces every parameter with the value returned by `lookup` and checks
    /// that the resulting intervals are ordered and non-negative.
    pub fn bind(&self, lookup: &impl Fn(&str) -> Option<f64>) -> Result<Formula, BindError> {
        let term = |t: &Term| -> Result<Term, BindError> {
            match t {
                Term::Num(v) => Ok(Term::Num(*v)),
                Term::Param(name) => match lookup(name) {
                    Some(v) if v.is_finite() => Ok(Term::Num(v)),
                    Some(_) => Err(BindError::NonFinite { name: name.clone() }),
                    None => Err(BindError::Unbound(name.clone())),
                },
            }
        };
        let interval = |w: &Interval| -> Result<Interval, BindError> {
            let (lo, hi) = (term(&w.lo)?, term(&w.hi)?);
            let (l, h) = (lo.value().unwrap(), hi.value().unwrap());
            let params = || {
                [&w.lo, &w.hi]
                    .into_iter()
                    .filter_map(|t| match t {
                        Term::Param(n) => Some(n.clone()),
                        Term::Num(_) => None,
                    })
                    .collect()
            };
            if l > h {
                return Err(BindError::Reversed {
                    lo: l,
                    hi: h,
                    params: params(),
                });
            }
            if l < 0.0 {
                return Err(BindError::Negative {
                    lo: l,
                    hi: h,
                    params: params(),
                });
            }
            Ok(Interval { lo, hi })
        };
        let sub = |a: &Formula| a.bind(lookup).map(Box::new);
        Ok(match self {
            Formula::Atom {
                signal,
                op,
                threshold,
            } => Formula::Atom {
                signal: *signal,
                op: *op,
                threshold: term(threshold)?,
            },
            Formula::AggAtom {
                window,
                agg,
                signal,
                op,
                threshold,
            } => Formula::AggAtom {
                window: interval(window)?,
                agg: *agg,
                signal: *signal,
                op: *op,
                threshold: term(threshold)?,
            },
            Formula::Not(a) => Formula::Not(sub(a)?),
            Formula::And(a, b) => Formula::And(sub(a)?, sub(b)?),
            Formula::Or(a, b) => Formula::Or(sub(a)?, sub(b)?),
            Formula::Globally(w, a) => Formula::Globally(interval(w)?, sub(a)?),
            Formula::Eventually(w, a) => Formula::Eventually(interval(w)?, sub(a)?),
            Formula::Until(w, a, b) => Formula::Until(interval(w)?, sub(a)?, sub(b)?),
        })
    }

    /// Validates a ground formula (no parameters, ordered non-negative windows).
    pub fn check_ground(&self) -> Result<(), BindError> {
        self.bind(&|_| None).map(|_| ())
    }

    fn level(&self) -> u8 {
        match self {
            Formula::Or(..) => 0,
            Formula::And(..) => 1,
            _ => 2,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_level: u8) -> fmt::Result {
        if self.level() < min_level {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Formula::Atom {
                signal,
                op,
                threshold,
            } => {
                write_signal(f, *signal)?;
                write!(f, " {} {threshold}", op.symbol())
            }
            Formula::AggAtom {
                window,
                agg,
                signal,
                op,
                threshold,
            } => {
                write!(f, "On{window} {} ", agg.keyword())?;
                write_signal(f, *signal)?;
                write!(f, " {} {threshold}", op.symbol())
            }
            Formula::Not(a) => {
                write!(f, "not ")?;
                a.write_at(f, 2)
            }
            Formula::And(a, b) => {
                a.write_at(f, 1)?;
                write!(f, " and ")?;
                b.write_at(f, 2)
            }
            Formula::Or(a, b) => {
                a.write_at(f, 0)?;
                write!(f, " or ")?;
                b.write_at(f, 1)
            }
            Formula::Globally(w, a) => {
                write!(f, "G{w} ")?;
                a.write_at(f, 2)
            }
            Formula::Eventually(w, a) => {
                write!(f, "F{w} ")?;
                a.write_at(f, 2)
            }
            Formula::Until(w, a, b) => {
                write!(f, "(")?;
                a.write_at(f, 0)?;
                write!(f, " U{w} ")?;
                b.write_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

fn write_signal(f: &mut fmt::Formatter<'_>, signal: usize) -> fmt::Result {
    if signal == 0 {
        f.write_str("x")
    } else {
        write!(f, "x{signal}")
    }
}

/// Prints in the concrete grammar accepted by [`crate::stl::parse`].
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}
