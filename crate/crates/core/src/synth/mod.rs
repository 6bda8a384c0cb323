//! Parametric STL and validity-domain learning.
//!
//! A [`ParametricFormula`] whose satisfaction is monotone in each parameter
//! splits its parameter box into a satisfied (green) up-set and a violated
//! (red) down-set. [`learn_region`] approximates that split with boxes by
//! repeated binary search along box diagonals.

mod domain;
mod learner;
mod param;

use thiserror::Error;

pub use domain::{staircase_violations, Grid, Label, Tolerances, ValidityDomain};
pub use learner::{learn_region, ray_shoot, LearnConfig, DEFAULT_MAX_ORACLE_CALLS};
pub use param::{tail_energy_template, Orientation, ParamBox, ParamSpec, ParametricFormula};

use crate::rng::SplitMix64;
use crate::stl::{eval_bool, BindError, ParseError};
use crate::trace::Trace;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error("parameter {0} is declared twice")]
    DuplicateParam(String),
    #[error("parameter {0} appears in the template but is not declared")]
    UndeclaredParam(String),
    #[error("parameter {0} is declared but unused by the template")]
    UnusedParam(String),
    #[error("parameter {name} needs finite bounds with lower < upper, got [{lower}, {upper}]")]
    BadBounds { name: String, lower: f64, upper: f64 },
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point {0:?} lies outside the parameter domain")]
    OutsideDomain(Vec<f64>),
    #[error("{name} must lie in (0, 1), got {value}")]
    BadTolerance { name: &'static str, value: f64 },
    #[error("quorum theta must lie in (0, 1], got {0}")]
    BadTheta(f64),
    #[error("at least one trace is required")]
    NoTraces,
    #[error("ray direction must be finite, non-negative and non-zero")]
    BadDirection,
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("grid export needs a 2-parameter domain, this one has {0}")]
    GridDimension(usize),
    #[error("grid resolution must be at least 1")]
    EmptyGrid,
}

/// Boolean function over parameter valuations.
pub trait Oracle {
    fn query(&self, point: &[f64]) -> bool;
}

impl<F: Fn(&[f64]) -> bool> Oracle for F {
    fn query(&self, point: &[f64]) -> bool {
        self(point)
    }
}

/// True where at least a fraction `theta` of the traces satisfy the
/// instantiated template at time 0.
///
/// A trace whose evaluation fails (for instance a reversed window at this
/// valuation) counts as not satisfying.
#[derive(Debug, Clone)]
pub struct QuorumOracle<'a> {
    formula: &'a ParametricFormula,
    traces: &'a [Trace],
    theta: f64,
}

impl<'a> QuorumOracle<'a> {
    pub fn new(
        formula: &'a ParametricFormula,
        traces: &'a [Trace],
        theta: f64,
    ) -> Result<Self, SynthError> {
        if traces.is_empty() {
            return Err(SynthError::NoTraces);
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(SynthError::BadTheta(theta));
        }
        Ok(Self {
            formula,
            traces,
            theta,
        })
    }

    pub fn satisfying(&self, point: &[f64]) -> usize {
        let Ok(ground) = self.formula.instantiate(point) else {
            return 0;
        };
        self.traces
            .iter()
            .filter(|tr| eval_bool(&ground, tr, 0.0).unwrap_or(false))
            .count()
    }
}

impl Oracle for QuorumOracle<'_> {
    fn query(&self, point: &[f64]) -> bool {
        self.satisfying(point) as f64 / self.traces.len() as f64 >= self.theta
    }
}

/// Single-trace satisfaction of an instantiated template.
pub fn satisfies(formula: &ParametricFormula, trace: &Trace, point: &[f64]) -> bool {
    formula
        .instantiate(point)
        .ok()
        .and_then(|g| eval_bool(&g, trace, 0.0).ok())
        .unwrap_or(false)
}

/// A pair `lower ≤ upper` (after orientation normalization) where the
/// template holds at `lower` but fails at `upper` on one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneViolation {
    pub trace: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Samples `n_samples` ordered pairs per trace and reports every pair that
/// contradicts the declared orientations. An empty result means no
/// violation was found.
pub fn check_monotone(
    formula: &ParametricFormula,
    traces: &[Trace],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<MonotoneViolation>, SynthError> {
    if n_samples == 0 {
        return Err(SynthError::NoSamples);
    }
    let mut rng = SplitMix64::new(seed);
    let dim = formula.dim();
    let mut violations = Vec::new();
    for _ in 0..n_samples {
        let v: Vec<f64> = (0..dim).map(|_| rng.next_f64()).collect();
        let w: Vec<f64> = v.iter().map(|&x| x + (1.0 - x) * rng.next_f64()).collect();
        let (lo, hi) = (formula.from_unit(&v), formula.from_unit(&w));
        for (i, trace) in traces.iter().enumerate() {
            if satisfies(formula, trace, &lo) && !satisfies(formula, trace, &hi) {
                violations.push(MonotoneViolation {
                    trace: i,
                    lower: lo.clone(),
                    upper: hi.clone(),
                });
            }
        }
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_day(v: f64) -> Trace {
        Trace::constant(v, 48).unwrap()
    }

    #[test]
    fn quorum_single_trace() {
        let pf = tail_energy_template(48.0, 60.0);
        let traces = [constant_day(1.0)];
        let oracle = QuorumOracle::new(&pf, &traces, 1.0).unwrap();
        assert!(oracle.query(&[0.0, 50.0]));
        assert!(!oracle.query(&[0.0, 40.0]));
    }

    #[test]
    fn quorum_counts_fraction() {
        let pf = tail_energy_template(48.0, 60.0);
        // Nine traces integrate to 48 over the day, one to 480.
        let mut traces: Vec<Trace> = (0..9).map(|_| constant_day(1.0)).collect();
        traces.push(constant_day(10.0));
        let v = [0.0, 50.0];
        assert!(QuorumOracle::new(&pf, &traces, 0.9).unwrap().query(&v));
        assert!(!QuorumOracle::new(&pf, &traces, 0.95).unwrap().query(&v));
    }

    #[test]
    fn quorum_rejects_bad_input() {
        let pf = tail_energy_template(48.0, 60.0);
        assert_eq!(QuorumOracle::new(&pf, &[], 1.0).unwrap_err(), SynthError::NoTraces);
        let traces = [constant_day(1.0)];
        assert!(QuorumOracle::new(&pf, &traces, 0.0).is_err());
        assert!(QuorumOracle::new(&pf, &traces, 1.5).is_err());
    }

    #[test]
    fn correctly_annotated_template_has_no_violations() {
        let pf = tail_energy_template(48.0, 60.0);
        let traces: Vec<Trace> = [0.2, 1.0, 1.3]
            .iter()
            .map(|&v| {
                Trace::new((0..48).map(|i| v * (1.0 + (i % 7) as f64)).collect()).unwrap()
            })
            .collect();
        assert!(check_monotone(&pf, &traces, 1000, 3).unwrap().is_empty());
    }

    #[test]
    fn misannotated_template_is_caught() {
        let pf = tail_energy_template(48.0, 60.0)
            .with_orientations(&[Orientation::Increasing, Orientation::Decreasing])
            .unwrap();
        let traces = [constant_day(1.0)];
        // Normalized order now runs p2 downwards: (p1=0, p2=50) ≤ (p1=0, p2=40),
        // satisfied at the first point, violated at the second.
        let lo = pf.from_unit(&[0.0, pf.to_unit(&[0.0, 50.0])[1]]);
        let hi = pf.from_unit(&[0.0, pf.to_unit(&[0.0, 40.0])[1]]);
        assert!(satisfies(&pf, &traces[0], &lo));
        assert!(!satisfies(&pf, &traces[0], &hi));
        assert!(!check_monotone(&pf, &traces, 1000, 3).unwrap().is_empty());
    }

    #[test]
    fn zero_samples_is_an_error() {
        let pf = tail_energy_template(48.0, 60.0);
        assert_eq!(
            check_monotone(&pf, &[constant_day(1.0)], 0, 1),
            Err(SynthError::NoSamples)
        );
    }
}
