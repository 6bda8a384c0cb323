//! Boolean and quantitative (robustness) semantics over piecewise-constant
//! traces.
//!
//! Temporal quantifiers range over continuous time but are evaluated on a
//! finite set of event times: the window endpoints plus every point where a
//! subformula may change value. A subformula's truth value changes only at
//! times `k - s` for integers `k` and a finite set of offsets `s` derived from
//! the window bounds nested inside it (`s = 0` for plain atoms), so for
//! integer-bounded formulas the event set is exactly the sample boundaries.

use thiserror::Error;

use super::ast::{Aggregate, BindError, Formula, Interval, Term};
use crate::trace::{Extremum, Trace, TraceError};

/// Robustness cap for vacuous temporal operators.
pub const LARGE: f64 = 1e12;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error("signal x{0} is not available in a univariate trace")]
    UnsupportedSignal(usize),
}

/// Monitor configuration; `large` bounds the robustness of vacuous windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitor {
    pub large: f64,
}

impl Default for Monitor {
    fn default() -> Self {
        Self { large: LARGE }
    }
}

pub fn eval_bool(formula: &Formula, trace: &Trace, t: f64) -> Result<bool, EvalError> {
    Monitor::default().eval_bool(formula, trace, t)
}

pub fn eval_robust(formula: &Formula, trace: &Trace, t: f64) -> Result<f64, EvalError> {
    Monitor::default().eval_robust(formula, trace, t)
}

impl Monitor {
    pub fn eval_bool(&self, formula: &Formula, trace: &Trace, t: f64) -> Result<bool, EvalError> {
        formula.check_ground()?;
        trace.value_at(t)?;
        Eval { trace, large: self.large }.boolean(formula, t)
    }

    pub fn eval_robust(&self, formula: &Formula, trace: &Trace, t: f64) -> Result<f64, EvalError> {
        formula.check_ground()?;
        trace.value_at(t)?;
        Eval { trace, large: self.large }.robust(formula, t)
    }
}

fn num(term: &Term) -> f64 {
    term.value().expect("formula checked ground")
}

fn bounds(w: &Interval) -> (f64, f64) {
    w.bounds().expect("formula checked ground")
}

/// Fractional offsets `s` such that the formula's value may only change at
/// times `k - s`, `k` an integer.
fn offsets(f: &Formula) -> Vec<f64> {
    let mut out = Vec::new();
    match f {
        Formula::Atom { .. } => out.push(0.0),
        Formula::AggAtom { window, .. } => {
            let (a, b) = bounds(window);
            out.push(a);
            out.push(b);
        }
        Formula::Not(a) => out = offsets(a),
        Formula::And(a, b) | Formula::Or(a, b) => {
            out = offsets(a);
            out.extend(offsets(b));
        }
        Formula::Globally(w, a) | Formula::Eventually(w, a) => {
            let (lo, hi) = bounds(w);
            for s in offsets(a) {
                out.push(s + lo);
                out.push(s + hi);
            }
        }
        Formula::Until(w, a, b) => {
            let (lo, hi) = bounds(w);
            let inner = offsets(a);
            for &s in inner.iter().chain(offsets(b).iter()) {
                out.push(s + lo);
                out.push(s + hi);
            }
            out.extend(inner);
        }
    }
    normalize_offsets(out)
}

fn normalize_offsets(raw: Vec<f64>) -> Vec<f64> {
    let mut fracs: Vec<f64> = raw
        .into_iter()
        .map(|s| {
            let r = s - s.floor();
            if r > 1.0 - TIME_EPS {
                0.0
            } else {
                r
            }
        })
        .collect();
    fracs.sort_by(f64::total_cmp);
    fracs.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);
    fracs
}

/// Event times in `[lo, hi] ∩ [0, horizon)`, sorted and deduplicated.
fn event_points(lo: f64, hi: f64, horizon: f64, offsets: &[f64]) -> Vec<f64> {
    if lo >= horizon {
        return Vec::new();
    }
    let mut pts = vec![lo];
    for &s in offsets {
        let mut k = (lo + s).floor() + 1.0;
        loop {
            let tau = k - s;
            if tau > hi || tau >= horizon {
                break;
            }
            if tau > lo {
                pts.push(tau);
            }
            k += 1.0;
        }
    }
    if hi > lo && hi < horizon {
        pts.push(hi);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);
    pts
}

struct Eval<'a> {
    trace: &'a Trace,
    large: f64,
}

impl Eval<'_> {
    fn signal_value(&self, signal: usize, t: f64) -> Result<f64, EvalError> {
        if signal != 0 {
            return Err(EvalError::UnsupportedSignal(signal));
        }
        Ok(self.trace.value_at(t)?)
    }

    fn aggregate(
        &self,
        window: &Interval,
        agg: Aggregate,
        signal: usize,
        t: f64,
    ) -> Result<f64, EvalError> {
        if signal != 0 {
            return Err(EvalError::UnsupportedSignal(signal));
        }
        let (a, b) = bounds(window);
        let (lo, hi) = (t + a, t + b);
        Ok(match agg {
            Aggregate::Int => self.trace.window_integral(lo, hi)?,
            Aggregate::Min => self.trace.window_min_max(lo, hi, Extremum::Min)?,
            Aggregate::Max => self.trace.window_min_max(lo, hi, Extremum::Max)?,
        })
    }

    fn window(&self, w: &Interval, body: &Formula, t: f64) -> Vec<f64> {
        let (a, b) = bounds(w);
        event_points(t + a, t + b, self.trace.horizon(), &offsets(body))
    }

    /// Candidate goal times and hold-condition sample times for `Until`.
    fn until_points(&self, w: &Interval, hold: &Formula, goal: &Formula, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = bounds(w);
        let n = self.trace.horizon();
        let hold_offsets = offsets(hold);
        let mut both = hold_offsets.clone();
        both.extend(offsets(goal));
        let goals = event_points(t + a, t + b, n, &normalize_offsets(both));
        let holds = event_points(t, t + b, n, &hold_offsets);
        (goals, holds)
    }

    fn boolean(&self, f: &Formula, t: f64) -> Result<bool, EvalError> {
        Ok(match f {
            Formula::Atom {
                signal,
                op,
                threshold,
            } => op.holds(self.signal_value(*signal, t)?, num(threshold)),
            Formula::AggAtom {
                window,
                agg,
                signal,
                op,
                threshold,
            } => op.holds(self.aggregate(window, *agg, *signal, t)?, num(threshold)),
            Formula::Not(a) => !self.boolean(a, t)?,
            Formula::And(a, b) => self.boolean(a, t)? && self.boolean(b, t)?,
            Formula::Or(a, b) => self.boolean(a, t)? || self.boolean(b, t)?,
            Formula::Globally(w, a) => {
                for tau in self.window(w, a, t) {
                    if !self.boolean(a, tau)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Eventually(w, a) => {
                for tau in self.window(w, a, t) {
                    if self.boolean(a, tau)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Until(w, hold, goal) => {
                let (goals, holds) = self.until_points(w, hold, goal, t);
                let mut next_hold = 0;
                let mut held = true;
                for tau in goals {
                    while held && next_hold < holds.len() && holds[next_hold] < tau - TIME_EPS {
                        held = self.boolean(hold, holds[next_hold])?;
                        next_hold += 1;
                    }
                    if !held {
                        return Ok(false);
                    }
                    if self.boolean(goal, tau)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    fn robust(&self, f: &Formula, t: f64) -> Result<f64, EvalError> {
        Ok(match f {
            Formula::Atom {
                signal,
                op,
                threshold,
            } => op.robustness(self.signal_value(*signal, t)?, num(threshold)),
            Formula::AggAtom {
                window,
                agg,
                signal,
                op,
                threshold,
            } => op.robustness(self.aggregate(window, *agg, *signal, t)?, num(threshold)),
            Formula::Not(a) => -self.robust(a, t)?,
            Formula::And(a, b) => self.robust(a, t)?.min(self.robust(b, t)?),
            Formula::Or(a, b) => self.robust(a, t)?.max(self.robust(b, t)?),
            Formula::Globally(w, a) => {
                let mut acc = self.large;
                for tau in self.window(w, a, t) {
                    acc = acc.min(self.robust(a, tau)?);
                }
                acc
            }
            Formula::Eventually(w, a) => {
                let mut acc = -self.large;
                for tau in self.window(w, a, t) {
                    acc = acc.max(self.robust(a, tau)?);
                }
                acc
            }
            Formula::Until(w, hold, goal) => {
                let (goals, holds) = self.until_points(w, hold, goal, t);
                let mut next_hold = 0;
                let mut prefix = self.large;
                let mut best = -self.large;
                for tau in goals {
                    while next_hold < holds.len() && holds[next_hold] < tau - TIME_EPS {
                        prefix = prefix.min(self.robust(hold, holds[next_hold])?);
                        next_hold += 1;
                    }
                    best = best.max(self.robust(goal, tau)?.min(prefix));
                }
                best
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse;

    fn constant(v: f64) -> Trace {
        Trace::constant(v, 48).unwrap()
    }

    #[test]
    fn atom_examples() {
        let f = parse("x < 5").unwrap();
        assert!(eval_bool(&f, &constant(3.0), 0.0).unwrap());
        assert_eq!(eval_robust(&f, &constant(3.0), 0.0).unwrap(), 2.0);
        let g = parse("not (x < 5)").unwrap();
        assert_eq!(eval_robust(&g, &constant(3.0), 0.0).unwrap(), -2.0);
    }

    #[test]
    fn integral_atom_examples() {
        let f = parse("On[0,48] Int x < 50").unwrap();
        assert!(eval_bool(&f, &constant(1.0), 0.0).unwrap());
        assert_eq!(eval_robust(&f, &constant(1.0), 0.0).unwrap(), 2.0);
    }

    #[test]
    fn strictness_differs_only_at_zero() {
        let lt = parse("x < 3").unwrap();
        let le = parse("x <= 3").unwrap();
        let tr = constant(3.0);
        assert!(!eval_bool(&lt, &tr, 0.0).unwrap());
        assert!(eval_bool(&le, &tr, 0.0).unwrap());
        assert_eq!(eval_robust(&lt, &tr, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn vacuous_windows() {
        let tr = Trace::new(vec![1.0, 2.0]).unwrap();
        let g = parse("G[5,6] x > 100").unwrap();
        let f = parse("F[5,6] x > 0").unwrap();
        assert!(eval_bool(&g, &tr, 0.0).unwrap());
        assert_eq!(eval_robust(&g, &tr, 0.0).unwrap(), LARGE);
        assert!(!eval_bool(&f, &tr, 0.0).unwrap());
        assert_eq!(eval_robust(&f, &tr, 0.0).unwrap(), -LARGE);
        let custom = Monitor { large: 7.0 };
        assert_eq!(custom.eval_robust(&g, &tr, 0.0).unwrap(), 7.0);
    }

    #[test]
    fn temporal_operators() {
        let tr = Trace::new(vec![1.0, 5.0, 2.0, 8.0]).unwrap();
        let g = parse("G[0,2] x < 6").unwrap();
        assert_eq!(eval_robust(&g, &tr, 0.0).unwrap(), 1.0);
        assert_eq!(eval_robust(&g, &tr, 1.0).unwrap(), -2.0);
        let f = parse("F[1,2] x > 4").unwrap();
        assert_eq!(eval_robust(&f, &tr, 0.0).unwrap(), 1.0);
        // x stays below 6 until x exceeds 7 (at t = 3).
        let u = parse("(x < 6 U[0,3] x > 7)").unwrap();
        assert!(eval_bool(&u, &tr, 0.0).unwrap());
        assert_eq!(eval_robust(&u, &tr, 0.0).unwrap(), 1.0);
        let u2 = parse("(x < 4 U[0,3] x > 7)").unwrap();
        assert!(!eval_bool(&u2, &tr, 0.0).unwrap());
        assert_eq!(eval_robust(&u2, &tr, 0.0).unwrap(), -1.0);
    }

    #[test]
    fn fractional_offsets_hit_every_sample() {
        // Holds only for tau in [0.5, 1): x(tau) = 9 and x(tau + 0.5) = 0.
        let tr = Trace::new(vec![9.0, 0.0, 0.0]).unwrap();
        let f = parse("F[0,2] (x > 5 and F[0.5,0.5] x < 1)").unwrap();
        assert!(eval_bool(&f, &tr, 0.0).unwrap());
        assert_eq!(eval_robust(&f, &tr, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn integral_over_sliding_window_checks_fractional_points() {
        // Integral over [tau + 0.5, tau + 1.5] peaks at tau = 1.5 (full sample 2).
        let tr = Trace::new(vec![0.0, 0.0, 4.0, 0.0, 0.0]).unwrap();
        let f = parse("F[0,3] On[0.5,1.5] Int x >= 4").unwrap();
        assert!(eval_bool(&f, &tr, 0.0).unwrap());
        assert_eq!(eval_robust(&f, &tr, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let tr = Trace::new(vec![1.0, 2.0]).unwrap();
        let f = parse("x < 5").unwrap();
        assert!(matches!(
            eval_bool(&f, &tr, 2.0),
            Err(EvalError::Trace(TraceError::OutOfDomain { .. }))
        ));
        let p = crate::stl::parse_parametric("x < p").unwrap();
        assert!(matches!(eval_robust(&p, &tr, 0.0), Err(EvalError::Bind(_))));
        let m = parse("On[5,6] Max x < 1").unwrap();
        assert!(eval_bool(&m, &tr, 0.0).is_err());
        let s = parse("x1 < 1").unwrap();
        assert_eq!(eval_bool(&s, &tr, 0.0), Err(EvalError::UnsupportedSignal(1)));
    }

    #[test]
    fn event_points_cover_boundaries() {
        let pts = event_points(0.5, 3.0, 10.0, &[0.0]);
        assert_eq!(pts, vec![0.5, 1.0, 2.0, 3.0]);
        let clipped = event_points(8.0, 12.0, 10.0, &[0.0]);
        assert_eq!(clipped, vec![8.0, 9.0]);
        assert!(event_points(10.0, 12.0, 10.0, &[0.0]).is_empty());
        assert_eq!(offsets(&parse("G[0.25,1] On[0,0.5] Int x < 1").unwrap()), vec![0.0, 0.25, 0.5, 0.75]);
    }
}
