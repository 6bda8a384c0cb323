use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::domain::{Tolerances, ValidityDomain};
use super::param::{flip_box, flip_point, ParamBox, ParametricFormula};
use super::{Oracle, SynthError};

pub const DEFAULT_MAX_ORACLE_CALLS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnConfig {
    /// Stop once unknown volume is at most this fraction of the domain.
    pub eps_vol: f64,
    /// Diagonal search stops when the bracket is this fraction of the diagonal.
    pub delta_diag: f64,
    pub max_oracle_calls: u64,
}

impl LearnConfig {
    pub fn new(eps_vol: f64, delta_diag: f64) -> Self {
        Self {
            eps_vol,
            delta_diag,
            max_oracle_calls: DEFAULT_MAX_ORACLE_CALLS,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        for (name, value) in [("eps_vol", self.eps_vol), ("delta_diag", self.delta_diag)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(SynthError::BadTolerance { name, value });
            }
        }
        Ok(())
    }
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self::new(0.01, 0.01)
    }
}

struct Pending {
    volume: f64,
    seq: u64,
    cell: ParamBox,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // Largest volume first, then earliest insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        self.volume
            .total_cmp(&other.volume)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Counter<'a, O: ?Sized> {
    oracle: &'a O,
    calls: u64,
}

impl<O: Oracle + ?Sized> Counter<'_, O> {
    fn query(&mut self, point: &[f64]) -> bool {
        self.calls += 1;
        self.oracle.query(point)
    }
}

/// Shrinks the bracket `[false_at, true_at]` of a monotone predicate on
/// `[0, 1]` until it is no wider than `width`.
fn bisect(mut probe: impl FnMut(f64) -> bool, width: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if probe(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// `cell` minus the corner boxes `[cell.lower, below]` and `[above, cell.upper]`,
/// as at most `2d - 1` disjoint boxes of positive volume.
fn incomparable_pieces(cell: &ParamBox, below: &[f64], above: &[f64]) -> Vec<ParamBox> {
    let d = cell.dim();
    let mut pieces = Vec::with_capacity(2 * d);
    // Slabs of cell \ [lower, below], except the first (axis 0 above `below`),
    // which still contains the upper corner box.
    for i in 1..d {
        let mut lower = cell.lower.clone();
        let mut upper = cell.upper.clone();
        upper[..i].copy_from_slice(&below[..i]);
        lower[i] = below[i];
        pieces.push(ParamBox::new(lower, upper));
    }
    // The first slab minus [above, upper].
    let mut slab_lower = cell.lower.clone();
    slab_lower[0] = below[0];
    for i in 0..d {
        let mut lower = slab_lower.clone();
        let mut upper = cell.upper.clone();
        lower[..i].copy_from_slice(&above[..i]);
        upper[i] = above[i];
        pieces.push(ParamBox::new(lower, upper));
    }
    pieces.retain(|p| p.volume() > 0.0);
    pieces
}

/// Partitions the domain of `formula` into green, red and unknown boxes for a
/// monotone `oracle`, processing the largest unknown box first.
pub fn learn_region<O: Oracle + ?Sized>(
    oracle: &O,
    formula: &ParametricFormula,
    config: &LearnConfig,
) -> Result<ValidityDomain, SynthError> {
    config.validate()?;
    let domain = formula.domain();
    let orientations = formula.orientations();
    let flip = |p: &[f64]| flip_point(&domain, &orientations, p);
    let normalized = |p: &[f64]| oracle.query(&flip(p));
    let mut counter = Counter {
        oracle: &normalized,
        calls: 0,
    };

    let total = domain.volume();
    let mut unknown_volume = total;
    let mut green = Vec::new();
    let mut red = Vec::new();
    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    queue.push(Pending {
        volume: total,
        seq,
        cell: domain.clone(),
    });
    let mut incomplete = false;

    while !queue.is_empty() {
        if unknown_volume <= config.eps_vol * total {
            break;
        }
        if counter.calls >= config.max_oracle_calls {
            incomplete = true;
            break;
        }
        let Pending { volume, cell, .. } = queue.pop().expect("queue is non-empty");
        if counter.query(&cell.lower) {
            unknown_volume -= volume;
            green.push(cell);
            continue;
        }
        if !counter.query(&cell.upper) {
            unknown_volume -= volume;
            red.push(cell);
            continue;
        }
        let (lo, hi) = bisect(|t| counter.query(&cell.along_diagonal(t)), config.delta_diag);
        let below = cell.along_diagonal(lo);
        let above = cell.along_diagonal(hi);
        let pieces = incomparable_pieces(&cell, &below, &above);
        unknown_volume -= volume;
        for piece in pieces {
            let v = piece.volume();
            unknown_volume += v;
            seq += 1;
            queue.push(Pending {
                volume: v,
                seq,
                cell: piece,
            });
        }
        red.push(ParamBox::new(cell.lower.clone(), below));
        green.push(ParamBox::new(above, cell.upper.clone()));
    }

    let mut pending: Vec<Pending> = queue.into_vec();
    pending.sort_by(|a, b| b.cmp(a));
    let unflip = |b: &ParamBox| flip_box(&domain, &orientations, b);
    Ok(ValidityDomain {
        params: formula.params().iter().map(|p| p.name.clone()).collect(),
        green: green.iter().map(unflip).collect(),
        red: red.iter().map(unflip).collect(),
        unknown: pending.iter().map(|p| unflip(&p.cell)).collect(),
        domain: domain.clone(),
        orientations: orientations.clone(),
        tolerances: Tolerances {
            eps_vol: config.eps_vol,
            delta_diag: config.delta_diag,
        },
        oracle_calls: counter.calls,
        incomplete,
    })
}

/// Fraction `t ∈ [0, 1]` of the way from `origin` to the domain boundary
/// along `direction` at which a non-decreasing `oracle` turns true. The
/// oracle is false at `t - delta` and true at `t + delta`; exactly 0 when
/// true at the origin and exactly 1 when false at the far end.
pub fn ray_shoot<O: Oracle + ?Sized>(
    oracle: &O,
    domain: &ParamBox,
    origin: &[f64],
    direction: &[f64],
    delta: f64,
) -> Result<f64, SynthError> {
    if origin.len() != domain.dim() || direction.len() != domain.dim() {
        return Err(SynthError::DimensionMismatch {
            expected: domain.dim(),
            got: direction.len().min(origin.len()),
        });
    }
    if !domain.contains(origin) {
        return Err(SynthError::OutsideDomain(origin.to_vec()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SynthError::BadTolerance {
            name: "delta",
            value: delta,
        });
    }
    if direction.iter().any(|c| !(c.is_finite() && *c >= 0.0)) || direction.iter().all(|&c| c == 0.0)
    {
        return Err(SynthError::BadDirection);
    }
    let reach = direction
        .iter()
        .zip(origin.iter().zip(&domain.upper))
        .filter(|(c, _)| **c > 0.0)
        .map(|(c, (o, u))| (u - o) / c)
        .fold(f64::INFINITY, f64::min);
    let at = |t: f64| -> Vec<f64> {
        origin
            .iter()
            .zip(direction)
            .zip(&domain.upper)
            .map(|((o, c), u)| (o + t * reach * c).min(*u))
            .collect()
    };
    if oracle.query(origin) {
        return Ok(0.0);
    }
    if !oracle.query(&at(1.0)) {
        return Ok(1.0);
    }
    let (lo, hi) = bisect(|t| oracle.query(&at(t)), 2.0 * delta);
    Ok(0.5 * (lo + hi))
}
