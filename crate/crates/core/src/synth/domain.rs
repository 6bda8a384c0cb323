use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::param::{flip_box, flip_point, Orientation, ParamBox};
use super::SynthError;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub eps_vol: f64,
    pub delta_diag: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Green,
    Red,
    Unknown,
}

impl Label {
    pub fn symbol(self) -> char {
        match self {
            Label::Green => 'G',
            Label::Red => 'R',
            Label::Unknown => 'U',
        }
    }
}

/// Partition of a parameter box into satisfied, violated and undecided boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityDomain {
    pub params: Vec<String>,
    pub domain: ParamBox,
    pub green: Vec<ParamBox>,
    pub red: Vec<ParamBox>,
    pub unknown: Vec<ParamBox>,
    pub orientations: Vec<Orientation>,
    pub tolerances: Tolerances,
    pub oracle_calls: u64,
    pub incomplete: bool,
}

fn total_volume(boxes: &[ParamBox]) -> f64 {
    boxes.iter().map(ParamBox::volume).sum()
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

impl ValidityDomain {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `(green, red, unknown)` volumes.
    pub fn volumes(&self) -> (f64, f64, f64) {
        (
            total_volume(&self.green),
            total_volume(&self.red),
            total_volume(&self.unknown),
        )
    }

    pub fn unknown_fraction(&self) -> f64 {
        total_volume(&self.unknown) / self.domain.volume()
    }

    fn check_point(&self, v: &[f64]) -> Result<(), SynthError> {
        if v.len() != self.dim() {
            return Err(SynthError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        if !self.domain.contains(v) {
            return Err(SynthError::OutsideDomain(v.to_vec()));
        }
        Ok(())
    }

    /// Label of the box containing `v`; shared faces resolve Green, then Red,
    /// then Unknown.
    pub fn membership(&self, v: &[f64]) -> Result<Label, SynthError> {
        self.check_point(v)?;
        Ok(if self.green.iter().any(|b| b.contains(v)) {
            Label::Green
        } else if self.red.iter().any(|b| b.contains(v)) {
            Label::Red
        } else {
            Label::Unknown
        })
    }

    /// Label implied by monotonicity: Green if `v` dominates a point of a green
    /// box, Red if it is dominated by a point of a red box (after orientation
    /// normalization), Unknown otherwise.
    pub fn implied_label(&self, v: &[f64]) -> Result<Label, SynthError> {
        self.check_point(v)?;
        let flip = |p: &[f64]| flip_point(&self.domain, &self.orientations, p);
        let u = flip(v);
        let normalized = |b: &ParamBox| flip_box(&self.domain, &self.orientations, b);
        Ok(if self.green.iter().any(|b| dominates(&u, &normalized(b).lower)) {
            Label::Green
        } else if self.red.iter().any(|b| dominates(&normalized(b).upper, &u)) {
            Label::Red
        } else {
            Label::Unknown
        })
    }

    /// Red/green box pairs where the red box lies entirely above the green one
    /// (after orientation normalization), which a monotone oracle never yields.
    pub fn dominance_conflicts(&self) -> usize {
        let g: Vec<ParamBox> = self
            .green
            .iter()
            .map(|b| flip_box(&self.domain, &self.orientations, b))
            .collect();
        let mut conflicts = 0;
        for r in &self.red {
            let r = flip_box(&self.domain, &self.orientations, r);
            for gb in &g {
                if dominates(&r.lower, &gb.upper) && r.lower != gb.upper {
                    conflicts += 1;
                }
            }
        }
        conflicts
    }

    /// Draws `samples` random (red point, green point) pairs, volume-weighted,
    /// and counts pairs where the red point dominates the green point.
    pub fn sampled_conflicts(&self, samples: usize, seed: u64) -> usize {
        let pick = |boxes: &[ParamBox], rng: &mut SplitMix64| -> Option<Vec<f64>> {
            let total = total_volume(boxes);
            if total <= 0.0 {
                return None;
            }
            let mut target = rng.next_f64() * total;
            let chosen = boxes
                .iter()
                .find(|b| {
                    target -= b.volume();
                    target < 0.0
                })
                .unwrap_or(&boxes[boxes.len() - 1]);
            Some(
                chosen
                    .lower
                    .iter()
                    .zip(&chosen.upper)
                    .map(|(l, u)| rng.uniform(*l, *u))
                    .collect(),
            )
        };
        let mut rng = SplitMix64::new(seed);
        let mut conflicts = 0;
        for _ in 0..samples {
            let (Some(r), Some(g)) = (pick(&self.red, &mut rng), pick(&self.green, &mut rng)) else {
                return 0;
            };
            let r = flip_point(&self.domain, &self.orientations, &r);
            let g = flip_point(&self.domain, &self.orientations, &g);
            if dominates(&r, &g) && r != g {
                conflicts += 1;
            }
        }
        conflicts
    }

    /// Labels an `n × n` grid of cell centers over a 2-parameter domain.
    pub fn grid(&self, n: usize) -> Result<Grid, SynthError> {
        if self.dim() != 2 {
            return Err(SynthError::GridDimension(self.dim()));
        }
        if n == 0 {
            return Err(SynthError::EmptyGrid);
        }
        let axis = |i: usize| -> Vec<f64> {
            let (lo, hi) = (self.domain.lower[i], self.domain.upper[i]);
            (0..n)
                .map(|k| lo + (k as f64 + 0.5) * (hi - lo) / n as f64)
                .collect()
        };
        let (xs, ys) = (axis(0), axis(1));
        let mut cells = Vec::with_capacity(n);
        for &y in &ys {
            let row = xs
                .iter()
                .map(|&x| self.implied_label(&[x, y]))
                .collect::<Result<Vec<_>, _>>()?;
            cells.push(row);
        }
        Ok(Grid {
            x_name: self.params[0].clone(),
            y_name: self.params[1].clone(),
            xs,
            ys,
            x_range: (self.domain.lower[0], self.domain.upper[0]),
            y_range: (self.domain.lower[1], self.domain.upper[1]),
            cells,
        })
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("validity domain is always serializable")
    }
}

/// Cell-center labels over a 2-parameter domain; `cells[j][i]` is the cell at
/// the `i`-th value of the first parameter and `j`-th value of the second.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x_name: String,
    pub y_name: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub cells: Vec<Vec<Label>>,
}

impl Grid {
    pub fn count(&self, label: Label) -> usize {
        self.cells.iter().flatten().filter(|&&l| l == label).count()
    }

    /// Plain-text matrix, one row per value of the second parameter in
    /// ascending order, preceded by `#` header lines.
    pub fn to_text(&self, metadata: &[String]) -> String {
        let mut out = String::new();
        for line in metadata {
            let _ = writeln!(out, "# {line}");
        }
        let n = self.xs.len();
        let _ = writeln!(
            out,
            "# columns: {} from {} to {} ({n} cells, ascending)",
            self.x_name, self.x_range.0, self.x_range.1
        );
        let _ = writeln!(
            out,
            "# rows: {} from {} to {} ({} cells, ascending)",
            self.y_name,
            self.y_range.0,
            self.y_range.1,
            self.ys.len()
        );
        let _ = writeln!(out, "# labels: G satisfied, R violated, U unknown");
        for row in &self.cells {
            let line: String = row.iter().map(|l| l.symbol()).collect();
            let _ = writeln!(out, "{line}");
        }
        out
    }

    /// Parses the body of [`Self::to_text`] back into label rows.
    pub fn parse_cells(text: &str) -> Vec<Vec<Label>> {
        text.lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| {
                l.trim()
                    .chars()
                    .map(|c| match c {
                        'G' => Label::Green,
                        'R' => Label::Red,
                        _ => Label::Unknown,
                    })
                    .collect()
            })
            .collect()
    }
}

/// Number of Green cells with some non-Green cell up-right of them, given
/// per-axis orientations. Zero means the Green
/// region is up-closed.
pub fn staircase_violations(cells: &[Vec<Label>], orientations: [Orientation; 2]) -> usize {
    let rows = cells.len();
    let cols = cells.first().map_or(0, Vec::len);
    let oriented = |j: usize, i: usize| {
        let i = match orientations[0] {
            Orientation::Increasing => i,
            Orientation::Decreasing => cols - 1 - i,
        };
        let j = match orientations[1] {
            Orientation::Increasing => j,
            Orientation::Decreasing => rows - 1 - j,
        };
        cells[j][i]
    };
    // Suffix "all green" table over the oriented grid.
    let mut all_green = vec![vec![true; cols + 1]; rows + 1];
    for j in (0..rows).rev() {
        for i in (0..cols).rev() {
            all_green[j][i] = oriented(j, i) == Label::Green
                && all_green[j + 1][i]
                && all_green[j][i + 1];
        }
    }
    (0..rows)
        .flat_map(|j| (0..cols).map(move |i| (j, i)))
        .filter(|&(j, i)| oriented(j, i) == Label::Green && !all_green[j][i])
        .count()
}
