use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::stl::{parse_parametric, Formula};

/// Direction in which satisfaction grows along a parameter axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    /// Satisfaction is non-decreasing as the parameter grows.
    Increasing,
    /// Satisfaction is non-increasing as the parameter grows.
    Decreasing,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Increasing => Orientation::Decreasing,
            Orientation::Decreasing => Orientation::Increasing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub orientation: Orientation,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64, orientation: Orientation) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            orientation,
        }
    }
}

/// Axis-aligned closed box in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        debug_assert!(lower.iter().zip(&upper).all(|(l, u)| l <= u));
        Self { lower, upper }
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l).max(0.0))
            .product()
    }

    /// Closed containment.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(p, (l, u))| *l <= *p && *p <= *u)
    }

    pub fn diagonal_length(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Point at fraction `t` of the way from `lower` to `upper`.
    pub fn along_diagonal(&self, t: f64) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + t * (u - l))
            .collect()
    }
}

/// A template formula with named parameters, a domain box and per-parameter
/// monotonicity.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricFormula {
    template: Formula,
    params: Vec<ParamSpec>,
}

impl ParametricFormula {
    pub fn new(template: Formula, params: Vec<ParamSpec>) -> Result<Self, SynthError> {
        let mut seen = BTreeSet::new();
        for p in &params {
            if !seen.insert(p.name.as_str()) {
                return Err(SynthError::DuplicateParam(p.name.clone()));
            }
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(SynthError::BadBounds {
                    name: p.name.clone(),
                    lower: p.lower,
                    upper: p.upper,
                });
            }
        }
        let used = template.params();
        if let Some(missing) = used.iter().find(|u| !seen.contains(u.as_str())) {
            return Err(SynthError::UndeclaredParam(missing.clone()));
        }
        if let Some(extra) = params.iter().find(|p| !used.contains(&p.name)) {
            return Err(SynthError::UnusedParam(extra.name.clone()));
        }
        Ok(Self { template, params })
    }

    pub fn parse(text: &str, params: Vec<ParamSpec>) -> Result<Self, SynthError> {
        Self::new(parse_parametric(text)?, params)
    }

    pub fn template(&self) -> &Formula {
        &self.template
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn source(&self) -> String {
        self.template.to_string()
    }

    pub fn orientations(&self) -> Vec<Orientation> {
        self.params.iter().map(|p| p.orientation).collect()
    }

    pub fn domain(&self) -> ParamBox {
        ParamBox::new(
            self.params.iter().map(|p| p.lower).collect(),
            self.params.iter().map(|p| p.upper).collect(),
        )
    }

    /// Same template with a different orientation declaration.
    pub fn with_orientations(&self, orientations: &[Orientation]) -> Result<Self, SynthError> {
        self.check_dim(orientations.len())?;
        let params = self
            .params
            .iter()
            .zip(orientations)
            .map(|(p, &o)| ParamSpec {
                orientation: o,
                ..p.clone()
            })
            .collect();
        Ok(Self {
            template: self.template.clone(),
            params,
        })
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<(), SynthError> {
        if got == self.dim() {
            Ok(())
        } else {
            Err(SynthError::DimensionMismatch {
                expected: self.dim(),
                got,
            })
        }
    }

    /// Ground formula for `valuation` (one value per parameter, in order).
    pub fn instantiate(&self, valuation: &[f64]) -> Result<Formula, SynthError> {
        self.check_dim(valuation.len())?;
        if !self.domain().contains(valuation) {
            return Err(SynthError::OutsideDomain(valuation.to_vec()));
        }
        let lookup = |name: &str| {
            self.params
                .iter()
                .position(|p| p.name == name)
                .map(|i| valuation[i])
        };
        Ok(self.template.bind(&lookup)?)
    }

    /// Maps a point of the orientation-normalized unit cube to parameter
    /// space: coordinate 0 is the least satisfying end of every axis.
    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        self.params
            .iter()
            .zip(unit)
            .map(|(p, &u)| match p.orientation {
                Orientation::Increasing => p.lower + u * (p.upper - p.lower),
                Orientation::Decreasing => p.upper - u * (p.upper - p.lower),
            })
            .zip(&self.params)
            .map(|(v, p)| v.clamp(p.lower, p.upper))
            .collect()
    }

    /// Inverse of [`Self::from_unit`].
    pub fn to_unit(&self, point: &[f64]) -> Vec<f64> {
        self.params
            .iter()
            .zip(point)
            .map(|(p, &v)| {
                let t = (v - p.lower) / (p.upper - p.lower);
                match p.orientation {
                    Orientation::Increasing => t,
                    Orientation::Decreasing => 1.0 - t,
                }
            })
            .collect()
    }
}

/// Flips decreasing axes inside `domain` so every axis is increasing. The
/// map is an involution.
pub(crate) fn flip_point(domain: &ParamBox, orientations: &[Orientation], point: &[f64]) -> Vec<f64> {
    point
        .iter()
        .enumerate()
        .map(|(i, &v)| match orientations[i] {
            Orientation::Increasing => v,
            Orientation::Decreasing => domain.lower[i] + domain.upper[i] - v,
        })
        .collect()
}

pub(crate) fn flip_box(domain: &ParamBox, orientations: &[Orientation], b: &ParamBox) -> ParamBox {
    let a = flip_point(domain, orientations, &b.lower);
    let c = flip_point(domain, orientations, &b.upper);
    let lower = a.iter().zip(&c).map(|(x, y)| x.min(*y)).collect();
    let upper = a.iter().zip(&c).map(|(x, y)| x.max(*y)).collect();
    ParamBox::new(lower, upper)
}

/// `On[p1,<horizon>] Int x < p2` with `p1 ∈ [0, horizon]`, `p2 ∈ [0, max_energy]`,
/// both increasing: the energy consumed from `p1` to the end of the day stays
/// below `p2`.
pub fn tail_energy_template(horizon: f64, max_energy: f64) -> ParametricFormula {
    ParametricFormula::parse(
        &format!("On[p1,{horizon}] Int x < p2"),
        vec![
            ParamSpec::new("p1", 0.0, horizon, Orientation::Increasing),
            ParamSpec::new("p2", 0.0, max_energy, Orientation::Increasing),
        ],
    )
    .expect("static template is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq1() -> ParametricFormula {
        tail_energy_template(48.0, 60.0)
    }

    #[test]
    fn instantiate_examples() {
        let pf = eq1();
        assert_eq!(
            pf.instantiate(&[12.0, 30.0]).unwrap().to_string(),
            "On[12,48] Int x < 30"
        );
        assert_eq!(
            pf.instantiate(&[48.0, 30.0]).unwrap().to_string(),
            "On[48,48] Int x < 30"
        );
        let wide = ParametricFormula::parse(
            "On[p1,48] Int x < p2",
            vec![
                ParamSpec::new("p1", 0.0, 50.0, Orientation::Increasing),
                ParamSpec::new("p2", 0.0, 60.0, Orientation::Increasing),
            ],
        )
        .unwrap();
        let err = wide.instantiate(&[50.0, 30.0]).unwrap_err();
        assert!(err.to_string().contains("p1"), "{err}");
        assert!(matches!(
            pf.instantiate(&[60.0, 1.0]),
            Err(SynthError::OutsideDomain(_))
        ));
        assert!(pf.instantiate(&[1.0]).is_err());
    }

    #[test]
    fn declaration_checks() {
        let f = parse_parametric("On[p1,48] Int x < p2").unwrap();
        let p1 = ParamSpec::new("p1", 0.0, 48.0, Orientation::Increasing);
        let p2 = ParamSpec::new("p2", 0.0, 60.0, Orientation::Increasing);
        let p3 = ParamSpec::new("p3", 0.0, 1.0, Orientation::Increasing);
        assert!(matches!(
            ParametricFormula::new(f.clone(), vec![p1.clone()]),
            Err(SynthError::UndeclaredParam(n)) if n == "p2"
        ));
        assert!(matches!(
            ParametricFormula::new(f.clone(), vec![p1.clone(), p2.clone(), p3]),
            Err(SynthError::UnusedParam(n)) if n == "p3"
        ));
        assert!(matches!(
            ParametricFormula::new(f.clone(), vec![p1.clone(), p1.clone()]),
            Err(SynthError::DuplicateParam(_))
        ));
        let reversed = ParamSpec::new("p2", 5.0, 5.0, Orientation::Increasing);
        assert!(matches!(
            ParametricFormula::new(f, vec![p1, reversed]),
            Err(SynthError::BadBounds { .. })
        ));
    }

    #[test]
    fn unit_mapping_respects_orientation() {
        let pf = eq1()
            .with_orientations(&[Orientation::Increasing, Orientation::Decreasing])
            .unwrap();
        assert_eq!(pf.from_unit(&[0.0, 0.0]), vec![0.0, 60.0]);
        assert_eq!(pf.from_unit(&[0.5, 1.0]), vec![24.0, 0.0]);
        assert_eq!(pf.to_unit(&[24.0, 0.0]), vec![0.5, 1.0]);
    }

    #[test]
    fn flipping_is_an_involution() {
        let domain = ParamBox::new(vec![0.0, 10.0], vec![4.0, 20.0]);
        let o = [Orientation::Decreasing, Orientation::Increasing];
        let b = ParamBox::new(vec![1.0, 12.0], vec![3.0, 15.0]);
        let f = flip_box(&domain, &o, &b);
        assert_eq!(f, ParamBox::new(vec![1.0, 12.0], vec![3.0, 15.0]));
        let g = ParamBox::new(vec![0.0, 12.0], vec![1.0, 15.0]);
        assert_eq!(flip_box(&domain, &o, &g), ParamBox::new(vec![3.0, 12.0], vec![4.0, 15.0]));
        assert_eq!(flip_box(&domain, &o, &flip_box(&domain, &o, &g)), g);
    }
}
