//! Synthetic integrity attacks on consumption traces.
//!
//! Five attack families cover the usual energy-theft taxonomy: uniform
//! under-reporting ([`AttackProfile::Scale`]), noisy under-reporting
//! ([`AttackProfile::RandomScale`]), interval blanking
//! ([`AttackProfile::CutOut`]), profile flattening
//! ([`AttackProfile::FlattenToMean`]) and load shifting
//! ([`AttackProfile::SwapPeak`]).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;
use crate::trace::{ClassId, LabeledDataset, Trace, NORMAL_CLASS, NORMAL_NAME, SAMPLES_PER_DAY};

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("{profile}: {message}")]
    InvalidParameter {
        profile: &'static str,
        message: String,
    },
    #[error("at least one baseline trace is required")]
    NoBaselines,
    #[error("per-class count must be at least 1")]
    NoTracesPerClass,
    #[error("profile name `{0}` is used twice or collides with `normal`")]
    DuplicateName(String),
    #[error("malformed profile list: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum AttackProfile {
    /// Every reading multiplied by `alpha ∈ (0, 1)`.
    Scale { alpha: f64 },
    /// Each reading multiplied by its own uniform draw in `[alpha_min, alpha_max]`.
    RandomScale { alpha_min: f64, alpha_max: f64 },
    /// Readings at indices `start..=end` replaced by `floor`.
    CutOut { start: usize, end: usize, floor: f64 },
    /// Every reading replaced by `beta` times the trace mean.
    FlattenToMean { beta: f64 },
    /// The day rotated by `shift` samples; sample `i` moves to `i + shift`.
    SwapPeak { shift: i64 },
}

impl AttackProfile {
    pub fn kind(&self) -> &'static str {
        match self {
            AttackProfile::Scale { .. } => "Scale",
            AttackProfile::RandomScale { .. } => "RandomScale",
            AttackProfile::CutOut { .. } => "CutOut",
            AttackProfile::FlattenToMean { .. } => "FlattenToMean",
            AttackProfile::SwapPeak { .. } => "SwapPeak",
        }
    }

    fn invalid(&self, message: String) -> AttackError {
        AttackError::InvalidParameter {
            profile: self.kind(),
            message,
        }
    }

    /// Checks parameter ranges; `len` is the trace length for index checks.
    pub fn validate(&self, len: Option<usize>) -> Result<(), AttackError> {
        match *self {
            AttackProfile::Scale { alpha } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(self.invalid(format!("alpha must lie in (0, 1), got {alpha}")));
                }
            }
            AttackProfile::RandomScale {
                alpha_min,
                alpha_max,
            } => {
                let in_range = |a: f64| a > 0.0 && a <= 1.0;
                if !(in_range(alpha_min) && in_range(alpha_max) && alpha_min <= alpha_max) {
                    return Err(self.invalid(format!(
                        "need 0 < alpha_min <= alpha_max <= 1, got [{alpha_min}, {alpha_max}]"
                    )));
                }
            }
            AttackProfile::CutOut { start, end, floor } => {
                if !(floor.is_finite() && floor >= 0.0) {
                    return Err(self.invalid(format!("floor must be finite and >= 0, got {floor}")));
                }
                if start > end {
                    return Err(self.invalid(format!("start {start} exceeds end {end}")));
                }
                if let Some(n) = len {
                    if end >= n {
                        return Err(self.invalid(format!(
                            "end {end} is past the last sample of a {n}-sample trace"
                        )));
                    }
                }
            }
            AttackProfile::FlattenToMean { beta } => {
                if !(beta > 0.0 && beta <= 1.0) {
                    return Err(self.invalid(format!("beta must lie in (0, 1], got {beta}")));
                }
            }
            AttackProfile::SwapPeak { .. } => {}
        }
        Ok(())
    }
}

/// A profile with the class name it produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedProfile {
    pub name: String,
    #[serde(flatten)]
    pub profile: AttackProfile,
}

impl NamedProfile {
    pub fn new(name: impl Into<String>, profile: AttackProfile) -> Self {
        Self {
            name: name.into(),
            profile,
        }
    }
}

/// Reads a JSON array of `{"name": ..., "type": ..., <parameters>}` objects.
pub fn parse_profiles(text: &str) -> Result<Vec<NamedProfile>, AttackError> {
    let profiles: Vec<NamedProfile> =
        serde_json::from_str(text).map_err(|e| AttackError::Format(e.to_string()))?;
    for p in &profiles {
        p.profile.validate(None)?;
    }
    Ok(profiles)
}

pub fn apply_attack(trace: &Trace, profile: &AttackProfile, seed: u64) -> Result<Trace, AttackError> {
    profile.validate(Some(trace.len()))?;
    let values = trace.values();
    let attacked: Vec<f64> = match *profile {
        AttackProfile::Scale { alpha } => values.iter().map(|v| alpha * v).collect(),
        AttackProfile::RandomScale {
            alpha_min,
            alpha_max,
        } => {
            let mut rng = SplitMix64::new(seed);
            values
                .iter()
                .map(|v| v * rng.uniform(alpha_min, alpha_max))
                .collect()
        }
        AttackProfile::CutOut { start, end, floor } => values
            .iter()
            .enumerate()
            .map(|(i, &v)| if (start..=end).contains(&i) { floor } else { v })
            .collect(),
        AttackProfile::FlattenToMean { beta } => {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            vec![beta * mean; values.len()]
        }
        AttackProfile::SwapPeak { shift } => {
            let n = values.len();
            let shift = shift.rem_euclid(n as i64) as usize;
            let mut out = vec![0.0; n];
            for (i, &v) in values.iter().enumerate() {
                out[(i + shift) % n] = v;
            }
            out
        }
    };
    Ok(Trace::with_metadata(attacked, trace.start_index(), trace.period_label())
        .expect("attacks keep samples finite"))
}

/// Builds `per_class` normal traces (baselines cycled) followed by
/// `per_class` attacked traces for each profile, labelled `1, 2, ...` in
/// profile order. Trace `j` of class `k` draws its randomness from the
/// stream `(seed, k, j)`.
pub fn generate_dataset(
    baselines: &[Trace],
    profiles: &[NamedProfile],
    per_class: usize,
    seed: u64,
) -> Result<LabeledDataset, AttackError> {
    if baselines.is_empty() {
        return Err(AttackError::NoBaselines);
    }
    if per_class == 0 {
        return Err(AttackError::NoTracesPerClass);
    }
    let mut names = BTreeMap::new();
    names.insert(NORMAL_CLASS, NORMAL_NAME.to_string());
    for (k, p) in profiles.iter().enumerate() {
        if names.values().any(|n| n == &p.name) {
            return Err(AttackError::DuplicateName(p.name.clone()));
        }
        names.insert(k as ClassId + 1, p.name.clone());
    }
    let mut traces = Vec::with_capacity(per_class * (profiles.len() + 1));
    let mut labels = Vec::with_capacity(traces.capacity());
    let tag = |trace: Trace, class: &str, j: usize| {
        Trace::with_metadata(
            trace.values().to_vec(),
            trace.start_index(),
            format!("{class}-{j:03}"),
        )
        .expect("values already validated")
    };
    for j in 0..per_class {
        traces.push(tag(baselines[j % baselines.len()].clone(), NORMAL_NAME, j));
        labels.push(NORMAL_CLASS);
    }
    for (k, p) in profiles.iter().enumerate() {
        let class = k as ClassId + 1;
        for j in 0..per_class {
            let stream = SplitMix64::derive(seed, &[class as u64, j as u64]).next_u64();
            let attacked = apply_attack(&baselines[j % baselines.len()], &p.profile, stream)?;
            traces.push(tag(attacked, &p.name, j));
            labels.push(class);
        }
    }
    Ok(LabeledDataset::new(traces, labels, names).expect("labels named by construction"))
}

/// Shape of the built-in daily consumption profile: a low overnight base,
/// a daytime plateau, a morning bump and a dominant evening peak. Bumps are
/// Gaussian in the sample index; all powers are in kW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveningPeakDay {
    pub samples: usize,
    /// Overnight base load.
    pub base: f64,
    /// Extra load between `day_start` and `day_end` (sample indices, inclusive).
    pub daytime: f64,
    pub day_start: usize,
    pub day_end: usize,
    pub morning_amplitude: f64,
    pub morning_center: f64,
    pub morning_width: f64,
    pub evening_amplitude: f64,
    pub evening_center: f64,
    pub evening_width: f64,
}

impl Default for EveningPeakDay {
    fn default() -> Self {
        Self {
            samples: SAMPLES_PER_DAY,
            base: 0.25,
            daytime: 0.35,
            day_start: 14,
            day_end: 45,
            morning_amplitude: 0.8,
            morning_center: 15.0,
            morning_width: 2.0,
            evening_amplitude: 2.2,
            evening_center: 39.0,
            evening_width: 3.0,
        }
    }
}

impl EveningPeakDay {
    pub fn trace(&self) -> Trace {
        let bump = |i: f64, amp: f64, center: f64, width: f64| {
            amp * (-0.5 * ((i - center) / width).powi(2)).exp()
        };
        let values = (0..self.samples)
            .map(|i| {
                let day = if (self.day_start..=self.day_end).contains(&i) {
                    self.daytime
                } else {
                    0.0
                };
                let x = i as f64;
                self.base
                    + day
                    + bump(x, self.morning_amplitude, self.morning_center, self.morning_width)
                    + bump(x, self.evening_amplitude, self.evening_center, self.evening_width)
            })
            .collect();
        Trace::with_metadata(values, 0, "evening-peak").expect("profile is finite")
    }

    /// `count` households built from this profile with seeded, noise-free
    /// variation: every load component is scaled by a factor in
    /// `[1 - spread, 1 + spread]` and the evening peak moves by up to one
    /// sample.
    pub fn households(&self, count: usize, spread: f64, seed: u64) -> Vec<Trace> {
        (0..count)
            .map(|h| {
                let mut rng = SplitMix64::derive(seed, &[h as u64]);
                let u: [f64; 5] = std::array::from_fn(|_| 2.0 * rng.next_f64() - 1.0);
                let day = EveningPeakDay {
                    base: self.base * (1.0 + spread * u[0]),
                    daytime: self.daytime * (1.0 + spread * u[1]),
                    morning_amplitude: self.morning_amplitude * (1.0 + spread * u[2]),
                    evening_amplitude: self.evening_amplitude * (1.0 + spread * u[3]),
                    evening_center: self.evening_center + u[4],
                    ..*self
                };
                let trace = day.trace();
                Trace::with_metadata(trace.values().to_vec(), 0, format!("household-{h:03}"))
                    .expect("profile is finite")
            })
            .collect()
    }
}
