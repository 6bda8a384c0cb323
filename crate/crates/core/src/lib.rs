//! Mining validity domains of parametric signal temporal logic (STL)
//! templates over smart-meter traces, and classifying consumption attacks
//! from the resulting boundary geometry.
//!
//! - [`trace`]: piecewise-constant traces, window aggregates, CSV input.
//! - [`stl`]: formula syntax, parser, Boolean and robust monitoring.
//! - [`synth`]: parametric templates, monotone region learning, grid export.
//! - [`attack`]: attack profiles and synthetic dataset generation.
//! - [`classifier`]: ray-intercept features with a nearest-centroid rule.

pub mod attack;
pub mod classifier;
pub mod rng;
pub mod stl;
pub mod synth;
pub mod trace;

pub use stl::{eval_bool, eval_robust, parse, parse_parametric, Formula};
pub use synth::{learn_region, LearnConfig, ParametricFormula, ValidityDomain};
pub use trace::{LabeledDataset, Trace};
