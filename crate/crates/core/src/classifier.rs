//! Nearest-centroid attack classification on ray-intercept features.
//!
//! Each trace is summarized by where its own validity boundary crosses a
//! fixed fan of rays through the orientation-normalized parameter cube. A
//! class is represented by the mean feature vector of its training traces.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::{
    learn_region, ray_shoot, satisfies, LearnConfig, ParamBox, ParamSpec, ParametricFormula,
    QuorumOracle, SynthError, ValidityDomain,
};
use crate::trace::{ClassId, LabeledDataset, Trace};

pub const MODEL_FORMAT: &str = "stl-grid-miner/model/1";

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("class {0} has no training traces")]
    EmptyClass(String),
    #[error("no template configured for class {0}")]
    MissingTemplate(String),
    #[error("ray count must be at least 1")]
    NoRays,
    #[error("ray tolerance delta must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("unsupported model format `{0}`")]
    UnknownFormat(String),
    #[error("malformed model: {0}")]
    Malformed(String),
}

/// Which template each class is described by.
#[derive(Debug, Clone, PartialEq)]
pub enum TemplateSet {
    Shared(ParametricFormula),
    PerClass(BTreeMap<ClassId, ParametricFormula>),
}

impl TemplateSet {
    fn for_class(&self, id: ClassId) -> Option<&ParametricFormula> {
        match self {
            TemplateSet::Shared(pf) => Some(pf),
            TemplateSet::PerClass(map) => map.get(&id),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub templates: TemplateSet,
    pub rays: usize,
    pub delta: f64,
    /// Quorum for the optional per-class region mining.
    pub theta: f64,
    /// When set, a validity domain is mined per class for export.
    pub mine_regions: Option<LearnConfig>,
}

impl ClassifierConfig {
    pub fn shared(template: ParametricFormula, rays: usize, delta: f64) -> Self {
        Self {
            templates: TemplateSet::Shared(template),
            rays,
            delta,
            theta: 0.9,
            mine_regions: None,
        }
    }
}

/// Deterministic fan of `count` unit directions in the positive orthant of
/// `dim` dimensions: the main diagonal, then `count - 1` directions sweeping
/// from the first axis to the last, passing through each axis in turn.
pub fn ray_set(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let normalize = |v: Vec<f64>| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect::<Vec<f64>>()
    };
    let mut rays = Vec::with_capacity(count);
    if count == 0 || dim == 0 {
        return rays;
    }
    rays.push(normalize(vec![1.0; dim]));
    for k in 1..count {
        if dim == 1 {
            rays.push(vec![1.0]);
            continue;
        }
        let s = if count == 2 {
            0.5
        } else {
            (k - 1) as f64 / (count - 2) as f64
        };
        let pos = s * (dim - 1) as f64;
        let j = (pos.floor() as usize).min(dim - 2);
        let f = pos - j as f64;
        let mut v = vec![0.0; dim];
        v[j] = 1.0 - f;
        v[j + 1] = f;
        rays.push(normalize(v));
    }
    rays
}

/// Boundary fraction along each ray for the single-trace oracle of `trace`.
/// Rays start at the least-satisfying corner of the normalized unit cube.
pub fn extract_features(
    template: &ParametricFormula,
    trace: &Trace,
    rays: &[Vec<f64>],
    delta: f64,
) -> Result<Vec<f64>, ClassifierError> {
    let cube = ParamBox::unit(template.dim());
    let origin = vec![0.0; template.dim()];
    let oracle = |u: &[f64]| satisfies(template, trace, &template.from_unit(u));
    rays.iter()
        .map(|dir| Ok(ray_shoot(&oracle, &cube, &origin, dir, delta)?))
        .collect()
}

fn check_ray_params(rays: usize, delta: f64) -> Result<(), ClassifierError> {
    if rays == 0 {
        return Err(ClassifierError::NoRays);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ClassifierError::BadDelta(delta));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub id: ClassId,
    pub name: String,
    pub template: ParametricFormula,
    pub rays: Vec<Vec<f64>>,
    pub centroid: Vec<f64>,
    pub validity_domain: Option<ValidityDomain>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub classes: Vec<ClassModel>,
    pub delta: f64,
}

/// Predicted class plus the distance to every centroid, in class-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: ClassId,
    pub distance: f64,
    pub scores: Vec<(ClassId, f64)>,
}

pub fn train(
    dataset: &LabeledDataset,
    config: &ClassifierConfig,
) -> Result<ClassifierModel, ClassifierError> {
    check_ray_params(config.rays, config.delta)?;
    let mut classes = Vec::new();
    for (&id, name) in dataset.class_names() {
        let members: Vec<Trace> = dataset
            .iter()
            .filter(|(_, l)| *l == id)
            .map(|(t, _)| t.clone())
            .collect();
        if members.is_empty() {
            return Err(ClassifierError::EmptyClass(name.clone()));
        }
        let template = config
            .templates
            .for_class(id)
            .ok_or_else(|| ClassifierError::MissingTemplate(name.clone()))?
            .clone();
        let rays = ray_set(template.dim(), config.rays);
        let features = members
            .par_iter()
            .map(|t| extract_features(&template, t, &rays, config.delta))
            .collect::<Result<Vec<_>, _>>()?;
        let mut centroid = vec![0.0; rays.len()];
        for f in &features {
            for (c, x) in centroid.iter_mut().zip(f) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= features.len() as f64;
        }
        let validity_domain = match &config.mine_regions {
            Some(learn) => {
                let oracle = QuorumOracle::new(&template, &members, config.theta)?;
                Some(learn_region(&oracle, &template, learn)?)
            }
            None => None,
        };
        classes.push(ClassModel {
            id,
            name: name.clone(),
            template,
            rays,
            centroid,
            validity_domain,
        });
    }
    Ok(ClassifierModel {
        classes,
        delta: config.delta,
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl ClassifierModel {
    pub fn class_name(&self, id: ClassId) -> Option<&str> {
        self.classes
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.name.as_str())
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.classes.iter().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn classify(&self, trace: &Trace) -> Result<Prediction, ClassifierError> {
        // Classes sharing a template and ray set share one feature vector.
        let mut cache: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut scores = Vec::with_capacity(self.classes.len());
        for (k, class) in self.classes.iter().enumerate() {
            let same = |&(j, _): &(usize, Vec<f64>)| {
                self.classes[j].template == class.template && self.classes[j].rays == class.rays
            };
            let index = match cache.iter().position(same) {
                Some(i) => i,
                None => {
                    let f = extract_features(&class.template, trace, &class.rays, self.delta)?;
                    cache.push((k, f));
                    cache.len() - 1
                }
            };
            scores.push((class.id, euclidean(&cache[index].1, &class.centroid)));
        }
        let (class, distance) = scores
            .iter()
            .copied()
            .fold(None, |best: Option<(ClassId, f64)>, (id, d)| match best {
                Some((bid, bd)) if bd < d || (bd == d && bid < id) => Some((bid, bd)),
                _ => Some((id, d)),
            })
            .ok_or(ClassifierError::Malformed("model has no classes".into()))?;
        Ok(Prediction {
            class,
            distance,
            scores,
        })
    }

    pub fn classify_all(&self, traces: &[Trace]) -> Result<Vec<Prediction>, ClassifierError> {
        traces.par_iter().map(|t| self.classify(t)).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            delta: self.delta,
            classes: self
                .classes
                .iter()
                .map(|c| ClassRecord {
                    id: c.id,
                    name: c.name.clone(),
                    template: c.template.source(),
                    params: c.template.params().to_vec(),
                    normalization: Normalization {
                        kind: "min-max".into(),
                        lower: c.template.domain().lower,
                        upper: c.template.domain().upper,
                    },
                    rays: c.rays.clone(),
                    centroid: c.centroid.clone(),
                    validity_domain: c.validity_domain.clone(),
                })
                .collect(),
        };
        serde_json::to_value(file).expect("model is always serializable")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, ClassifierError> {
        let format = value.get("format").and_then(|f| f.as_str()).unwrap_or("");
        if format != MODEL_FORMAT {
            return Err(ClassifierError::UnknownFormat(format.to_string()));
        }
        let file: ModelFile = serde_json::from_value(value.clone())
            .map_err(|e| ClassifierError::Malformed(e.to_string()))?;
        check_ray_params(1, file.delta)?;
        let mut classes = Vec::with_capacity(file.classes.len());
        for c in file.classes {
            let template = ParametricFormula::parse(&c.template, c.params)?;
            if c.rays.len() != c.centroid.len()
                || c.rays.iter().any(|r| r.len() != template.dim())
            {
                return Err(ClassifierError::Malformed(format!(
                    "class {} has inconsistent ray or centroid sizes",
                    c.name
                )));
            }
            classes.push(ClassModel {
                id: c.id,
                name: c.name,
                template,
                rays: c.rays,
                centroid: c.centroid,
                validity_domain: c.validity_domain,
            });
        }
        if classes.is_empty() {
            return Err(ClassifierError::Malformed("model has no classes".into()));
        }
        classes.sort_by_key(|c| c.id);
        Ok(Self {
            classes,
            delta: file.delta,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Normalization {
    kind: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassRecord {
    id: ClassId,
    name: String,
    template: String,
    params: Vec<ParamSpec>,
    normalization: Normalization,
    rays: Vec<Vec<f64>>,
    centroid: Vec<f64>,
    validity_domain: Option<ValidityDomain>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    delta: f64,
    classes: Vec<ClassRecord>,
}

/// Accuracy, per-class precision/recall and a confusion matrix whose rows are
/// true classes and columns predicted classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub class_names: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
    pub total: usize,
    pub accuracy: f64,
    /// `None` when the class was never predicted.
    pub precision: Vec<Option<f64>>,
    /// `None` when the class never occurs.
    pub recall: Vec<Option<f64>>,
}

impl Metrics {
    /// Builds metrics from `(true, predicted)` index pairs over `class_names`.
    pub fn from_pairs(class_names: Vec<String>, pairs: &[(usize, usize)]) -> Self {
        let k = class_names.len();
        let mut confusion = vec![vec![0usize; k]; k];
        for &(t, p) in pairs {
            confusion[t][p] += 1;
        }
        let total = pairs.len();
        let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let precision = (0..k)
            .map(|j| ratio(confusion[j][j], (0..k).map(|i| confusion[i][j]).sum()))
            .collect();
        let recall = (0..k)
            .map(|i| ratio(confusion[i][i], confusion[i].iter().sum()))
            .collect();
        Self {
            class_names,
            confusion,
            total,
            accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
            precision,
            recall,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.confusion
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, &c)| i == j || c == 0))
    }
}

/// Classifies every trace of `dataset`; labels are matched to model classes
/// by name, and names unknown to the model get their own (never predicted)
/// row.
pub fn evaluate(model: &ClassifierModel, dataset: &LabeledDataset) -> Result<Metrics, ClassifierError> {
    if dataset.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let mut names: Vec<String> = model.classes.iter().map(|c| c.name.clone()).collect();
    let predictions = model.classify_all(dataset.traces())?;
    let mut pairs = Vec::with_capacity(dataset.len());
    for (label, pred) in dataset.labels().iter().zip(&predictions) {
        let name = dataset.class_name(*label).unwrap_or_default().to_string();
        let truth = match names.iter().position(|n| *n == name) {
            Some(i) => i,
            None => {
                names.push(name);
                names.len() - 1
            }
        };
        let predicted = model
            .classes
            .iter()
            .position(|c| c.id == pred.class)
            .expect("prediction comes from the model");
        pairs.push((truth, predicted));
    }
    Ok(Metrics::from_pairs(names, &pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::tail_energy_template;

    fn day(values: impl Fn(usize) -> f64) -> Trace {
        Trace::new((0..48).map(values).collect()).unwrap()
    }

    fn names(list: &[&str]) -> BTreeMap<ClassId, String> {
        list.iter()
            .enumerate()
            .map(|(i, n)| (i as ClassId, n.to_string()))
            .collect()
    }

    #[test]
    fn ray_fan_layout() {
        let rays = ray_set(2, 8);
        assert_eq!(rays.len(), 8);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((rays[0][0] - h).abs() < 1e-15 && (rays[0][1] - h).abs() < 1e-15);
        assert_eq!(rays[1], vec![1.0, 0.0]);
        assert_eq!(rays[7], vec![0.0, 1.0]);
        for r in &rays {
            let norm: f64 = r.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            assert!(r.iter().all(|&x| x >= 0.0));
        }
        assert_eq!(ray_set(3, 1).len(), 1);
        assert_eq!(ray_set(1, 3), vec![vec![1.0]; 3]);
        assert_eq!(ray_set(3, 2)[1].len(), 3);
    }

    #[test]
    fn features_at_extremes() {
        let pf = tail_energy_template(48.0, 60.0);
        let rays = ray_set(2, 4);
        // A zero trace satisfies `integral < p2` as soon as p2 > 0, so rays
        // that raise p2 cross right at their start. The first-axis ray keeps
        // p2 = 0 and never crosses.
        let zeros = Trace::constant(0.0, 48).unwrap();
        let f = extract_features(&pf, &zeros, &rays, 0.01).unwrap();
        assert_eq!(rays[1], vec![1.0, 0.0]);
        assert_eq!(f[1], 1.0);
        for k in [0, 2, 3] {
            assert!(f[k] <= 0.01, "{f:?}");
        }
        let huge = Trace::constant(100.0, 48).unwrap();
        let f = extract_features(&pf, &huge, &rays, 0.01).unwrap();
        // Axis rays never satisfy; mixed rays only do so near p1 = 48 where
        // the window shrinks to nothing.
        assert_eq!((f[1], f[3]), (1.0, 1.0), "{f:?}");
        assert!(f[0] > 0.95 && f[2] > 0.95, "{f:?}");
        // A template that holds everywhere yields all zeros.
        let always = ParametricFormula::parse(
            "x < p",
            vec![ParamSpec::new("p", 200.0, 300.0, crate::synth::Orientation::Increasing)],
        )
        .unwrap();
        let f = extract_features(&always, &huge, &ray_set(1, 2), 0.01).unwrap();
        assert_eq!(f, vec![0.0, 0.0]);
    }

    #[test]
    fn single_member_centroid_is_its_feature() {
        let pf = tail_energy_template(48.0, 60.0);
        let t = day(|i| 0.5 + (i % 5) as f64 * 0.1);
        let ds = LabeledDataset::new(vec![t.clone()], vec![0], names(&["normal"])).unwrap();
        let model = train(&ds, &ClassifierConfig::shared(pf.clone(), 8, 0.01)).unwrap();
        let f = extract_features(&pf, &t, &ray_set(2, 8), 0.01).unwrap();
        assert_eq!(model.classes[0].centroid, f);
        let pred = model.classify(&t).unwrap();
        assert_eq!(pred.class, 0);
        assert_eq!(pred.distance, 0.0);
    }

    #[test]
    fn identical_members_share_centroid() {
        let pf = tail_energy_template(48.0, 60.0);
        let t = day(|i| 0.3 + (i % 3) as f64 * 0.2);
        let ds = LabeledDataset::new(vec![t.clone(), t.clone()], vec![0, 0], names(&["normal"])).unwrap();
        let model = train(&ds, &ClassifierConfig::shared(pf.clone(), 4, 0.01)).unwrap();
        assert_eq!(
            model.classes[0].centroid,
            extract_features(&pf, &t, &ray_set(2, 4), 0.01).unwrap()
        );
    }

    #[test]
    fn training_errors() {
        let pf = tail_energy_template(48.0, 60.0);
        let t = Trace::constant(1.0, 48).unwrap();
        let ds = LabeledDataset::new(vec![t.clone()], vec![0], names(&["normal", "ghost"])).unwrap();
        assert_eq!(
            train(&ds, &ClassifierConfig::shared(pf.clone(), 4, 0.01)),
            Err(ClassifierError::EmptyClass("ghost".into()))
        );
        let ds = LabeledDataset::new(vec![t], vec![0], names(&["normal"])).unwrap();
        assert_eq!(
            train(&ds, &ClassifierConfig::shared(pf.clone(), 0, 0.01)),
            Err(ClassifierError::NoRays)
        );
        let per_class = ClassifierConfig {
            templates: TemplateSet::PerClass(BTreeMap::new()),
            ..ClassifierConfig::shared(pf, 4, 0.01)
        };
        assert!(matches!(train(&ds, &per_class), Err(ClassifierError::MissingTemplate(_))));
    }

    fn model_with_centroids(a: Vec<f64>, b: Vec<f64>) -> ClassifierModel {
        let pf = tail_energy_template(48.0, 60.0);
        let rays = ray_set(2, a.len());
        let class = |id: ClassId, name: &str, centroid: Vec<f64>| ClassModel {
            id,
            name: name.into(),
            template: pf.clone(),
            rays: rays.clone(),
            centroid,
            validity_domain: None,
        };
        ClassifierModel {
            classes: vec![class(0, "normal", a), class(1, "attack", b)],
            delta: 0.01,
        }
    }

    #[test]
    fn nearest_centroid_and_ties() {
        // The constant-100 trace has all-one features.
        let huge = Trace::constant(100.0, 48).unwrap();
        let model = model_with_centroids(vec![0.1; 3], vec![1.0; 3]);
        assert_eq!(model.classify(&huge).unwrap().class, 1);
        let model = model_with_centroids(vec![0.9; 3], vec![0.9; 3]);
        let pred = model.classify(&huge).unwrap();
        assert_eq!(pred.class, 0);
        assert_eq!(pred.scores.len(), 2);
    }

    #[test]
    fn metrics_counting() {
        let m = Metrics::from_pairs(vec!["normal".into()], &[(0, 0)]);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.confusion, vec![vec![1]]);
        let m = Metrics::from_pairs(
            vec!["a".into(), "b".into()],
            &[(0, 0), (0, 0), (1, 0), (1, 0)],
        );
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.precision, vec![Some(0.5), None]);
        assert_eq!(m.recall, vec![Some(1.0), Some(0.0)]);
        assert!(!m.is_diagonal());
    }

    #[test]
    fn model_json_round_trip() {
        let pf = tail_energy_template(48.0, 60.0);
        let t = day(|i| if i > 30 { 2.0 } else { 0.4 });
        let ds = LabeledDataset::new(vec![t], vec![0], names(&["normal"])).unwrap();
        let config = ClassifierConfig {
            mine_regions: Some(LearnConfig::new(0.05, 0.05)),
            ..ClassifierConfig::shared(pf, 3, 0.01)
        };
        let model = train(&ds, &config).unwrap();
        assert!(model.classes[0].validity_domain.is_some());
        let json = model.to_json();
        assert_eq!(json["format"], MODEL_FORMAT);
        let text = serde_json::to_string(&json).unwrap();
        let back = ClassifierModel::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, model);
        let mut wrong = json.clone();
        wrong["format"] = "other/1".into();
        assert!(matches!(
            ClassifierModel::from_json(&wrong),
            Err(ClassifierError::UnknownFormat(_))
        ));
    }

    #[test]
    fn evaluate_rejects_empty() {
        let model = model_with_centroids(vec![0.0; 2], vec![1.0; 2]);
        let empty = LabeledDataset::new(vec![], vec![], names(&["normal"])).unwrap();
        assert_eq!(evaluate(&model, &empty), Err(ClassifierError::EmptyDataset));
    }
}
