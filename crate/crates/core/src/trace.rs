//! Metering time series as piecewise-constant signals.
//!
//! Sample `i` of a [`Trace`] holds over the half-open interval `[i, i + 1)`,
//! where one time unit is one sampling period (30 minutes for daily CER-style
//! records, so a full day spans `[0, 48)`).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of half-hourly samples in one day.
pub const SAMPLES_PER_DAY: usize = 48;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("trace must contain at least one sample")]
    Empty,
    #[error("sample {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("time {t} is outside the trace domain [0, {len})")]
    OutOfDomain { t: f64, len: usize },
    #[error("window [{a}, {b}] does not intersect the trace domain [0, {len})")]
    EmptyWindow { a: f64, b: f64, len: usize },
    #[error("window bounds must be finite and ordered, got [{a}, {b}]")]
    BadWindow { a: f64, b: f64 },
}

/// Errors raised while reading a CSV dataset.
#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("row {row}: value `{cell}` is not a number")]
    NonNumeric { row: usize, cell: String },
    #[error("row {row}: value {value} is not finite")]
    NonFinite { row: usize, value: f64 },
    #[error("row {row}: missing cell for column `{column}`")]
    MissingCell { row: usize, column: String },
    #[error("group `{group}` has conflicting labels `{first}` and `{other}`")]
    ConflictingLabels {
        group: String,
        first: String,
        other: String,
    },
    #[error("group `{0}` has no rows")]
    EmptyGroup(String),
    #[error("dataset has no rows")]
    NoRows,
}

/// Which window aggregate to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Extremum {
    Min,
    Max,
}

/// One day (or window) of meter readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    values: Vec<f64>,
    start_index: i64,
    period_label: String,
}

impl Trace {
    pub fn new(values: Vec<f64>) -> Result<Self, TraceError> {
        Self::with_metadata(values, 0, String::new())
    }

    pub fn with_metadata(
        values: Vec<f64>,
        start_index: i64,
        period_label: impl Into<String>,
    ) -> Result<Self, TraceError> {
        if values.is_empty() {
            return Err(TraceError::Empty);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(TraceError::NonFinite { index, value });
        }
        Ok(Self {
            values,
            start_index,
            period_label: period_label.into(),
        })
    }

    /// A trace holding `value` for `len` samples.
    pub fn constant(value: f64, len: usize) -> Result<Self, TraceError> {
        Self::new(vec![value; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start_index(&self) -> i64 {
        self.start_index
    }

    pub fn period_label(&self) -> &str {
        &self.period_label
    }

    /// End of the time domain `[0, N)`.
    pub fn horizon(&self) -> f64 {
        self.values.len() as f64
    }

    /// Same metadata, new samples.
    pub fn map_values(&self, f: impl FnMut(f64) -> f64) -> Result<Self, TraceError> {
        Self::with_metadata(
            self.values.iter().copied().map(f).collect(),
            self.start_index,
            self.period_label.clone(),
        )
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self, TraceError> {
        self.map_values(|v| alpha * v)
    }

    pub fn value_at(&self, t: f64) -> Result<f64, TraceError> {
        if !(t >= 0.0 && t < self.horizon()) {
            return Err(TraceError::OutOfDomain { t, len: self.len() });
        }
        Ok(self.values[t.floor() as usize])
    }

    /// Integral of the signal over `[a, b] ∩ [0, N)`. An empty intersection
    /// integrates to zero.
    pub fn window_integral(&self, a: f64, b: f64) -> Result<f64, TraceError> {
        if !a.is_finite() || !b.is_finite() || a > b {
            return Err(TraceError::BadWindow { a, b });
        }
        let lo = a.max(0.0);
        let hi = b.min(self.horizon());
        if lo >= hi {
            return Ok(0.0);
        }
        let first = lo.floor() as usize;
        let last = (hi.ceil() as usize).min(self.len());
        let mut total = 0.0;
        for i in first..last {
            let left = lo.max(i as f64);
            let right = hi.min((i + 1) as f64);
            if right > left {
                total += self.values[i] * (right - left);
            }
        }
        Ok(total)
    }

    /// Min or max over every sample whose interval meets `[a, b]` with
    /// positive length; a degenerate window `a = b` picks the sample at `a`.
    pub fn window_min_max(&self, a: f64, b: f64, kind: Extremum) -> Result<f64, TraceError> {
        if !a.is_finite() || !b.is_finite() || a > b {
            return Err(TraceError::BadWindow { a, b });
        }
        let n = self.horizon();
        let empty = TraceError::EmptyWindow { a, b, len: self.len() };
        let range = if a == b {
            if a < 0.0 || a >= n {
                return Err(empty);
            }
            let i = a.floor() as usize;
            i..i + 1
        } else {
            let lo = a.max(0.0);
            let hi = b.min(n);
            if lo >= hi {
                return Err(empty);
            }
            // Sample i qualifies iff i < hi and i + 1 > lo.
            lo.floor() as usize..(hi.ceil() as usize).min(self.len())
        };
        let samples = self.values[range].iter().copied();
        Ok(match kind {
            Extremum::Min => samples.fold(f64::INFINITY, f64::min),
            Extremum::Max => samples.fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Non-negative class identifier; 0 is reserved for normal consumption.
pub type ClassId = u32;

pub const NORMAL_CLASS: ClassId = 0;
pub const NORMAL_NAME: &str = "normal";

/// Traces paired with class labels and a name table.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    traces: Vec<Trace>,
    labels: Vec<ClassId>,
    class_names: BTreeMap<ClassId, String>,
}

impl LabeledDataset {
    pub fn new(
        traces: Vec<Trace>,
        labels: Vec<ClassId>,
        class_names: BTreeMap<ClassId, String>,
    ) -> Result<Self, DatasetError> {
        if traces.len() != labels.len() {
            return Err(DatasetError::LengthMismatch {
                traces: traces.len(),
                labels: labels.len(),
            });
        }
        if let Some(&missing) = labels.iter().find(|l| !class_names.contains_key(l)) {
            return Err(DatasetError::UnnamedLabel(missing));
        }
        Ok(Self {
            traces,
            labels,
            class_names,
        })
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn class_names(&self) -> &BTreeMap<ClassId, String> {
        &self.class_names
    }

    pub fn class_name(&self, id: ClassId) -> Option<&str> {
        self.class_names.get(&id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Trace, ClassId)> {
        self.traces.iter().zip(self.labels.iter().copied())
    }

    /// Writes the dataset as `group,label,value` rows, preceded by `#` comment
    /// lines carrying `metadata`. Labels are written as class names.
    pub fn write_csv<W: std::io::Write>(
        &self,
        mut out: W,
        metadata: &[String],
    ) -> std::io::Result<()> {
        for line in metadata {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "group,label,value")?;
        for (i, (trace, label)) in self.iter().enumerate() {
            let group = if trace.period_label().is_empty() {
                format!("trace{i}")
            } else {
                trace.period_label().to_string()
            };
            let name = &self.class_names[&label];
            for v in trace.values() {
                writeln!(out, "{group},{name},{v}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("{traces} traces but {labels} labels")]
    LengthMismatch { traces: usize, labels: usize },
    #[error("label {0} has no entry in the class name table")]
    UnnamedLabel(ClassId),
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub value_col: String,
    pub label_col: Option<String>,
    pub group_col: Option<String>,
    /// Rows per trace when no grouping column is present.
    pub chunk_len: usize,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            value_col: "value".into(),
            label_col: None,
            group_col: None,
            chunk_len: SAMPLES_PER_DAY,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LabeledDataset, CsvError> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| CsvError::Io {
            path: path.display().to_string(),
            source,
        })?;
    parse_csv(&text, schema)
}

struct Group {
    name: String,
    label: Option<String>,
    values: Vec<f64>,
}

/// Parses CSV text; `#` lines are comments.
///
/// Label cells that all parse as integers are used as class ids directly.
/// Otherwise they are class names: `normal` maps to 0 and other names take
/// ids 1, 2, ... in order of first appearance.
pub fn parse_csv(text: &str, schema: &CsvSchema) -> Result<LabeledDataset, CsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CsvError::MissingColumn(name.to_string()))
    };
    let value_idx = column(&schema.value_col)?;
    let label_idx = schema.label_col.as_deref().map(column).transpose()?;
    let group_idx = schema.group_col.as_deref().map(column).transpose()?;

    let mut groups: Vec<Group> = Vec::new();
    let mut group_index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let cell = |idx: usize, name: &str| {
            record.get(idx).ok_or_else(|| CsvError::MissingCell {
                row,
                column: name.to_string(),
            })
        };
        let raw = cell(value_idx, &schema.value_col)?;
        let value: f64 = raw.parse().map_err(|_| CsvError::NonNumeric {
            row,
            cell: raw.to_string(),
        })?;
        if !value.is_finite() {
            return Err(CsvError::NonFinite { row, value });
        }
        let label = match label_idx {
            Some(idx) => Some(cell(idx, schema.label_col.as_deref().unwrap_or_default())?),
            None => None,
        };
        let group_name = match group_idx {
            Some(idx) => cell(idx, schema.group_col.as_deref().unwrap_or_default())?.to_string(),
            None => format!("trace{}", i / schema.chunk_len.max(1)),
        };
        let slot = *group_index.entry(group_name.clone()).or_insert_with(|| {
            groups.push(Group {
                name: group_name.clone(),
                label: None,
                values: Vec::new(),
            });
            groups.len() - 1
        });
        let group = &mut groups[slot];
        match (&group.label, label) {
            (None, Some(l)) => group.label = Some(l.to_string()),
            (Some(first), Some(l)) if first != l => {
                return Err(CsvError::ConflictingLabels {
                    group: group.name.clone(),
                    first: first.clone(),
                    other: l.to_string(),
                })
            }
            _ => {}
        }
        group.values.push(value);
    }
    if groups.is_empty() {
        return Err(CsvError::NoRows);
    }

    let raw_labels: Vec<Option<String>> = groups.iter().map(|g| g.label.clone()).collect();
    let (labels, class_names) = assign_class_ids(&raw_labels);
    let mut traces = Vec::with_capacity(groups.len());
    for group in groups {
        if group.values.is_empty() {
            return Err(CsvError::EmptyGroup(group.name));
        }
        let trace = Trace::with_metadata(group.values, 0, group.name)
            .expect("values validated while reading");
        traces.push(trace);
    }
    Ok(LabeledDataset::new(traces, labels, class_names).expect("labels named by construction"))
}

fn assign_class_ids(raw: &[Option<String>]) -> (Vec<ClassId>, BTreeMap<ClassId, String>) {
    let mut names = BTreeMap::new();
    names.insert(NORMAL_CLASS, NORMAL_NAME.to_string());
    let numeric = raw
        .iter()
        .flatten()
        .all(|l| l.parse::<ClassId>().is_ok());
    if numeric {
        let labels: Vec<ClassId> = raw
            .iter()
            .map(|l| l.as_deref().map_or(NORMAL_CLASS, |s| s.parse().unwrap()))
            .collect();
        for &id in &labels {
            names.entry(id).or_insert_with(|| format!("class{id}"));
        }
        return (labels, names);
    }
    let mut by_name: BTreeMap<String, ClassId> = BTreeMap::new();
    by_name.insert(NORMAL_NAME.to_string(), NORMAL_CLASS);
    let mut next = 1;
    let labels = raw
        .iter()
        .map(|l| match l {
            None => NORMAL_CLASS,
            Some(name) => *by_name.entry(name.clone()).or_insert_with(|| {
                let id = next;
                next += 1;
                names.insert(id, name.clone());
                id
            }),
        })
        .collect();
    (labels, names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> Trace {
        Trace::new(vec![2.0, 4.0]).unwrap()
    }

    #[test]
    fn value_at_uses_sample_and_hold() {
        let t = two();
        assert_eq!(t.value_at(0.5).unwrap(), 2.0);
        assert_eq!(t.value_at(1.0).unwrap(), 4.0);
        assert!(matches!(t.value_at(2.0), Err(TraceError::OutOfDomain { .. })));
        assert!(t.value_at(-0.1).is_err());
        assert!(t.value_at(f64::NAN).is_err());
    }

    #[test]
    fn integral_examples() {
        let c = Trace::constant(1.0, 48).unwrap();
        assert_eq!(c.window_integral(0.0, 48.0).unwrap(), 48.0);
        assert_eq!(two().window_integral(0.5, 1.5).unwrap(), 3.0);
        assert_eq!(two().window_integral(10.0, 20.0).unwrap(), 0.0);
        assert_eq!(two().window_integral(-5.0, 0.5).unwrap(), 1.0);
        assert!(two().window_integral(1.0, 0.0).is_err());
        assert!(two().window_integral(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn min_max_examples() {
        let t = two();
        assert_eq!(t.window_min_max(0.0, 2.0, Extremum::Min).unwrap(), 2.0);
        assert_eq!(t.window_min_max(0.0, 2.0, Extremum::Max).unwrap(), 4.0);
        // Touching sample 1 only at its left edge does not include it.
        assert_eq!(t.window_min_max(0.0, 1.0, Extremum::Max).unwrap(), 2.0);
        assert_eq!(t.window_min_max(1.0, 1.0, Extremum::Max).unwrap(), 4.0);
        assert!(matches!(
            t.window_min_max(40.0, 41.0, Extremum::Min),
            Err(TraceError::EmptyWindow { .. })
        ));
        assert!(t.window_min_max(2.0, 2.0, Extremum::Min).is_err());
    }

    #[test]
    fn rejects_bad_samples() {
        assert_eq!(Trace::new(vec![]), Err(TraceError::Empty));
        assert!(matches!(
            Trace::new(vec![1.0, f64::NAN]),
            Err(TraceError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn single_group_without_labels() {
        let mut text = String::from("value\n");
        for _ in 0..48 {
            text.push_str("1.0\n");
        }
        let ds = parse_csv(&text, &CsvSchema::default()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.traces()[0].len(), 48);
        assert_eq!(ds.labels(), &[0]);
    }

    #[test]
    fn non_numeric_cell_names_row() {
        let mut text = String::from("value\n");
        for i in 1..=10 {
            text.push_str(if i == 7 { "abc\n" } else { "1.5\n" });
        }
        let err = parse_csv(&text, &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("row 7"), "{err}");
    }

    #[test]
    fn grouped_numeric_labels() {
        let mut text = String::from("day,label,value\n");
        for (g, l) in [("d1", 0), ("d2", 2)] {
            for i in 0..48 {
                text.push_str(&format!("{g},{l},{i}\n"));
            }
        }
        let schema = CsvSchema {
            label_col: Some("label".into()),
            group_col: Some("day".into()),
            ..CsvSchema::default()
        };
        let ds = parse_csv(&text, &schema).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels(), &[0, 2]);
        assert_eq!(ds.traces()[1].period_label(), "d2");
        assert_eq!(ds.class_name(2), Some("class2"));
    }

    #[test]
    fn named_labels_and_chunking() {
        let mut text = String::from("# comment\nlabel,value\n");
        for i in 0..96 {
            let label = if i < 48 { "scale" } else { "normal" };
            text.push_str(&format!("{label},{}\n", i % 3));
        }
        let schema = CsvSchema {
            label_col: Some("label".into()),
            ..CsvSchema::default()
        };
        let ds = parse_csv(&text, &schema).unwrap();
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.class_name(1), Some("scale"));
    }

    #[test]
    fn csv_error_paths() {
        let schema = CsvSchema::default();
        assert!(matches!(
            parse_csv("v\n1\n", &schema),
            Err(CsvError::MissingColumn(_))
        ));
        assert!(matches!(parse_csv("value\n", &schema), Err(CsvError::NoRows)));
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &schema),
            Err(CsvError::Io { .. })
        ));
        let schema = CsvSchema {
            label_col: Some("label".into()),
            group_col: Some("g".into()),
            ..CsvSchema::default()
        };
        assert!(matches!(
            parse_csv("g,label,value\na,x,1\na,y,2\n", &schema),
            Err(CsvError::ConflictingLabels { .. })
        ));
    }

    #[test]
    fn csv_write_then_read() {
        let mut names = BTreeMap::new();
        names.insert(0, "normal".to_string());
        names.insert(1, "cut".to_string());
        let traces = vec![
            Trace::with_metadata(vec![1.0, 2.5], 0, "a").unwrap(),
            Trace::with_metadata(vec![0.0, 0.125], 0, "b").unwrap(),
        ];
        let ds = LabeledDataset::new(traces, vec![0, 1], names).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf, &["seed: 1".into()]).unwrap();
        let schema = CsvSchema {
            label_col: Some("label".into()),
            group_col: Some("group".into()),
            ..CsvSchema::default()
        };
        let back = parse_csv(std::str::from_utf8(&buf).unwrap(), &schema).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn dataset_invariants() {
        let t = Trace::constant(1.0, 4).unwrap();
        assert!(LabeledDataset::new(vec![t.clone()], vec![], BTreeMap::new()).is_err());
        assert_eq!(
            LabeledDataset::new(vec![t], vec![3], BTreeMap::new()),
            Err(DatasetError::UnnamedLabel(3))
        );
    }
}
