//! Tabular flow records: schema, CSV ingestion, a synthetic generator and
//! stratified splitting.
//!
//! A [`FlowDataset`] keeps missing cells as `None`. Categorical cells hold the
//! index of their category in the owning [`ColumnSpec`]. Once a dataset is
//! complete it converts into the dense [`Samples`] view that the models train on.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::rng::{self, tag};

/// Class index of normal traffic.
pub const NORMAL: u8 = 0;
/// Class index of attack (botnet) traffic, the positive class everywhere.
pub const ATTACK: u8 = 1;

const MISSING_TOKENS: [&str; 7] = ["", "na", "nan", "null", "none", "?", "-"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
    Label,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Category texts in index order. For the label column this is
    /// `[normal_text, attack_text]`, used when writing the dataset back out.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categories: Vec::new(),
        }
    }

    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories,
        }
    }

    pub fn label(name: impl Into<String>, normal: &str, attack: &str) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Label,
            categories: vec![normal.to_string(), attack.to_string()],
        }
    }
}

/// Row and class counts captured when a dataset is built.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub n_rows: usize,
    pub class_counts: ClassCounts,
    /// Cells that were present in the source but failed to parse.
    pub unparseable_cells: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub normal: usize,
    pub attack: usize,
}

impl ClassCounts {
    pub fn from_labels(labels: &[u8]) -> Self {
        let attack = labels.iter().filter(|&&l| l == ATTACK).count();
        Self {
            normal: labels.len() - attack,
            attack,
        }
    }

    pub fn total(&self) -> usize {
        self.normal + self.attack
    }

    pub fn get(&self, class: u8) -> usize {
        if class == ATTACK {
            self.attack
        } else {
            self.normal
        }
    }
}

/// How to read a flow CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaMapping {
    pub label_column: String,
    pub positive_labels: BTreeSet<String>,
    /// Explicit kinds. Columns not listed are inferred: continuous when every
    /// present cell parses as a number, categorical otherwise.
    #[serde(default)]
    pub column_kinds: BTreeMap<String, ColumnKind>,
    /// Columns skipped entirely (addresses, timestamps, ...).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ignore_columns: Vec<String>,
}

impl Default for SchemaMapping {
    fn default() -> Self {
        Self {
            label_column: "label".to_string(),
            positive_labels: ["attack".to_string()].into_iter().collect(),
            column_kinds: BTreeMap::new(),
            ignore_columns: Vec::new(),
        }
    }
}

impl SchemaMapping {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mapping: SchemaMapping = serde_json::from_str(&text)?;
        mapping.validate()?;
        Ok(mapping)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positive_labels.is_empty() {
            return Err(Error::Schema("positive_labels must not be empty".into()));
        }
        if self.label_column.is_empty() {
            return Err(Error::Schema("label_column must not be empty".into()));
        }
        Ok(())
    }

    /// Mapping that reloads a dataset written by [`write_csv`] exactly.
    pub fn for_dataset<T: Real>(ds: &FlowDataset<T>) -> Self {
        let label = ds.label_column();
        let positive = label
            .categories
            .get(1)
            .cloned()
            .unwrap_or_else(|| "attack".to_string());
        Self {
            label_column: label.name.clone(),
            positive_labels: [positive].into_iter().collect(),
            column_kinds: ds
                .feature_columns()
                .map(|c| (c.name.clone(), c.kind))
                .collect(),
            ignore_columns: Vec::new(),
        }
    }
}

/// Labeled flow table with optional cells.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowDataset<T> {
    columns: Vec<ColumnSpec>,
    label_position: usize,
    n_features: usize,
    values: Vec<Option<T>>,
    labels: Vec<u8>,
    provenance: Provenance,
}

impl<T: Real> FlowDataset<T> {
    /// Builds a dataset from row-major cells. `columns` must contain exactly one
    /// label column; each row carries one cell per non-label column.
    pub fn new(columns: Vec<ColumnSpec>, rows: Vec<Vec<Option<T>>>, labels: Vec<u8>) -> Result<Self> {
        let n_features = columns.len().saturating_sub(1);
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::Shape(format!(
                    "row {i} has {} cells, expected {n_features}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(columns, values, labels)
    }

    pub(crate) fn from_flat(columns: Vec<ColumnSpec>, values: Vec<Option<T>>, labels: Vec<u8>) -> Result<Self> {
        let label_positions: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ColumnKind::Label)
            .map(|(i, _)| i)
            .collect();
        if label_positions.len() != 1 {
            return Err(Error::Schema(format!(
                "expected exactly one label column, found {}",
                label_positions.len()
            )));
        }
        for c in &columns {
            let unique: BTreeSet<&String> = c.categories.iter().collect();
            if unique.len() != c.categories.len() {
                return Err(Error::Schema(format!("column {} has duplicate categories", c.name)));
            }
        }
        let n_features = columns.len() - 1;
        if values.len() != labels.len() * n_features {
            return Err(Error::Shape(format!(
                "{} cells for {} rows of {} features",
                values.len(),
                labels.len(),
                n_features
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > ATTACK) {
            return Err(Error::Schema(format!("label {bad} is not binary")));
        }
        let provenance = Provenance {
            source: String::new(),
            n_rows: labels.len(),
            class_counts: ClassCounts::from_labels(&labels),
            unparseable_cells: 0,
        };
        Ok(Self {
            columns,
            label_position: label_positions[0],
            n_features,
            values,
            labels,
            provenance,
        })
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.provenance.source = source.into();
        self
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn label_column(&self) -> &ColumnSpec {
        &self.columns[self.label_position]
    }

    /// Non-label columns, in cell order.
    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSpec> {
        let lp = self.label_position;
        self.columns
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != lp)
            .map(|(_, c)| c)
    }

    pub fn feature_column(&self, j: usize) -> &ColumnSpec {
        let idx = if j < self.label_position { j } else { j + 1 };
        &self.columns[idx]
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_columns().map(|c| c.name.clone()).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[Option<T>] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<T> {
        self.values[row * self.n_features + col]
    }

    pub fn column(&self, col: usize) -> Vec<Option<T>> {
        (0..self.n_rows()).map(|r| self.cell(r, col)).collect()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn class_counts(&self) -> ClassCounts {
        ClassCounts::from_labels(&self.labels)
    }

    pub fn missing_cells(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn has_categorical(&self) -> bool {
        self.feature_columns().any(|c| c.kind == ColumnKind::Categorical)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        self.rebuild(self.columns.clone(), values, labels)
    }

    /// Same provenance source, new content.
    pub(crate) fn rebuild(&self, columns: Vec<ColumnSpec>, values: Vec<Option<T>>, labels: Vec<u8>) -> Self {
        let mut provenance = self.provenance.clone();
        provenance.n_rows = labels.len();
        provenance.class_counts = ClassCounts::from_labels(&labels);
        let label_position = columns
            .iter()
            .position(|c| c.kind == ColumnKind::Label)
            .expect("label column");
        let n_features = columns.len() - 1;
        debug_assert_eq!(values.len(), labels.len() * n_features);
        Self {
            columns,
            label_position,
            n_features,
            values,
            labels,
            provenance,
        }
    }

    pub(crate) fn values(&self) -> &[Option<T>] {
        &self.values
    }

    /// Dense view. Fails if any cell is missing.
    pub fn to_samples(&self) -> Result<Samples<T>> {
        let mut x = Vec::with_capacity(self.values.len());
        for (k, v) in self.values.iter().enumerate() {
            match v {
                Some(v) => x.push(*v),
                None => {
                    let (r, c) = (k / self.n_features, k % self.n_features);
                    return Err(Error::NotNumeric(format!(
                        "row {r} column {} is missing",
                        self.feature_column(c).name
                    )));
                }
            }
        }
        Samples::new(x, self.labels.clone(), self.n_features)
    }

    /// Content hash over schema, cells and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.columns {
            h.update(c.name.as_bytes());
            h.update([0u8]);
            for cat in &c.categories {
                h.update(cat.as_bytes());
                h.update([1u8]);
            }
        }
        for v in &self.values {
            match v {
                Some(v) => h.update(v.as_f64().to_bits().to_le_bytes()),
                None => h.update([0xFFu8]),
            }
        }
        h.update(&self.labels);
        hex::encode(h.finalize())
    }
}

/// Dense row-major feature matrix with binary labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples<T> {
    x: Vec<T>,
    y: Vec<u8>,
    n_features: usize,
}

impl<T: Real> Samples<T> {
    pub fn new(x: Vec<T>, y: Vec<u8>, n_features: usize) -> Result<Self> {
        if x.len() != y.len() * n_features {
            return Err(Error::Shape(format!(
                "{} values for {} rows of {} features",
                x.len(),
                y.len(),
                n_features
            )));
        }
        Ok(Self { x, y, n_features })
    }

    pub fn from_rows(rows: &[Vec<T>], y: Vec<u8>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.concat(), y, n_features)
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> T {
        self.x[row * self.n_features + col]
    }

    pub fn labels(&self) -> &[u8] {
        &self.y
    }

    pub fn class_counts(&self) -> ClassCounts {
        ClassCounts::from_labels(&self.y)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut x = Vec::with_capacity(indices.len() * self.n_features);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Self {
            x,
            y,
            n_features: self.n_features,
        }
    }

    /// Keeps only the given columns, in the given order.
    pub fn project(&self, columns: &[usize]) -> Self {
        let mut x = Vec::with_capacity(self.n_rows() * columns.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            x.extend(columns.iter().map(|&c| row[c]));
        }
        Self {
            x,
            y: self.y.clone(),
            n_features: columns.len(),
        }
    }

    pub fn column(&self, col: usize) -> Vec<T> {
        (0..self.n_rows()).map(|r| self.value(r, col)).collect()
    }
}

fn is_missing_token(s: &str) -> bool {
    let t = s.trim();
    MISSING_TOKENS.iter().any(|m| t.eq_ignore_ascii_case(m))
}

/// Reads a flow CSV with a header row.
pub fn load_csv<T: Real>(path: &Path, mapping: &SchemaMapping) -> Result<FlowDataset<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, mapping).map(|ds| ds.with_source(path.display().to_string()))
}

pub fn read_csv<T: Real, R: Read>(reader: R, mapping: &SchemaMapping) -> Result<FlowDataset<T>> {
    mapping.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| *h == mapping.label_column)
        .ok_or_else(|| Error::Schema(format!("header lacks label column {:?}", mapping.label_column)))?;
    for name in mapping.column_kinds.keys().chain(&mapping.ignore_columns) {
        if !header.contains(name) {
            return Err(Error::Schema(format!("column {name:?} is not in the header")));
        }
    }
    for (name, kind) in &mapping.column_kinds {
        if *kind == ColumnKind::Label && *name != mapping.label_column {
            return Err(Error::Schema(format!("column {name:?} is marked label but is not label_column")));
        }
    }

    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::EmptyInput("csv has no data rows".into()));
    }

    let ignored: BTreeSet<&String> = mapping.ignore_columns.iter().collect();
    let feature_src: Vec<usize> = (0..header.len())
        .filter(|&i| i != label_idx && !ignored.contains(&header[i]))
        .collect();

    let kinds: Vec<ColumnKind> = feature_src
        .iter()
        .map(|&i| {
            mapping.column_kinds.get(&header[i]).copied().unwrap_or_else(|| {
                let numeric = records.iter().all(|r| {
                    let s = r.get(i).unwrap_or("");
                    is_missing_token(s) || s.parse::<f64>().is_ok()
                });
                if numeric {
                    ColumnKind::Continuous
                } else {
                    ColumnKind::Categorical
                }
            })
        })
        .collect();

    let mut categories: Vec<Vec<String>> = vec![Vec::new(); feature_src.len()];
    let mut lookup: Vec<HashMap<String, usize>> = vec![HashMap::new(); feature_src.len()];
    let mut values = Vec::with_capacity(records.len() * feature_src.len());
    let mut labels = Vec::with_capacity(records.len());
    let mut unparseable = 0usize;
    let mut label_texts: [Option<String>; 2] = [None, None];

    for rec in &records {
        let raw_label = rec.get(label_idx).unwrap_or("").to_string();
        let label = if mapping.positive_labels.contains(&raw_label) {
            ATTACK
        } else {
            NORMAL
        };
        label_texts[label as usize].get_or_insert(raw_label);
        labels.push(label);
        for (j, &src) in feature_src.iter().enumerate() {
            let s = rec.get(src).unwrap_or("");
            let cell = if is_missing_token(s) {
                None
            } else {
                match kinds[j] {
                    ColumnKind::Continuous => match s.parse::<T>() {
                        Ok(v) if v.is_finite() => Some(v),
                        _ => {
                            unparseable += 1;
                            None
                        }
                    },
                    _ => {
                        let next = categories[j].len();
                        let idx = *lookup[j].entry(s.to_string()).or_insert_with(|| {
                            categories[j].push(s.to_string());
                            next
                        });
                        Some(T::from_count(idx))
                    }
                }
            };
            values.push(cell);
        }
    }

    let [normal_text, attack_text] = label_texts;
    let attack_text = attack_text.unwrap_or_else(|| {
        mapping
            .positive_labels
            .iter()
            .next()
            .cloned()
            .unwrap_or_else(|| "attack".into())
    });
    let normal_text = normal_text.unwrap_or_else(|| "normal".into());
    let mut columns = Vec::with_capacity(feature_src.len() + 1);
    let mut label_inserted = false;
    for (j, &src) in feature_src.iter().enumerate() {
        if src > label_idx && !label_inserted {
            columns.push(ColumnSpec::label(&header[label_idx], &normal_text, &attack_text));
            label_inserted = true;
        }
        columns.push(ColumnSpec {
            name: header[src].clone(),
            kind: kinds[j],
            categories: std::mem::take(&mut categories[j]),
        });
    }
    if !label_inserted {
        columns.push(ColumnSpec::label(&header[label_idx], &normal_text, &attack_text));
    }

    let mut ds = FlowDataset::from_flat(columns, values, labels)?;
    ds.provenance.unparseable_cells = unparseable;
    if unparseable > 0 {
        log::warn!("{unparseable} cells failed to parse and were marked missing");
    }
    Ok(ds)
}

/// Writes the dataset in the same CSV dialect [`load_csv`] reads. Missing
/// cells become empty fields.
pub fn write_csv<T: Real>(ds: &FlowDataset<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(ds, file)
}

pub fn write_csv_to<T: Real, W: Write>(ds: &FlowDataset<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ds.columns().iter().map(|c| c.name.as_str()))?;
    let label_pos = ds.label_position;
    let label_col = ds.label_column();
    for r in 0..ds.n_rows() {
        let mut record: Vec<String> = Vec::with_capacity(ds.columns().len());
        let mut j = 0;
        for (ci, col) in ds.columns().iter().enumerate() {
            if ci == label_pos {
                let l = ds.labels()[r] as usize;
                record.push(label_col.categories.get(l).cloned().unwrap_or_else(|| l.to_string()));
                continue;
            }
            let cell = ds.cell(r, j);
            j += 1;
            record.push(match (cell, col.kind) {
                (None, _) => String::new(),
                (Some(v), ColumnKind::Categorical) => {
                    let idx = v.to_usize().unwrap_or(usize::MAX);
                    col.categories.get(idx).cloned().unwrap_or_default()
                }
                (Some(v), _) => v.to_string(),
            });
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

const PROTOCOLS: [&str; 3] = ["tcp", "udp", "icmp"];
const PROTO_WEIGHTS: [[f64; 3]; 2] = [[0.6, 0.3, 0.1], [0.3, 0.5, 0.2]];

/// Class-separated synthetic flows.
///
/// Informative column `j` is Gaussian around `10·(j+1)` with scale `1+j` for
/// normal rows; attack rows are shifted by `(2.5 + 0.5·(j mod 3))` scale units.
/// Noise columns share one distribution across classes. A categorical `proto`
/// column with class-dependent frequencies is always present.
pub fn synth_generate<T: Real>(
    n_normal: usize,
    n_attack: usize,
    d_informative: usize,
    d_noise: usize,
    seed: u64,
) -> Result<FlowDataset<T>> {
    let n = n_normal + n_attack;
    if n == 0 {
        return Err(Error::EmptyInput("synthetic dataset with zero rows".into()));
    }
    if n_normal > 0 && n_attack > 0 && d_informative == 0 {
        return Err(Error::Parameter("d_informative must be at least 1 when both classes are present".into()));
    }
    let mut columns: Vec<ColumnSpec> = (0..d_informative)
        .map(|j| ColumnSpec::continuous(format!("inf_{j}")))
        .chain((0..d_noise).map(|j| ColumnSpec::continuous(format!("noise_{j}"))))
        .collect();
    columns.push(ColumnSpec::categorical(
        "proto",
        PROTOCOLS.iter().map(|s| s.to_string()).collect(),
    ));
    columns.push(ColumnSpec::label("label", "normal", "attack"));

    let mut labels: Vec<u8> = std::iter::repeat_n(NORMAL, n_normal)
        .chain(std::iter::repeat_n(ATTACK, n_attack))
        .collect();
    let mut order_rng = rng::stream(seed, &[tag::SYNTH, u64::MAX]);
    labels.shuffle(&mut order_rng);

    let width = d_informative + d_noise + 1;
    let mut values = Vec::with_capacity(n * width);
    for (r, &label) in labels.iter().enumerate() {
        let mut rng = rng::stream(seed, &[tag::SYNTH, r as u64]);
        for j in 0..d_informative {
            let z: f64 = rng.sample(StandardNormal);
            let scale = 1.0 + j as f64;
            let shift = if label == ATTACK { 2.5 + 0.5 * (j % 3) as f64 } else { 0.0 };
            values.push(Some(T::lit(10.0 * (j + 1) as f64 + scale * (z + shift))));
        }
        for j in 0..d_noise {
            let z: f64 = rng.sample(StandardNormal);
            values.push(Some(T::lit(5.0 * (j + 1) as f64 + 2.0 * z)));
        }
        let u: f64 = rng.random();
        let w = PROTO_WEIGHTS[label as usize];
        let proto = if u < w[0] {
            0
        } else if u < w[0] + w[1] {
            1
        } else {
            2
        };
        values.push(Some(T::from_count(proto)));
    }
    Ok(FlowDataset::from_flat(columns, values, labels)?.with_source(format!(
        "synthetic(n_normal={n_normal}, n_attack={n_attack}, d_informative={d_informative}, d_noise={d_noise}, seed={seed})"
    )))
}

/// Blanks each feature cell independently with probability `rate`.
pub fn inject_missing<T: Real>(ds: &FlowDataset<T>, rate: f64, seed: u64) -> Result<FlowDataset<T>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Parameter(format!("missing rate {rate} outside [0, 1]")));
    }
    let mut rng = rng::stream(seed, &[tag::MISSING]);
    let values = ds
        .values()
        .iter()
        .map(|v| if rng.random::<f64>() < rate { None } else { *v })
        .collect();
    Ok(ds.rebuild(ds.columns.clone(), values, ds.labels.clone()))
}

/// Stratified train/test row indices, each side sorted ascending.
pub fn stratified_split_indices(labels: &[u8], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Parameter(format!("train_fraction {train_fraction} must lie in (0, 1)")));
    }
    if labels.len() < 2 {
        return Err(Error::Stratification(format!("{} rows cannot be split", labels.len())));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [NORMAL, ATTACK] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {class} has {} row(s); at least 2 are needed",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng::stream(seed, &[tag::SPLIT, class as u64]));
        let n_train = ((train_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified k-fold partition: sorted row indices per fold.
///
/// Rows of each class are shuffled and dealt round-robin, continuing the deal
/// across classes, so fold sizes and per-class counts differ by at most one.
/// `k == n_rows` is leave-one-out and skips the per-class size check.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::Parameter(format!("k = {k}; at least 2 folds are needed")));
    }
    if k > n {
        return Err(Error::Stratification(format!("{n} rows cannot form {k} folds")));
    }
    if k == n {
        return Ok((0..n).map(|i| vec![i]).collect());
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0usize;
    for class in [NORMAL, ATTACK] {
        let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(Error::Stratification(format!(
                "class {class} has {} row(s), fewer than k = {k}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng::stream(seed, &[tag::FOLDS, class as u64]));
        for i in idx {
            folds[next % k].push(i);
            next += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

pub fn split_train_test<T: Real>(
    ds: &FlowDataset<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(FlowDataset<T>, FlowDataset<T>)> {
    let (train, test) = stratified_split_indices(ds.labels(), train_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mapping() -> SchemaMapping {
        SchemaMapping {
            label_column: "Label".into(),
            positive_labels: ["Botnet".to_string()].into_iter().collect(),
            column_kinds: BTreeMap::new(),
            ignore_columns: Vec::new(),
        }
    }

    #[test]
    fn folds_partition_rows() {
        let labels: Vec<u8> = (0..10).map(|i| u8::from(i % 5 == 0)).collect();
        let folds = stratified_folds(&labels, 2, 3).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.len() == 5));
        assert!(folds.iter().all(|f| f.iter().filter(|&&i| labels[i] == 1).count() == 1));
        let loo = stratified_folds(&labels, 10, 3).unwrap();
        assert!(loo.iter().all(|f| f.len() == 1));
        assert!(matches!(stratified_folds(&labels, 3, 3), Err(Error::Stratification(_))));
    }

    #[test]
    fn labels_follow_positive_membership() {
        let csv = "dur,Label\n1.0,Botnet\n2.0,Normal\n3.0,Botnet\n";
        let ds: FlowDataset<f64> = read_csv(csv.as_bytes(), &mapping()).unwrap();
        assert_eq!(ds.labels(), &[1, 0, 1]);
        assert_eq!(ds.provenance().class_counts, ClassCounts { normal: 1, attack: 2 });
    }

    #[test]
    fn unparseable_continuous_cell_is_missing() {
        let mut m = mapping();
        m.column_kinds.insert("dur".into(), ColumnKind::Continuous);
        let csv = "dur,Label\n1.0,Botnet\nabc,Normal\n";
        let ds: FlowDataset<f64> = read_csv(csv.as_bytes(), &m).unwrap();
        assert_eq!(ds.cell(1, 0), None);
        assert_eq!(ds.provenance().unparseable_cells, 1);
    }

    #[test]
    fn missing_label_column_is_schema_error() {
        let csv = "dur,class\n1.0,Botnet\n";
        let err = read_csv::<f64, _>(csv.as_bytes(), &mapping()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn header_only_is_empty_input() {
        let err = read_csv::<f64, _>("dur,Label\n".as_bytes(), &mapping()).unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv::<f64>(Path::new("/nonexistent/flows.csv"), &mapping()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn text_columns_are_inferred_categorical() {
        let csv = "proto,\"bytes\",Label\ntcp,10,Normal\nudp,,Botnet\ntcp,3,Normal\n";
        let ds: FlowDataset<f64> = read_csv(csv.as_bytes(), &mapping()).unwrap();
        assert_eq!(ds.feature_column(0).kind, ColumnKind::Categorical);
        assert_eq!(ds.feature_column(0).categories, vec!["tcp", "udp"]);
        assert_eq!(ds.feature_column(1).kind, ColumnKind::Continuous);
        assert_eq!(ds.column(0), vec![Some(0.0), Some(1.0), Some(0.0)]);
        assert_eq!(ds.cell(1, 1), None);
    }

    #[test]
    fn ignored_columns_are_dropped() {
        let mut m = mapping();
        m.ignore_columns.push("SrcAddr".into());
        let csv = "SrcAddr,dur,Label\n10.0.0.1,1,Botnet\n10.0.0.2,2,Normal\n";
        let ds: FlowDataset<f64> = read_csv(csv.as_bytes(), &m).unwrap();
        assert_eq!(ds.feature_names(), vec!["dur"]);
    }

    #[test]
    fn ctu13_scale_class_counts() {
        let mut csv = String::from("dur,Label\n");
        for i in 0..20_902 {
            csv.push_str(&format!("{i},Normal\n"));
        }
        for i in 0..4_775 {
            csv.push_str(&format!("{i},Botnet\n"));
        }
        let ds: FlowDataset<f32> = read_csv(csv.as_bytes(), &mapping()).unwrap();
        let counts = ds.provenance().class_counts;
        assert_eq!((counts.normal, counts.attack), (20_902, 4_775));
    }

    #[test]
    fn synth_is_deterministic() {
        let a: FlowDataset<f64> = synth_generate(1000, 200, 5, 15, 7).unwrap();
        let b: FlowDataset<f64> = synth_generate(1000, 200, 5, 15, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.n_features(), 21);
    }

    #[test]
    fn synth_rejects_empty_and_uninformative() {
        assert!(matches!(synth_generate::<f64>(0, 0, 1, 0, 1), Err(Error::EmptyInput(_))));
        assert!(matches!(synth_generate::<f64>(5, 5, 0, 3, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn stratified_split_counts() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i >= 80)).collect();
        let (train, test) = stratified_split_indices(&labels, 0.8, 3).unwrap();
        let attack = |ix: &[usize]| ix.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!((train.len(), attack(&train)), (80, 16));
        assert_eq!((test.len(), attack(&test)), (20, 4));
    }

    #[test]
    fn split_four_rows_in_half() {
        let labels = [0, 0, 1, 1];
        let (train, test) = stratified_split_indices(&labels, 0.5, 1).unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(test.len(), 2);
        assert_eq!(train.iter().filter(|&&i| labels[i] == 1).count(), 1);
    }

    #[test]
    fn split_singleton_class_fails() {
        let err = stratified_split_indices(&[0, 0, 0, 1], 0.5, 1).unwrap_err();
        assert!(matches!(err, Error::Stratification(_)));
        assert!(matches!(stratified_split_indices(&[0, 1], 1.0, 1), Err(Error::Parameter(_))));
    }
}
