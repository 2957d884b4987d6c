//! Cleaning and balancing: sparse-row removal, mean/mode imputation, one-hot
//! encoding, SMOTE and attack-ratio resampling.
//!
//! NaN cells and missing cells are the same thing here (`None`). Every
//! operation returns a new dataset; inputs are never mutated.

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::{ClassCounts, ColumnKind, ColumnSpec, FlowDataset, ATTACK, NORMAL};
use crate::num::Real;
use crate::rng::{self, tag};

pub const DEFAULT_MAX_MISSING_FRACTION: f64 = 0.30;
pub const DEFAULT_SMOTE_K: usize = 5;

/// Evidence trail of what preprocessing did.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub rows_dropped: usize,
    pub cells_imputed_mean: usize,
    pub cells_imputed_mode: usize,
    pub columns_added_by_encoding: usize,
    pub unseen_categories: usize,
    pub rows_removed_by_resampling: usize,
    pub synthetic_rows: usize,
    pub class_counts_before: ClassCounts,
    pub class_counts_after: ClassCounts,
}

impl PreprocessReport {
    fn absorb(&mut self, other: &PreprocessReport) {
        self.rows_dropped += other.rows_dropped;
        self.cells_imputed_mean += other.cells_imputed_mean;
        self.cells_imputed_mode += other.cells_imputed_mode;
        self.columns_added_by_encoding += other.columns_added_by_encoding;
        self.unseen_categories += other.unseen_categories;
        self.rows_removed_by_resampling += other.rows_removed_by_resampling;
        self.synthetic_rows += other.synthetic_rows;
    }
}

/// Removes rows whose missing fraction exceeds `max_missing_fraction`.
/// A row exactly at the threshold survives.
pub fn drop_sparse_rows<T: Real>(
    ds: &FlowDataset<T>,
    max_missing_fraction: f64,
) -> Result<(FlowDataset<T>, PreprocessReport)> {
    if !(0.0..=1.0).contains(&max_missing_fraction) {
        return Err(Error::Parameter(format!(
            "max_missing_fraction {max_missing_fraction} outside [0, 1]"
        )));
    }
    let d = ds.n_features().max(1) as f64;
    let keep: Vec<usize> = (0..ds.n_rows())
        .filter(|&r| {
            let missing = ds.row(r).iter().filter(|c| c.is_none()).count();
            missing as f64 / d <= max_missing_fraction
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyInput("every row exceeds the missing-value threshold".into()));
    }
    let report = PreprocessReport {
        rows_dropped: ds.n_rows() - keep.len(),
        class_counts_before: ds.class_counts(),
        ..Default::default()
    };
    let out = if keep.len() == ds.n_rows() { ds.clone() } else { ds.subset(&keep) };
    let report = PreprocessReport {
        class_counts_after: out.class_counts(),
        ..report
    };
    Ok((out, report))
}

/// Fill value for one column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fill<T> {
    Mean(T),
    /// Category text, so the fill survives datasets with a different category order.
    Mode(String),
}

/// Per-column fill values learned from a training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ImputerState<T> {
    pub columns: Vec<String>,
    pub fills: Vec<Option<Fill<T>>>,
}

impl<T: Real> ImputerState<T> {
    /// Column means and modes of present values. Mode ties go to the
    /// lexicographically smallest category. Fully missing columns get no fill.
    pub fn fit(ds: &FlowDataset<T>) -> Self {
        let fills = ds
            .feature_columns()
            .enumerate()
            .map(|(j, spec)| {
                let present: Vec<T> = (0..ds.n_rows()).filter_map(|r| ds.cell(r, j)).collect();
                if present.is_empty() {
                    return None;
                }
                match spec.kind {
                    ColumnKind::Categorical => {
                        let mut counts: HashMap<usize, usize> = HashMap::new();
                        for v in &present {
                            *counts.entry(v.to_usize().unwrap_or(usize::MAX)).or_default() += 1;
                        }
                        counts
                            .into_iter()
                            .filter_map(|(idx, n)| spec.categories.get(idx).map(|c| (n, c)))
                            .max_by(|(na, ca), (nb, cb)| na.cmp(nb).then_with(|| cb.cmp(ca)))
                            .map(|(_, c)| Fill::Mode(c.clone()))
                    }
                    _ => {
                        let sum: T = present.iter().copied().sum();
                        Some(Fill::Mean(sum / T::from_count(present.len())))
                    }
                }
            })
            .collect();
        Self {
            columns: ds.feature_names(),
            fills,
        }
    }

    pub fn apply(&self, ds: &FlowDataset<T>) -> Result<(FlowDataset<T>, PreprocessReport)> {
        check_columns(&self.columns, ds)?;
        let mut columns = ds.columns().to_vec();
        let label_pos = columns.iter().position(|c| c.kind == ColumnKind::Label).expect("label");
        let spec_index = |j: usize| if j < label_pos { j } else { j + 1 };
        let mut values = ds.values().to_vec();
        let d = ds.n_features();
        let mut report = PreprocessReport {
            class_counts_before: ds.class_counts(),
            class_counts_after: ds.class_counts(),
            ..Default::default()
        };
        for (j, fill) in self.fills.iter().enumerate() {
            let gaps: Vec<usize> = (0..ds.n_rows()).filter(|&r| values[r * d + j].is_none()).collect();
            if gaps.is_empty() {
                continue;
            }
            let value = match fill {
                None => {
                    return Err(Error::UnimputableColumn {
                        column: self.columns[j].clone(),
                    })
                }
                Some(Fill::Mean(m)) => {
                    report.cells_imputed_mean += gaps.len();
                    *m
                }
                Some(Fill::Mode(text)) => {
                    report.cells_imputed_mode += gaps.len();
                    let spec = &mut columns[spec_index(j)];
                    let idx = match spec.categories.iter().position(|c| c == text) {
                        Some(i) => i,
                        None => {
                            spec.categories.push(text.clone());
                            spec.categories.len() - 1
                        }
                    };
                    T::from_count(idx)
                }
            };
            for r in gaps {
                values[r * d + j] = Some(value);
            }
        }
        Ok((ds.rebuild(columns, values, ds.labels().to_vec()), report))
    }
}

fn check_columns<T: Real>(expected: &[String], ds: &FlowDataset<T>) -> Result<()> {
    let got = ds.feature_names();
    if got != expected {
        return Err(Error::Schema(format!(
            "feature columns {got:?} do not match the fitted columns {expected:?}"
        )));
    }
    Ok(())
}

/// Mean imputation for continuous columns, mode imputation for categorical ones.
pub fn impute<T: Real>(ds: &FlowDataset<T>) -> Result<(FlowDataset<T>, PreprocessReport)> {
    ImputerState::fit(ds).apply(ds)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    /// Frozen at fit time, in first-appearance order.
    pub categories: Vec<String>,
}

/// One-hot layout learned from a training set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderState {
    pub columns: Vec<EncodedColumn>,
    /// Cells seen in transform mode whose category was unknown at fit time.
    #[serde(default)]
    pub unseen_count: u64,
}

impl EncoderState {
    fn entry(&self, name: &str) -> Option<&EncodedColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Replaces each categorical column by one binary column per category.
///
/// With `enc = None` the layout is fitted on `ds`. With a fitted encoder,
/// categories unknown to it encode as all zeros and bump `unseen_count`.
pub fn encode_categorical<T: Real>(
    ds: &FlowDataset<T>,
    enc: Option<&EncoderState>,
) -> (FlowDataset<T>, EncoderState, PreprocessReport) {
    let mut state = enc.cloned().unwrap_or_default();
    let mut report = PreprocessReport {
        class_counts_before: ds.class_counts(),
        class_counts_after: ds.class_counts(),
        ..Default::default()
    };
    if !ds.has_categorical() {
        return (ds.clone(), state, report);
    }

    // Per input feature column: the category layout it expands into, if any,
    // plus a map from the dataset's category index to the layout slot.
    let mut layouts: Vec<Option<(Vec<String>, Vec<Option<usize>>)>> = Vec::with_capacity(ds.n_features());
    for (j, spec) in ds.feature_columns().enumerate() {
        if spec.kind != ColumnKind::Categorical {
            layouts.push(None);
            continue;
        }
        let categories = match state.entry(&spec.name) {
            Some(e) => e.categories.clone(),
            None => {
                let mut seen = vec![false; spec.categories.len()];
                let mut order = Vec::new();
                for r in 0..ds.n_rows() {
                    if let Some(idx) = ds.cell(r, j).and_then(|v| v.to_usize()) {
                        if idx < seen.len() && !seen[idx] {
                            seen[idx] = true;
                            order.push(spec.categories[idx].clone());
                        }
                    }
                }
                state.columns.push(EncodedColumn {
                    name: spec.name.clone(),
                    categories: order.clone(),
                });
                order
            }
        };
        let slots = spec
            .categories
            .iter()
            .map(|c| categories.iter().position(|k| k == c))
            .collect();
        layouts.push(Some((categories, slots)));
    }

    let mut columns = Vec::new();
    let mut n_categorical = 0usize;
    let mut n_onehot = 0usize;
    let mut j = 0;
    for spec in ds.columns() {
        if spec.kind == ColumnKind::Label {
            columns.push(spec.clone());
            continue;
        }
        match &layouts[j] {
            Some((cats, _)) => {
                n_categorical += 1;
                n_onehot += cats.len();
                columns.extend(cats.iter().map(|c| ColumnSpec::continuous(format!("{}={}", spec.name, c))));
            }
            None => columns.push(spec.clone()),
        }
        j += 1;
    }
    let width = columns.len() - 1;
    let mut values = Vec::with_capacity(ds.n_rows() * width);
    let mut unseen = 0u64;
    for r in 0..ds.n_rows() {
        for (j, layout) in layouts.iter().enumerate() {
            let cell = ds.cell(r, j);
            match layout {
                None => values.push(cell),
                Some((cats, slots)) => match cell {
                    None => values.extend(std::iter::repeat_n(None, cats.len())),
                    Some(v) => {
                        let slot = v.to_usize().and_then(|i| slots.get(i).copied().flatten());
                        if slot.is_none() {
                            unseen += 1;
                        }
                        values.extend((0..cats.len()).map(|k| {
                            Some(if Some(k) == slot { T::one() } else { T::zero() })
                        }));
                    }
                },
            }
        }
    }
    if unseen > 0 {
        log::warn!("{unseen} categorical cells had categories unseen at fit time; encoded as all zeros");
    }
    state.unseen_count += unseen;
    report.columns_added_by_encoding = n_onehot.saturating_sub(n_categorical);
    report.unseen_categories = unseen as usize;
    (ds.rebuild(columns, values, ds.labels().to_vec()), state, report)
}

fn require_numeric<T: Real>(ds: &FlowDataset<T>) -> Result<()> {
    if ds.has_categorical() {
        return Err(Error::NotNumeric("categorical columns must be encoded first".into()));
    }
    if ds.missing_cells() > 0 {
        return Err(Error::NotNumeric("missing cells must be imputed first".into()));
    }
    Ok(())
}

fn class_rows(labels: &[u8], class: u8) -> Vec<usize> {
    (0..labels.len()).filter(|&i| labels[i] == class).collect()
}

/// Appends `n_new` SMOTE rows of `class`.
fn smote_oversample<T: Real>(
    ds: &FlowDataset<T>,
    class: u8,
    n_new: usize,
    k_neighbors: usize,
    seed: u64,
) -> Result<FlowDataset<T>> {
    require_numeric(ds)?;
    if k_neighbors == 0 {
        return Err(Error::Parameter("k_neighbors must be at least 1".into()));
    }
    let minority = class_rows(ds.labels(), class);
    if minority.len() < 2 {
        return Err(Error::InsufficientMinority {
            required: 2,
            actual: minority.len(),
        });
    }
    if n_new == 0 {
        return Ok(ds.clone());
    }
    let k = k_neighbors.min(minority.len() - 1);
    let samples = ds.to_samples()?;
    let neighbors: Vec<Vec<usize>> = minority
        .par_iter()
        .map(|&i| {
            let xi = samples.row(i);
            let mut dist: Vec<(T, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let d2: T = xi
                        .iter()
                        .zip(samples.row(j))
                        .map(|(a, b)| (*a - *b) * (*a - *b))
                        .sum();
                    (d2, j)
                })
                .collect();
            dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
            dist.truncate(k);
            dist.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = rng::stream(seed, &[tag::SMOTE, class as u64]);
    let mut values = ds.values().to_vec();
    let mut labels = ds.labels().to_vec();
    values.reserve(n_new * ds.n_features());
    for _ in 0..n_new {
        let b = rng.random_range(0..minority.len());
        let nn = neighbors[b][rng.random_range(0..k)];
        let mut g = T::lit(rng.random::<f64>());
        if g >= T::one() {
            g = T::one() - T::epsilon();
        }
        let x = samples.row(minority[b]);
        let y = samples.row(nn);
        values.extend(x.iter().zip(y).map(|(a, b)| Some(*a + g * (*b - *a))));
        labels.push(class);
    }
    Ok(ds.rebuild(ds.columns().to_vec(), values, labels))
}

/// Oversamples the minority class with SMOTE until both classes are equal.
pub fn smote_balance<T: Real>(ds: &FlowDataset<T>, k_neighbors: usize, seed: u64) -> Result<FlowDataset<T>> {
    require_numeric(ds)?;
    let counts = ds.class_counts();
    if counts.normal == counts.attack {
        return Ok(ds.clone());
    }
    let (minority, gap) = if counts.attack < counts.normal {
        (ATTACK, counts.normal - counts.attack)
    } else {
        (NORMAL, counts.attack - counts.normal)
    };
    smote_oversample(ds, minority, gap, k_neighbors, seed)
}

/// Resamples so that attack rows make up `eta` of the output, within one row.
///
/// Undersamples the over-represented class when that leaves it non-empty;
/// otherwise SMOTE-oversamples the under-represented class.
pub fn resample_to_attack_ratio<T: Real>(ds: &FlowDataset<T>, eta: f64, seed: u64) -> Result<FlowDataset<T>> {
    resample_to_attack_ratio_with(ds, eta, DEFAULT_SMOTE_K, seed)
}

pub fn resample_to_attack_ratio_with<T: Real>(
    ds: &FlowDataset<T>,
    eta: f64,
    k_neighbors: usize,
    seed: u64,
) -> Result<FlowDataset<T>> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Parameter(format!("attack ratio {eta} must lie in (0, 1)")));
    }
    let c = ds.class_counts();
    if c.normal == 0 || c.attack == 0 {
        return Err(Error::Resample(format!(
            "attack ratio {eta} is unreachable with class counts {}/{}",
            c.normal, c.attack
        )));
    }
    let (a, n) = (c.attack as f64, c.normal as f64);
    let current = a / (a + n);
    if current == eta {
        return Ok(ds.clone());
    }
    // `shrink` is the over-represented class, `grow` the other one.
    let (shrink, shrink_count, target_shrink, grow, target_grow) = if current < eta {
        let keep = (a * (1.0 - eta) / eta).round() as usize;
        let grow_to = (n * eta / (1.0 - eta)).round() as usize;
        (NORMAL, c.normal, keep, ATTACK, grow_to)
    } else {
        let keep = (n * eta / (1.0 - eta)).round() as usize;
        let grow_to = (a * (1.0 - eta) / eta).round() as usize;
        (ATTACK, c.attack, keep, NORMAL, grow_to)
    };
    if target_shrink >= 1 {
        if target_shrink >= shrink_count {
            return Ok(ds.clone());
        }
        let rows = class_rows(ds.labels(), shrink);
        let mut rng = rng::stream(seed, &[tag::RESAMPLE]);
        let mut keep: Vec<usize> = index::sample(&mut rng, rows.len(), target_shrink)
            .into_iter()
            .map(|i| rows[i])
            .collect();
        keep.extend(class_rows(ds.labels(), grow));
        keep.sort_unstable();
        return Ok(ds.subset(&keep));
    }
    let have = c.get(grow);
    smote_oversample(ds, grow, target_grow.saturating_sub(have), k_neighbors, seed)
}

/// Whether SMOTE runs before or after attack-ratio resampling when both apply.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceOrder {
    #[default]
    ResampleThenSmote,
    SmoteThenResample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessOptions {
    pub max_missing_fraction: f64,
    pub smote: bool,
    pub smote_k: usize,
    /// Target attack fraction of the training set, if any.
    pub attack_ratio: Option<f64>,
    pub order: BalanceOrder,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            max_missing_fraction: DEFAULT_MAX_MISSING_FRACTION,
            smote: true,
            smote_k: DEFAULT_SMOTE_K,
            attack_ratio: None,
            order: BalanceOrder::default(),
        }
    }
}

/// Learned transforms to replay on held-out or new data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PreprocessState<T> {
    pub imputer: ImputerState<T>,
    pub encoder: EncoderState,
    /// Feature names after encoding, i.e. the model's input layout.
    pub feature_names: Vec<String>,
}

/// Fits the full cleaning chain on a training set:
/// drop sparse rows, impute, one-hot encode, then balance.
pub fn fit_preprocess<T: Real>(
    ds: &FlowDataset<T>,
    opts: &PreprocessOptions,
    seed: u64,
) -> Result<(FlowDataset<T>, PreprocessState<T>, PreprocessReport)> {
    let mut report = PreprocessReport {
        class_counts_before: ds.class_counts(),
        ..Default::default()
    };
    let (ds, r) = drop_sparse_rows(ds, opts.max_missing_fraction)?;
    report.absorb(&r);
    let imputer = ImputerState::fit(&ds);
    let (ds, r) = imputer.apply(&ds)?;
    report.absorb(&r);
    let (ds, encoder, r) = encode_categorical(&ds, None);
    report.absorb(&r);

    let before = ds.n_rows();
    let smote = |d: &FlowDataset<T>| -> Result<FlowDataset<T>> {
        if opts.smote {
            smote_balance(d, opts.smote_k, seed)
        } else {
            Ok(d.clone())
        }
    };
    let ratio = |d: &FlowDataset<T>| -> Result<FlowDataset<T>> {
        match opts.attack_ratio {
            Some(eta) => resample_to_attack_ratio_with(d, eta, opts.smote_k, seed),
            None => Ok(d.clone()),
        }
    };
    let balanced = match opts.order {
        BalanceOrder::ResampleThenSmote => smote(&ratio(&ds)?)?,
        BalanceOrder::SmoteThenResample => ratio(&smote(&ds)?)?,
    };
    // Net row change from balancing, split into removals and synthetic rows.
    let kept_real = balanced.n_rows().min(before);
    report.rows_removed_by_resampling = before.saturating_sub(kept_real);
    report.synthetic_rows = balanced.n_rows().saturating_sub(before);
    report.class_counts_after = balanced.class_counts();
    let state = PreprocessState {
        imputer,
        feature_names: balanced.feature_names(),
        encoder,
    };
    Ok((balanced, state, report))
}

/// Replays fitted transforms (no balancing) on held-out data.
pub fn apply_preprocess<T: Real>(
    ds: &FlowDataset<T>,
    state: &PreprocessState<T>,
    opts: &PreprocessOptions,
) -> Result<(FlowDataset<T>, PreprocessReport)> {
    let mut report = PreprocessReport {
        class_counts_before: ds.class_counts(),
        ..Default::default()
    };
    let (ds, r) = drop_sparse_rows(ds, opts.max_missing_fraction)?;
    report.absorb(&r);
    let (ds, r) = state.imputer.apply(&ds)?;
    report.absorb(&r);
    let (ds, _, r) = encode_categorical(&ds, Some(&state.encoder));
    report.absorb(&r);
    if ds.feature_names() != state.feature_names {
        return Err(Error::Schema("encoded columns do not match the fitted layout".into()));
    }
    report.class_counts_after = ds.class_counts();
    Ok((ds, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric(rows: Vec<Vec<Option<f64>>>, labels: Vec<u8>) -> FlowDataset<f64> {
        let d = rows[0].len();
        let mut cols: Vec<ColumnSpec> = (0..d).map(|j| ColumnSpec::continuous(format!("c{j}"))).collect();
        cols.push(ColumnSpec::label("label", "normal", "attack"));
        FlowDataset::new(cols, rows, labels).unwrap()
    }

    fn row_with_missing(d: usize, missing: usize) -> Vec<Option<f64>> {
        (0..d).map(|j| if j < missing { None } else { Some(j as f64) }).collect()
    }

    #[test]
    fn drop_rule_is_inclusive_at_threshold() {
        let ds = numeric(vec![row_with_missing(10, 4), row_with_missing(10, 3)], vec![0, 1]);
        let (out, rep) = drop_sparse_rows(&ds, 0.30).unwrap();
        assert_eq!(out.n_rows(), 1);
        assert_eq!(out.labels(), &[1]);
        assert_eq!(rep.rows_dropped, 1);
    }

    #[test]
    fn drop_is_identity_without_gaps() {
        let ds = numeric(vec![row_with_missing(3, 0); 4], vec![0, 1, 0, 1]);
        let (out, rep) = drop_sparse_rows(&ds, 0.30).unwrap();
        assert_eq!(out, ds);
        assert_eq!(rep.rows_dropped, 0);
    }

    #[test]
    fn dropping_everything_is_an_error() {
        let ds = numeric(vec![row_with_missing(2, 2)], vec![0]);
        assert!(matches!(drop_sparse_rows(&ds, 0.3), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn mean_imputation() {
        let ds = numeric(vec![vec![Some(1.0)], vec![None], vec![Some(3.0)]], vec![0, 0, 1]);
        let (out, rep) = impute(&ds).unwrap();
        assert_eq!(out.column(0), vec![Some(1.0), Some(2.0), Some(3.0)]);
        assert_eq!(rep.cells_imputed_mean, 1);
        assert_eq!(out.missing_cells(), 0);
    }

    fn proto_dataset(cells: &[Option<&str>]) -> FlowDataset<f64> {
        let mut cats: Vec<String> = Vec::new();
        let rows = cells
            .iter()
            .map(|c| {
                vec![c.map(|s| {
                    let idx = cats.iter().position(|k| k == s).unwrap_or_else(|| {
                        cats.push(s.to_string());
                        cats.len() - 1
                    });
                    idx as f64
                })]
            })
            .collect();
        let cols = vec![
            ColumnSpec::categorical("proto", cats),
            ColumnSpec::label("label", "normal", "attack"),
        ];
        FlowDataset::new(cols, rows, vec![0; cells.len()]).unwrap()
    }

    #[test]
    fn mode_imputation() {
        let ds = proto_dataset(&[Some("tcp"), Some("udp"), Some("tcp"), None]);
        let (out, rep) = impute(&ds).unwrap();
        assert_eq!(out.cell(3, 0), Some(0.0));
        assert_eq!(rep.cells_imputed_mode, 1);
    }

    #[test]
    fn mode_ties_prefer_smallest_text() {
        let ds = proto_dataset(&[Some("udp"), Some("tcp"), None]);
        let (out, _) = impute(&ds).unwrap();
        assert_eq!(out.feature_column(0).categories[out.cell(2, 0).unwrap() as usize], "tcp");
    }

    #[test]
    fn fully_missing_column_is_unimputable() {
        let ds = numeric(vec![vec![None, Some(1.0)], vec![None, Some(2.0)]], vec![0, 1]);
        assert!(matches!(impute(&ds), Err(Error::UnimputableColumn { .. })));
    }

    #[test]
    fn one_hot_fit_and_unseen_transform() {
        let ds = proto_dataset(&[Some("tcp"), Some("udp"), Some("tcp")]);
        let (out, enc, rep) = encode_categorical(&ds, None);
        assert_eq!(out.feature_names(), vec!["proto=tcp", "proto=udp"]);
        assert_eq!(out.column(0), vec![Some(1.0), Some(0.0), Some(1.0)]);
        assert_eq!(out.column(1), vec![Some(0.0), Some(1.0), Some(0.0)]);
        assert_eq!(rep.columns_added_by_encoding, 1);

        let other = proto_dataset(&[Some("icmp")]);
        let (out, enc2, rep) = encode_categorical(&other, Some(&enc));
        assert_eq!(out.row(0), &[Some(0.0), Some(0.0)]);
        assert_eq!(enc2.unseen_count, 1);
        assert_eq!(rep.unseen_categories, 1);
    }

    #[test]
    fn encoding_without_categoricals_is_identity() {
        let ds = numeric(vec![vec![Some(1.0)], vec![Some(2.0)]], vec![0, 1]);
        let (out, enc, _) = encode_categorical(&ds, None);
        assert_eq!(out, ds);
        assert!(enc.columns.is_empty());
    }

    #[test]
    fn smote_on_two_point_minority_stays_on_segment() {
        let mut rows = vec![vec![Some(0.0), Some(0.0)], vec![Some(2.0), Some(2.0)]];
        rows.extend((0..10).map(|i| vec![Some(10.0 + i as f64), Some(-5.0)]));
        let mut labels = vec![1, 1];
        labels.extend([0; 10]);
        let ds = numeric(rows, labels);
        let out = smote_balance(&ds, 1, 9).unwrap();
        assert_eq!(out.class_counts(), ClassCounts { normal: 10, attack: 10 });
        for r in ds.n_rows()..out.n_rows() {
            let (x, y) = (out.cell(r, 0).unwrap(), out.cell(r, 1).unwrap());
            assert_eq!(x, y);
            assert!((0.0..2.0).contains(&x));
        }
    }

    #[test]
    fn smote_identity_when_balanced_and_errors_on_tiny_minority() {
        let ds = numeric(vec![vec![Some(0.0)], vec![Some(1.0)]], vec![0, 1]);
        assert_eq!(smote_balance(&ds, 5, 1).unwrap(), ds);
        let ds = numeric(vec![vec![Some(0.0)], vec![Some(1.0)], vec![Some(2.0)]], vec![0, 0, 1]);
        assert!(matches!(smote_balance(&ds, 5, 1), Err(Error::InsufficientMinority { .. })));
    }

    #[test]
    fn smote_count_arithmetic() {
        let rows: Vec<Vec<Option<f64>>> = (0..120).map(|i| vec![Some(i as f64)]).collect();
        let labels: Vec<u8> = (0..120).map(|i| u8::from(i < 20)).collect();
        let out = smote_balance(&numeric(rows, labels), 5, 4).unwrap();
        assert_eq!(out.n_rows(), 200);
        assert_eq!(out.class_counts(), ClassCounts { normal: 100, attack: 100 });
    }

    #[test]
    fn attack_ratio_undersamples_normal() {
        let rows: Vec<Vec<Option<f64>>> = (0..1100).map(|i| vec![Some(i as f64)]).collect();
        let labels: Vec<u8> = (0..1100).map(|i| u8::from(i >= 1000)).collect();
        let ds = numeric(rows, labels);
        let out = resample_to_attack_ratio(&ds, 0.2, 1).unwrap();
        assert_eq!(out.class_counts(), ClassCounts { normal: 400, attack: 100 });
    }

    #[test]
    fn attack_ratio_identity_cases() {
        let rows: Vec<Vec<Option<f64>>> = (0..200).map(|i| vec![Some(i as f64)]).collect();
        let labels: Vec<u8> = (0..200).map(|i| u8::from(i >= 100)).collect();
        let ds = numeric(rows, labels);
        assert_eq!(resample_to_attack_ratio(&ds, 0.5, 1).unwrap(), ds);
        let single = numeric(vec![vec![Some(1.0)], vec![Some(2.0)]], vec![0, 0]);
        assert!(matches!(resample_to_attack_ratio(&single, 0.5, 1), Err(Error::Resample(_))));
    }

    #[test]
    fn attack_ratio_falls_back_to_smote() {
        // One normal row and 3 attack rows at eta = 0.1 would need 0.33 attack rows.
        let rows: Vec<Vec<Option<f64>>> = (0..4).map(|i| vec![Some(i as f64)]).collect();
        let ds = numeric(rows, vec![0, 1, 1, 1]);
        assert!(matches!(resample_to_attack_ratio(&ds, 0.1, 1), Err(Error::InsufficientMinority { .. })));
        let rows: Vec<Vec<Option<f64>>> = (0..6).map(|i| vec![Some(i as f64)]).collect();
        let ds = numeric(rows, vec![0, 0, 1, 1, 1, 1]);
        let out = resample_to_attack_ratio(&ds, 0.1, 1).unwrap();
        assert_eq!(out.class_counts(), ClassCounts { normal: 36, attack: 4 });
    }
}
