//! Robust two-sample feature scoring.
//!
//! For one column, the class-conditional ECDFs are compared on the grid of
//! distinct pooled values. Instead of the KS supremum of the difference curve
//! `D = F_normal - F_attack`, the score is the median absolute deviation of `D`
//! around its median, scaled by `lambda`. A single extreme gap therefore moves
//! the score far less than it moves the classic statistic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::{Samples, ATTACK, NORMAL};
use crate::num::{median, total_cmp, Real};
use crate::selector::FeatureMask;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MadKsConfig {
    pub lambda: f64,
    pub min_samples_per_class: usize,
}

impl Default for MadKsConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            min_samples_per_class: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub column_index: usize,
    pub score: f64,
}

/// ECDF of `sorted` evaluated at each point of `grid` (both ascending).
fn ecdf_on_grid<T: Real>(sorted: &[T], grid: &[T]) -> Vec<T> {
    let n = T::from_count(sorted.len());
    let mut k = 0usize;
    grid.iter()
        .map(|g| {
            while k < sorted.len() && sorted[k] <= *g {
                k += 1;
            }
            T::from_count(k) / n
        })
        .collect()
}

/// `lambda · MAD(D)` where `D` is the ECDF difference curve of the two samples.
pub fn mad_ks_score<T: Real>(sample_a: &[T], sample_b: &[T], cfg: &MadKsConfig) -> Result<T> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::InsufficientData("both samples must be non-empty".into()));
    }
    if !(cfg.lambda >= 0.0) {
        return Err(Error::Parameter(format!("lambda {} must be non-negative", cfg.lambda)));
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(total_cmp);
    b.sort_by(total_cmp);
    let mut grid: Vec<T> = a.iter().chain(&b).copied().collect();
    grid.sort_by(total_cmp);
    grid.dedup();

    let fa = ecdf_on_grid(&a, &grid);
    let fb = ecdf_on_grid(&b, &grid);
    let d: Vec<T> = fa.iter().zip(&fb).map(|(x, y)| *x - *y).collect();
    let m = median(&d).expect("grid is non-empty");
    let dev: Vec<T> = d.iter().map(|v| (*v - m).abs()).collect();
    let mad = median(&dev).expect("grid is non-empty");
    Ok(T::lit(cfg.lambda) * mad)
}

/// Scores every feature column (normal sample vs attack sample), sorted by
/// descending score with ties in column order.
pub fn score_features<T: Real>(samples: &Samples<T>, cfg: &MadKsConfig) -> Result<Vec<FeatureScore>> {
    let counts = samples.class_counts();
    let min = cfg.min_samples_per_class.max(1);
    if counts.normal < min || counts.attack < min {
        return Err(Error::InsufficientData(format!(
            "need {min} rows per class, have {} normal / {} attack",
            counts.normal, counts.attack
        )));
    }
    let labels = samples.labels();
    let mut scores: Vec<FeatureScore> = (0..samples.n_features())
        .into_par_iter()
        .map(|j| {
            let col = samples.column(j);
            let pick = |class: u8| -> Vec<T> {
                col.iter()
                    .zip(labels)
                    .filter(|(_, &l)| l == class)
                    .map(|(v, _)| *v)
                    .collect()
            };
            let s = mad_ks_score(&pick(NORMAL), &pick(ATTACK), cfg)?;
            Ok(FeatureScore {
                column_index: j,
                score: s.as_f64(),
            })
        })
        .collect::<Result<_>>()?;
    scores.sort_by(|x, y| {
        y.score
            .partial_cmp(&x.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.column_index.cmp(&y.column_index))
    });
    Ok(scores)
}

/// Mask of the `keep_top` best-scoring columns.
pub fn prefilter(scores: &[FeatureScore], keep_top: usize) -> Result<FeatureMask> {
    let d = scores.len();
    if keep_top == 0 || keep_top > d {
        return Err(Error::Parameter(format!("keep_top {keep_top} outside 1..={d}")));
    }
    let mut bits = vec![false; d];
    for s in scores.iter().take(keep_top) {
        if s.column_index >= d {
            return Err(Error::Shape(format!("score for column {} of {d}", s.column_index)));
        }
        bits[s.column_index] = true;
    }
    FeatureMask::new(bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> MadKsConfig {
        MadKsConfig::default()
    }

    #[test]
    fn identical_samples_score_zero() {
        let a = [1.0, 5.0, 2.0, 2.0];
        assert_eq!(mad_ks_score(&a, &a, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn zero_lambda_scores_zero() {
        let c = MadKsConfig { lambda: 0.0, ..cfg() };
        assert_eq!(mad_ks_score(&[1.0, 2.0], &[7.0, 9.0], &c).unwrap(), 0.0);
    }

    #[test]
    fn three_vs_three_disjoint() {
        let s: f64 = mad_ks_score(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0], &cfg()).unwrap();
        assert!((s - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(matches!(
            mad_ks_score::<f64>(&[], &[1.0], &cfg()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn tied_columns_keep_index_order() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64, 0.0, i as f64])
            .collect();
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let s = Samples::from_rows(&rows, labels).unwrap();
        let scores = score_features(&s, &cfg()).unwrap();
        assert_eq!(scores[0].column_index, 0);
        assert_eq!(scores[1].column_index, 2);
        assert_eq!(scores[0].score, scores[1].score);
        assert_eq!(scores[2].column_index, 1);
        assert_eq!(scores[2].score, 0.0);
    }

    #[test]
    fn too_few_rows_per_class() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let s = Samples::from_rows(&rows, vec![0, 0, 0, 0, 1, 1]).unwrap();
        assert!(matches!(score_features(&s, &cfg()), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn prefilter_bounds() {
        let scores = vec![
            FeatureScore { column_index: 2, score: 0.5 },
            FeatureScore { column_index: 0, score: 0.2 },
            FeatureScore { column_index: 1, score: 0.1 },
        ];
        assert_eq!(prefilter(&scores, 1).unwrap().bits(), &[false, false, true]);
        assert_eq!(prefilter(&scores, 3).unwrap().bits(), &[true, true, true]);
        assert!(matches!(prefilter(&scores, 0), Err(Error::Parameter(_))));
        assert!(matches!(prefilter(&scores, 4), Err(Error::Parameter(_))));
    }
}
