use serde::{Deserialize, Serialize};

use super::{
    fit_decision_tree, fit_gbt, fit_random_forest, hard_vote, soft_vote, BoostedModel, ForestModel,
    Hyperparameters, TreeNode, Voting,
};
use crate::error::{Error, Result};
use crate::flowdata::Samples;
use crate::num::Real;
use crate::selector::FeatureMask;

/// Per-model outputs for one row, in DT, RF, GBT order.
#[derive(Clone, Debug, PartialEq)]
pub struct BasePredictions<T> {
    pub labels: [usize; 3],
    pub probas: [Vec<T>; 3],
}

impl<T: Real> BasePredictions<T> {
    pub fn combine(&self, voting: Voting) -> Result<(usize, Vec<T>)> {
        match voting {
            Voting::Soft => soft_vote(&self.probas),
            Voting::Hard => {
                let label = hard_vote(&self.labels)?;
                let ones = self.labels.iter().filter(|&&l| l == 1).count();
                let share = T::from_count(ones) / T::lit(3.0);
                Ok((label, vec![T::one() - share, share]))
            }
        }
    }
}

/// Decision tree, random forest and boosted trees trained on one feature mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Ensemble<T> {
    pub mask: FeatureMask,
    pub dt: TreeNode<T>,
    pub rf: ForestModel<T>,
    pub gbt: BoostedModel<T>,
    pub hyperparameters: Hyperparameters,
}

impl<T: Real> Ensemble<T> {
    pub fn fit(samples: &Samples<T>, mask: &FeatureMask, hp: &Hyperparameters, seed: u64) -> Result<Self> {
        hp.validate()?;
        let ((dt, rf), gbt) = rayon::join(
            || {
                rayon::join(
                    || fit_decision_tree(samples, mask, hp.dt_max_depth),
                    || fit_random_forest(samples, mask, hp, seed),
                )
            },
            || fit_gbt(samples, mask, hp),
        );
        Ok(Self {
            mask: mask.clone(),
            dt: dt?,
            rf: rf?,
            gbt: gbt?,
            hyperparameters: hp.clone(),
        })
    }

    fn check_row(&self, row: &[T]) -> Result<()> {
        if row.len() != self.mask.len() {
            return Err(Error::Shape(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.mask.len()
            )));
        }
        Ok(())
    }

    pub fn base_predictions(&self, row: &[T]) -> Result<BasePredictions<T>> {
        self.check_row(row)?;
        Ok(base_predictions(&self.dt, &self.rf, &self.gbt, row))
    }

    pub fn predict(&self, row: &[T], voting: Voting) -> Result<(usize, Vec<T>)> {
        self.base_predictions(row)?.combine(voting)
    }

    /// Labels for every row of `samples` under `voting`.
    pub fn predict_all(&self, samples: &Samples<T>, voting: Voting) -> Result<Vec<usize>> {
        (0..samples.n_rows())
            .map(|r| self.predict(samples.row(r), voting).map(|(l, _)| l))
            .collect()
    }
}

fn base_predictions<T: Real>(
    dt: &TreeNode<T>,
    rf: &ForestModel<T>,
    gbt: &BoostedModel<T>,
    row: &[T],
) -> BasePredictions<T> {
    let p_dt = dt.predict_proba(row).to_vec();
    let p_rf = rf.predict_proba(row);
    let p_gbt = gbt.predict_proba(row);
    BasePredictions {
        labels: [dt.predict(row), rf.predict(row), gbt.predict(row)],
        probas: [p_dt, p_rf, p_gbt],
    }
}

/// Combines the three base models on one row.
pub fn predict_ensemble<T: Real>(
    dt: &TreeNode<T>,
    rf: &ForestModel<T>,
    gbt: &BoostedModel<T>,
    row: &[T],
    voting: Voting,
) -> Result<(usize, Vec<T>)> {
    let used = dt
        .max_feature()
        .max(rf.trees.iter().filter_map(|t| t.max_feature()).max())
        .max(gbt.trees.iter().filter_map(|t| t.max_feature()).max());
    if let Some(f) = used.filter(|&f| f >= row.len()) {
        return Err(Error::Shape(format!("row has {} features, models use index {f}", row.len())));
    }
    base_predictions(dt, rf, gbt, row).combine(voting)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Samples<f64> {
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|i| vec![(i % 12) as f64, ((i * 7) % 5) as f64])
            .collect();
        let labels = rows.iter().map(|r| u8::from(r[0] >= 6.0)).collect();
        Samples::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn unanimous_bases_agree_under_both_modes() {
        let s = data();
        let mask = FeatureMask::new(vec![true, true]).unwrap();
        let hp = Hyperparameters {
            rf_n_trees: 5,
            gbt_n_rounds: 10,
            ..Default::default()
        };
        let e = Ensemble::fit(&s, &mask, &hp, 3).unwrap();
        for r in 0..s.n_rows() {
            let b = e.base_predictions(s.row(r)).unwrap();
            if b.labels.iter().all(|&l| l == b.labels[0]) {
                assert_eq!(b.combine(Voting::Hard).unwrap().0, b.labels[0]);
                assert_eq!(b.combine(Voting::Soft).unwrap().0, b.labels[0]);
            }
        }
        assert!(matches!(e.predict(&[1.0], Voting::Soft), Err(Error::Shape(_))));
    }

    #[test]
    fn hard_majority_of_bases() {
        let b = BasePredictions {
            labels: [1, 1, 0],
            probas: [vec![0.4, 0.6], vec![0.45, 0.55], vec![0.9, 0.1]],
        };
        assert_eq!(b.combine(Voting::Hard).unwrap().0, 1);
        assert_eq!(b.combine(Voting::Soft).unwrap().0, 0);
    }
}
