//! Tree classifiers and the voting ensemble built from them.

mod boost;
mod ensemble;
mod forest;
mod tree;
mod voting;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

pub use boost::{fit_gbt, fit_gbt_with, log_loss, sigmoid, BoostOptions, BoostedModel, RegressionTree};
pub use ensemble::{predict_ensemble, BasePredictions, Ensemble};
pub use forest::{fit_random_forest, fit_random_forest_with, ForestModel, ForestOptions};
pub use tree::{fit_decision_tree, Node, TreeNode};
pub use voting::{argmax, hard_vote, soft_vote};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voting {
    Hard,
    #[default]
    Soft,
}

impl std::str::FromStr for Voting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" => Ok(Voting::Hard),
            "soft" => Ok(Voting::Soft),
            other => Err(Error::Parameter(format!("unknown voting mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Voting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Voting::Hard => "hard",
            Voting::Soft => "soft",
        })
    }
}

/// Ensemble knobs; the space the tuner searches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub dt_max_depth: usize,
    pub rf_n_trees: usize,
    pub rf_max_depth: usize,
    pub gbt_n_rounds: usize,
    pub gbt_max_depth: usize,
    pub gbt_learning_rate: f64,
    pub gbt_reg_lambda: f64,
    pub voting: Voting,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            dt_max_depth: 8,
            rf_n_trees: 50,
            rf_max_depth: 10,
            gbt_n_rounds: 50,
            gbt_max_depth: 4,
            gbt_learning_rate: 0.3,
            gbt_reg_lambda: 1.0,
            voting: Voting::Soft,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("dt_max_depth", self.dt_max_depth),
            ("rf_n_trees", self.rf_n_trees),
            ("rf_max_depth", self.rf_max_depth),
            ("gbt_n_rounds", self.gbt_n_rounds),
            ("gbt_max_depth", self.gbt_max_depth),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Parameter(format!("{name} must be at least 1")));
        }
        if !(self.gbt_learning_rate > 0.0 && self.gbt_learning_rate <= 1.0) {
            return Err(Error::Parameter(format!(
                "gbt_learning_rate {} must lie in (0, 1]",
                self.gbt_learning_rate
            )));
        }
        if !(self.gbt_reg_lambda >= 0.0) {
            return Err(Error::Parameter("gbt_reg_lambda must be non-negative".into()));
        }
        Ok(())
    }
}

/// Shannon entropy in bits, with `0·log 0 = 0`.
pub fn entropy<T: Real>(p: &[T]) -> Result<T> {
    if let Some(bad) = p.iter().find(|v| **v < T::zero() || v.is_nan()) {
        return Err(Error::Domain(format!("probability component {bad} is negative")));
    }
    let sum: T = p.iter().copied().sum();
    if (sum - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(8.0)) {
        return Err(Error::Domain(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(entropy_unchecked(p))
}

#[inline]
pub(crate) fn entropy_unchecked<T: Real>(p: &[T]) -> T {
    let h = p
        .iter()
        .filter(|v| **v > T::zero())
        .map(|v| -*v * v.log2())
        .sum::<T>();
    // -0.0 for pure nodes.
    h.max(T::zero())
}
