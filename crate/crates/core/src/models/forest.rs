use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{check_mask, ClassTreeLearner, TreeNode};
use super::{argmax, hard_vote, Hyperparameters};
use crate::error::{Error, Result};
use crate::flowdata::Samples;
use crate::num::Real;
use crate::rng::{self, tag};
use crate::selector::FeatureMask;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestOptions {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features considered per split; `None` means `ceil(sqrt(d))` of the masked columns.
    pub feature_subsample: Option<usize>,
    pub bootstrap: bool,
}

impl ForestOptions {
    pub fn from_hyperparameters(hp: &Hyperparameters) -> Self {
        Self {
            n_trees: hp.rf_n_trees,
            max_depth: hp.rf_max_depth,
            feature_subsample: None,
            bootstrap: true,
        }
    }
}

/// Bagged classification trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ForestModel<T> {
    pub trees: Vec<TreeNode<T>>,
    pub feature_subsample: usize,
    pub bootstrap: bool,
}

impl<T: Real> ForestModel<T> {
    /// Majority vote of the trees, ties to the lower class.
    pub fn predict(&self, row: &[T]) -> usize {
        let votes: Vec<usize> = self.trees.iter().map(|t| t.predict(row)).collect();
        hard_vote(&votes).unwrap_or(0)
    }

    /// Mean of the trees' leaf distributions.
    pub fn predict_proba(&self, row: &[T]) -> Vec<T> {
        let mut acc = vec![T::zero(); 2];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.predict_proba(row)) {
                *a += *p;
            }
        }
        let n = T::from_count(self.trees.len());
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    pub fn predict_soft_label(&self, row: &[T]) -> usize {
        argmax(&self.predict_proba(row))
    }
}

pub fn fit_random_forest<T: Real>(
    samples: &Samples<T>,
    mask: &FeatureMask,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<ForestModel<T>> {
    fit_random_forest_with(samples, mask, &ForestOptions::from_hyperparameters(hp), seed)
}

pub fn fit_random_forest_with<T: Real>(
    samples: &Samples<T>,
    mask: &FeatureMask,
    opts: &ForestOptions,
    seed: u64,
) -> Result<ForestModel<T>> {
    check_mask(samples, mask)?;
    if opts.n_trees == 0 {
        return Err(Error::Parameter("a forest needs at least one tree".into()));
    }
    let features = mask.selected();
    let d = features.len();
    let m = opts
        .feature_subsample
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let n = samples.n_rows();
    let trees = (0..opts.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut stream = rng::stream(seed, &[tag::FOREST, t as u64]);
            let rows: Vec<usize> = if opts.bootstrap {
                (0..n).map(|_| stream.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let learner = ClassTreeLearner {
                samples,
                features: features.clone(),
                max_depth: opts.max_depth,
                max_features: Some(m),
            };
            learner.grow(rows, 0, &mut Some(&mut stream))
        })
        .collect();
    Ok(ForestModel {
        trees,
        feature_subsample: m,
        bootstrap: opts.bootstrap,
    })
}
