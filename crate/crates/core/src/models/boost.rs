use serde::{Deserialize, Serialize};

use super::tree::{check_mask, gain_tolerance, midpoint, Node};
use super::Hyperparameters;
use crate::error::{Error, Result};
use crate::flowdata::Samples;
use crate::num::Real;
use crate::selector::FeatureMask;

/// Regression tree; leaves hold additive margin weights.
pub type RegressionTree<T> = Node<T, T>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostOptions {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub reg_lambda: f64,
    pub gamma: f64,
}

impl BoostOptions {
    pub fn from_hyperparameters(hp: &Hyperparameters) -> Self {
        Self {
            n_rounds: hp.gbt_n_rounds,
            max_depth: hp.gbt_max_depth,
            learning_rate: hp.gbt_learning_rate,
            reg_lambda: hp.gbt_reg_lambda,
            gamma: 0.0,
        }
    }
}

/// Logistic-loss boosted trees grown with second-order split gains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoostedModel<T> {
    /// Log-odds of the training positive rate.
    pub base_score: T,
    pub trees: Vec<RegressionTree<T>>,
    pub learning_rate: T,
    pub reg_lambda: T,
    pub gamma: T,
}

#[inline]
pub fn sigmoid<T: Real>(m: T) -> T {
    if m >= T::zero() {
        T::one() / (T::one() + (-m).exp())
    } else {
        let e = m.exp();
        e / (T::one() + e)
    }
}

/// Mean logistic loss of margins against labels.
pub fn log_loss<T: Real>(margins: &[T], labels: &[u8]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(m, &y)| {
            let m = m.as_f64();
            // log(1 + e^m) - y·m, computed stably.
            let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
            softplus - f64::from(y) * m
        })
        .sum();
    total / margins.len().max(1) as f64
}

impl<T: Real> BoostedModel<T> {
    pub fn margin(&self, row: &[T]) -> T {
        self.base_score
            + self.learning_rate * self.trees.iter().map(|t| *t.leaf_for(row)).sum::<T>()
    }

    /// `[P(normal), P(attack)]`.
    pub fn predict_proba(&self, row: &[T]) -> Vec<T> {
        let p = sigmoid(self.margin(row));
        vec![T::one() - p, p]
    }

    pub fn predict(&self, row: &[T]) -> usize {
        super::argmax(&self.predict_proba(row))
    }
}

struct RegTreeLearner<'a, T> {
    samples: &'a Samples<T>,
    features: Vec<usize>,
    max_depth: usize,
    lambda: T,
    gamma: T,
}

impl<T: Real> RegTreeLearner<'_, T> {
    fn score(&self, g: T, h: T) -> T {
        g * g / (h + self.lambda)
    }

    fn leaf_weight(&self, g: T, h: T) -> T {
        let denom = h + self.lambda;
        if denom > T::zero() {
            -g / denom
        } else {
            T::zero()
        }
    }

    fn grow(&self, rows: Vec<usize>, grad: &[T], hess: &[T], depth: usize) -> RegressionTree<T> {
        let g: T = rows.iter().map(|&r| grad[r]).sum();
        let h: T = rows.iter().map(|&r| hess[r]).sum();
        let leaf = Node::Leaf {
            value: self.leaf_weight(g, h),
        };
        if depth >= self.max_depth || rows.len() < 2 {
            return leaf;
        }
        let parent = self.score(g, h);
        let half = T::lit(0.5);
        let mut best: Option<(usize, T, T)> = None;
        let mut order: Vec<(T, usize)> = Vec::with_capacity(rows.len());
        for &f in &self.features {
            order.clear();
            order.extend(rows.iter().map(|&r| (self.samples.value(r, f), r)));
            order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            let (mut gl, mut hl) = (T::zero(), T::zero());
            for i in 0..order.len() - 1 {
                let r = order[i].1;
                gl += grad[r];
                hl += hess[r];
                if order[i].0 >= order[i + 1].0 {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                let gain = half * (self.score(gl, hl) + self.score(gr, hr) - parent) - self.gamma;
                if best.is_none_or(|(_, _, b)| gain > b) {
                    best = Some((f, midpoint(order[i].0, order[i + 1].0), gain));
                }
            }
        }
        match best {
            Some((feature, threshold, gain)) if gain > gain_tolerance::<T>() => {
                let (left, right): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&r| self.samples.value(r, feature) <= threshold);
                Node::Split {
                    feature,
                    threshold,
                    gain,
                    left: Box::new(self.grow(left, grad, hess, depth + 1)),
                    right: Box::new(self.grow(right, grad, hess, depth + 1)),
                }
            }
            _ => leaf,
        }
    }
}

pub fn fit_gbt<T: Real>(samples: &Samples<T>, mask: &FeatureMask, hp: &Hyperparameters) -> Result<BoostedModel<T>> {
    fit_gbt_with(samples, mask, &BoostOptions::from_hyperparameters(hp)).map(|(m, _)| m)
}

/// Fits the booster and returns the training log-loss after each round.
pub fn fit_gbt_with<T: Real>(
    samples: &Samples<T>,
    mask: &FeatureMask,
    opts: &BoostOptions,
) -> Result<(BoostedModel<T>, Vec<f64>)> {
    check_mask(samples, mask)?;
    if opts.n_rounds == 0 {
        return Err(Error::Parameter("gbt needs at least one round".into()));
    }
    if !(opts.learning_rate > 0.0 && opts.learning_rate <= 1.0) {
        return Err(Error::Parameter(format!("learning_rate {} outside (0, 1]", opts.learning_rate)));
    }
    if !(opts.reg_lambda >= 0.0) {
        return Err(Error::Parameter("reg_lambda must be non-negative".into()));
    }
    let counts = samples.class_counts();
    if counts.normal == 0 || counts.attack == 0 {
        return Err(Error::DegenerateLabels("boosting needs both classes".into()));
    }
    let prior = counts.attack as f64 / counts.total() as f64;
    let base_score = T::lit((prior / (1.0 - prior)).ln());
    let lr = T::lit(opts.learning_rate);
    let learner = RegTreeLearner {
        samples,
        features: mask.selected(),
        max_depth: opts.max_depth,
        lambda: T::lit(opts.reg_lambda),
        gamma: T::lit(opts.gamma),
    };
    let labels = samples.labels();
    let n = samples.n_rows();
    let mut margins = vec![base_score; n];
    let mut trees = Vec::with_capacity(opts.n_rounds);
    let mut losses = Vec::with_capacity(opts.n_rounds);
    let mut grad = vec![T::zero(); n];
    let mut hess = vec![T::zero(); n];
    for _ in 0..opts.n_rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - T::from_count(labels[i] as usize);
            hess[i] = p * (T::one() - p);
        }
        let tree = learner.grow((0..n).collect(), &grad, &hess, 0);
        for (i, m) in margins.iter_mut().enumerate() {
            *m += lr * *tree.leaf_for(samples.row(i));
        }
        trees.push(tree);
        losses.push(log_loss(&margins, labels));
    }
    Ok((
        BoostedModel {
            base_score,
            trees,
            learning_rate: lr,
            reg_lambda: T::lit(opts.reg_lambda),
            gamma: T::lit(opts.gamma),
        },
        losses,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_and_hessian_at_half() {
        let p = sigmoid(0.0_f64);
        assert_eq!(p - 1.0, -0.5);
        assert_eq!(p * (1.0 - p), 0.25);
    }

    #[test]
    fn single_leaf_moves_toward_labels() {
        // 3 positives, 1 negative, base margin from the prior -> residual sum is 0.
        // Shift the prior by giving a depth-0 tree lambda = 0 on unbalanced data.
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let s = Samples::from_rows(&rows, vec![1, 1, 1, 0]).unwrap();
        let mask = FeatureMask::new(vec![true]).unwrap();
        let opts = BoostOptions {
            n_rounds: 1,
            max_depth: 0,
            learning_rate: 0.3,
            reg_lambda: 0.0,
            gamma: 0.0,
        };
        let (model, _) = fit_gbt_with(&s, &mask, &opts).unwrap();
        let p = sigmoid(model.base_score);
        let residual: f64 = s.labels().iter().map(|&y| f64::from(y) - p).sum();
        let w = *model.trees[0].leaf_for(&[0.0]);
        // At the prior the residuals cancel, so the leaf weight is ~0 with matching sign.
        assert!(residual.abs() < 1e-12);
        assert!(w.abs() < 1e-9);
    }

    #[test]
    fn leaf_sign_matches_residual_sign() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let s = Samples::from_rows(&rows, vec![1, 1, 1, 1, 0, 0]).unwrap();
        let mask = FeatureMask::new(vec![true]).unwrap();
        let opts = BoostOptions {
            n_rounds: 2,
            max_depth: 0,
            learning_rate: 0.5,
            reg_lambda: 0.0,
            gamma: 0.0,
        };
        let (model, _) = fit_gbt_with(&s, &mask, &opts).unwrap();
        // Round 2 starts from the prior margin plus round 1's zero step.
        let m = model.base_score + 0.5 * model.trees[0].leaf_for(&[0.0]);
        let p = sigmoid(m);
        let residual: f64 = s.labels().iter().map(|&y| f64::from(y) - p).sum();
        let w = *model.trees[1].leaf_for(&[0.0]);
        assert!(residual.abs() < 1e-9 || residual.signum() == w.signum());
    }

    #[test]
    fn zero_rounds_and_single_class_rejected() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let mask = FeatureMask::new(vec![true]).unwrap();
        let s = Samples::from_rows(&rows, vec![0, 1, 0, 1]).unwrap();
        let hp = Hyperparameters {
            gbt_n_rounds: 0,
            ..Default::default()
        };
        assert!(matches!(fit_gbt(&s, &mask, &hp), Err(Error::Parameter(_))));
        let s = Samples::from_rows(&rows, vec![1; 4]).unwrap();
        assert!(matches!(
            fit_gbt(&s, &mask, &Hyperparameters::default()),
            Err(Error::DegenerateLabels(_))
        ));
    }

    #[test]
    fn separable_loss_is_non_increasing() {
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|i| vec![(i % 10) as f64, (i / 10) as f64])
            .collect();
        let labels = rows.iter().map(|r| u8::from(r[0] + r[1] > 8.0)).collect();
        let s = Samples::from_rows(&rows, labels).unwrap();
        let mask = FeatureMask::new(vec![true, true]).unwrap();
        let opts = BoostOptions {
            n_rounds: 30,
            max_depth: 3,
            learning_rate: 0.3,
            reg_lambda: 1.0,
            gamma: 0.0,
        };
        let (model, losses) = fit_gbt_with(&s, &mask, &opts).unwrap();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
        assert!(losses.last().unwrap() < &0.1);
        for r in 0..s.n_rows() {
            let p = model.predict_proba(s.row(r))[1];
            assert!(p > 0.0 && p < 1.0);
        }
    }
}
