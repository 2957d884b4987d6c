use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::entropy_unchecked;
use crate::error::{Error, Result};
use crate::flowdata::Samples;
use crate::num::Real;
use crate::rng::Stream;
use crate::selector::FeatureMask;

/// Binary tree. Rows with `value <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Real, L: Serialize + serde::de::DeserializeOwned")]
pub enum Node<T, L> {
    Split {
        feature: usize,
        threshold: T,
        /// Criterion improvement credited to this split.
        gain: T,
        left: Box<Node<T, L>>,
        right: Box<Node<T, L>>,
    },
    Leaf {
        value: L,
    },
}

/// Classification tree; leaves hold class distributions.
pub type TreeNode<T> = Node<T, Vec<T>>;

impl<T: Real, L> Node<T, L> {
    pub fn leaf_for(&self, row: &[T]) -> &L {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Gains of every split, pre-order.
    pub fn split_gains(&self) -> Vec<T> {
        let mut out = Vec::new();
        self.collect_gains(&mut out);
        out
    }

    fn collect_gains(&self, out: &mut Vec<T>) {
        if let Node::Split { gain, left, right, .. } = self {
            out.push(*gain);
            left.collect_gains(out);
            right.collect_gains(out);
        }
    }

    /// Largest feature index used by any split.
    pub fn max_feature(&self) -> Option<usize> {
        match self {
            Node::Leaf { .. } => None,
            Node::Split {
                feature, left, right, ..
            } => Some(*feature).max(left.max_feature()).max(right.max_feature()),
        }
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&L> {
        match self {
            Node::Leaf { value } => vec![value],
            Node::Split { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }
}

impl<T: Real> TreeNode<T> {
    pub fn predict_proba(&self, row: &[T]) -> &[T] {
        self.leaf_for(row)
    }

    pub fn predict(&self, row: &[T]) -> usize {
        super::argmax(self.predict_proba(row))
    }
}

pub(crate) fn check_mask<T: Real>(samples: &Samples<T>, mask: &FeatureMask) -> Result<()> {
    if mask.len() != samples.n_features() {
        return Err(Error::Shape(format!(
            "mask has {} bits for {} features",
            mask.len(),
            samples.n_features()
        )));
    }
    if samples.n_rows() == 0 {
        return Err(Error::EmptyInput("no training rows".into()));
    }
    Ok(())
}

/// Greedy information-gain tree over the masked columns.
pub fn fit_decision_tree<T: Real>(samples: &Samples<T>, mask: &FeatureMask, max_depth: usize) -> Result<TreeNode<T>> {
    check_mask(samples, mask)?;
    let rows: Vec<usize> = (0..samples.n_rows()).collect();
    let learner = ClassTreeLearner {
        samples,
        features: mask.selected(),
        max_depth,
        max_features: None,
    };
    Ok(learner.grow(rows, 0, &mut None))
}

#[inline]
pub(crate) fn midpoint<T: Real>(a: T, b: T) -> T {
    let m = a + (b - a) / T::lit(2.0);
    if m >= b {
        a
    } else {
        m
    }
}

pub(crate) fn gain_tolerance<T: Real>() -> T {
    T::epsilon() * T::lit(64.0)
}

struct Candidate<T> {
    feature: usize,
    threshold: T,
    gain: T,
}

pub(crate) struct ClassTreeLearner<'a, T> {
    pub samples: &'a Samples<T>,
    pub features: Vec<usize>,
    pub max_depth: usize,
    /// Per-split feature subsample size; `None` uses every feature.
    pub max_features: Option<usize>,
}

fn binary_entropy<T: Real>(c0: usize, c1: usize) -> T {
    let n = c0 + c1;
    if n == 0 {
        return T::zero();
    }
    let n = T::from_count(n);
    entropy_unchecked(&[T::from_count(c0) / n, T::from_count(c1) / n])
}

impl<T: Real> ClassTreeLearner<'_, T> {
    fn counts(&self, rows: &[usize]) -> (usize, usize) {
        let labels = self.samples.labels();
        let c1 = rows.iter().filter(|&&r| labels[r] == 1).count();
        (rows.len() - c1, c1)
    }

    fn leaf(&self, rows: &[usize]) -> TreeNode<T> {
        let (c0, c1) = self.counts(rows);
        let n = T::from_count(rows.len().max(1));
        Node::Leaf {
            value: vec![T::from_count(c0) / n, T::from_count(c1) / n],
        }
    }

    fn candidate_features(&self, rng: &mut Option<&mut Stream>) -> Vec<usize> {
        match (self.max_features, rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < self.features.len() => {
                let mut picked: Vec<usize> = index::sample(rng, self.features.len(), m)
                    .into_iter()
                    .map(|i| self.features[i])
                    .collect();
                picked.sort_unstable();
                picked
            }
            _ => self.features.clone(),
        }
    }

    /// Best immediate split; earlier features and lower thresholds win ties.
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<Candidate<T>> {
        let labels = self.samples.labels();
        let (p0, p1) = self.counts(rows);
        let parent = binary_entropy::<T>(p0, p1);
        let n = rows.len();
        let nf = T::from_count(n);
        let mut best: Option<Candidate<T>> = None;
        let mut pairs: Vec<(T, u8)> = Vec::with_capacity(n);
        for &f in features {
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (self.samples.value(r, f), labels[r])));
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            let (mut l0, mut l1) = (0usize, 0usize);
            for i in 0..n - 1 {
                if pairs[i].1 == 1 {
                    l1 += 1;
                } else {
                    l0 += 1;
                }
                if pairs[i].0 >= pairs[i + 1].0 {
                    continue;
                }
                let nl = T::from_count(i + 1);
                let nr = T::from_count(n - i - 1);
                let child = nl / nf * binary_entropy::<T>(l0, l1) + nr / nf * binary_entropy::<T>(p0 - l0, p1 - l1);
                let gain = parent - child;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        feature: f,
                        threshold: midpoint(pairs[i].0, pairs[i + 1].0),
                        gain,
                    });
                }
            }
        }
        best
    }

    fn partition(&self, rows: &[usize], feature: usize, threshold: T) -> (Vec<usize>, Vec<usize>) {
        rows.iter().partition(|&&r| self.samples.value(r, feature) <= threshold)
    }

    /// Two-level lookahead, used only when no single split has positive gain
    /// (XOR-like nodes). Credits a split with its own gain plus the weighted
    /// best gains of its children.
    fn lookahead_split(&self, rows: &[usize], features: &[usize]) -> Option<Candidate<T>> {
        let nf = T::from_count(rows.len());
        let (p0, p1) = self.counts(rows);
        let mut best: Option<Candidate<T>> = None;
        for &f in features {
            let mut vals: Vec<T> = rows.iter().map(|&r| self.samples.value(r, f)).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            vals.dedup();
            for w in vals.windows(2) {
                let threshold = midpoint(w[0], w[1]);
                let (left, right) = self.partition(rows, f, threshold);
                let (l0, l1) = self.counts(&left);
                let wl = T::from_count(left.len()) / nf;
                let wr = T::from_count(right.len()) / nf;
                let own = binary_entropy::<T>(p0, p1)
                    - wl * binary_entropy::<T>(l0, l1)
                    - wr * binary_entropy::<T>(p0 - l0, p1 - l1);
                let child_gain = |part: &[usize]| {
                    if part.len() < 2 {
                        return T::zero();
                    }
                    self.best_split(part, features).map_or(T::zero(), |c| c.gain.max(T::zero()))
                };
                let total = own + wl * child_gain(&left) + wr * child_gain(&right);
                if best.as_ref().is_none_or(|b| total > b.gain) {
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        gain: total,
                    });
                }
            }
        }
        best
    }

    pub fn grow(&self, rows: Vec<usize>, depth: usize, rng: &mut Option<&mut Stream>) -> TreeNode<T> {
        let (c0, c1) = self.counts(&rows);
        if depth >= self.max_depth || c0 == 0 || c1 == 0 || rows.len() < 2 {
            return self.leaf(&rows);
        }
        let features = self.candidate_features(rng);
        let tol = gain_tolerance::<T>();
        let mut chosen = self.best_split(&rows, &features).filter(|c| c.gain > tol);
        if chosen.is_none() && depth + 2 <= self.max_depth {
            chosen = self.lookahead_split(&rows, &features).filter(|c| c.gain > tol);
        }
        let Some(split) = chosen else {
            return self.leaf(&rows);
        };
        let (left, right) = self.partition(&rows, split.feature, split.threshold);
        let left = self.grow(left, depth + 1, rng);
        let right = self.grow(right, depth + 1, rng);
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            gain: split.gain,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}
