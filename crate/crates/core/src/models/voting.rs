use crate::error::{Error, Result};
use crate::num::Real;

/// Index of the largest component; ties go to the lowest index.
pub fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Most frequent label, ties toward the lowest class index.
pub fn hard_vote(votes: &[usize]) -> Result<usize> {
    let top = votes
        .iter()
        .max()
        .ok_or_else(|| Error::EmptyInput("no votes".into()))?;
    let mut counts = vec![0usize; top + 1];
    for &v in votes {
        counts[v] += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    Ok(best)
}

/// Component-wise mean of the probability vectors and its argmax.
pub fn soft_vote<T: Real>(probs: &[Vec<T>]) -> Result<(usize, Vec<T>)> {
    let first = probs
        .first()
        .ok_or_else(|| Error::EmptyInput("no probability vectors".into()))?;
    let k = first.len();
    if let Some(bad) = probs.iter().find(|p| p.len() != k) {
        return Err(Error::Shape(format!(
            "probability vectors of length {k} and {}",
            bad.len()
        )));
    }
    let n = T::from_count(probs.len());
    let mean: Vec<T> = (0..k)
        .map(|c| probs.iter().map(|p| p[c]).sum::<T>() / n)
        .collect();
    Ok((argmax(&mean), mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_vote_examples() {
        assert_eq!(hard_vote(&[1, 1, 0]).unwrap(), 1);
        assert_eq!(hard_vote(&[0, 1]).unwrap(), 0);
        assert_eq!(hard_vote(&[1, 1, 1]).unwrap(), 1);
        assert_eq!(hard_vote(&[2, 1, 2, 1]).unwrap(), 1);
        assert!(hard_vote(&[]).is_err());
    }

    #[test]
    fn soft_vote_examples() {
        let (l, m) = soft_vote::<f64>(&[vec![0.6, 0.4], vec![0.3, 0.7], vec![0.4, 0.6]]).unwrap();
        assert_eq!(l, 1);
        assert!((m[0] - 1.3 / 3.0).abs() < 1e-12 && (m[1] - 1.7 / 3.0).abs() < 1e-12);
        let (l, m) = soft_vote::<f64>(&[vec![1.0, 0.0], vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(l, 0);
        assert!((m[0] - 2.0 / 3.0).abs() < 1e-12);
        let (l, m) = soft_vote(&vec![vec![0.2_f32, 0.8]; 3]).unwrap();
        assert_eq!((l, m), (1, vec![0.2, 0.8]));
    }

    #[test]
    fn soft_vote_shape_error() {
        assert!(matches!(
            soft_vote(&[vec![0.5, 0.5], vec![1.0]]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn argmax_tie_goes_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.3, 0.3]), 1);
    }
}
