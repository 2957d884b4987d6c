use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Column inclusion vector with at least one column set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<bool>", into = "Vec<bool>")]
pub struct FeatureMask {
    bits: Vec<bool>,
}

impl FeatureMask {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if !bits.iter().any(|&b| b) {
            return Err(Error::InfeasibleMask(format!(
                "no column selected out of {}",
                bits.len()
            )));
        }
        Ok(Self { bits })
    }

    pub fn all(len: usize) -> Result<Self> {
        Self::new(vec![true; len])
    }

    /// Thresholds a continuous position at 0.5. An all-zero result is repaired
    /// by setting the bit of the largest coordinate (lowest index on ties).
    pub fn from_position<T: Real>(position: &[T]) -> Result<Self> {
        if position.is_empty() {
            return Err(Error::InfeasibleMask("empty position".into()));
        }
        let half = T::lit(0.5);
        let mut bits: Vec<bool> = position.iter().map(|&x| x >= half).collect();
        if !bits.iter().any(|&b| b) {
            bits[crate::models::argmax(position)] = true;
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// |S|
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn selected(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

impl TryFrom<Vec<bool>> for FeatureMask {
    type Error = Error;

    fn try_from(bits: Vec<bool>) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<FeatureMask> for Vec<bool> {
    fn from(m: FeatureMask) -> Self {
        m.bits
    }
}
