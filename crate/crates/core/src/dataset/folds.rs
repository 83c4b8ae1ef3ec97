use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 5;

/// Assignment of whole neurons to cross-validation folds.
///
/// Every reconstruction and sample of a neuron inherits the neuron's fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<u64, usize>,
}

/// Shuffles the (sorted) neuron ids with `seed` and deals them round-robin
/// into `k` folds, so fold sizes differ by at most one.
pub fn split_folds(neuron_ids: &[u64], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let unique: BTreeSet<u64> = neuron_ids.iter().copied().collect();
    if unique.len() != neuron_ids.len() {
        return Err(Error::InvalidArgument("duplicate neuron ids".into()));
    }
    if unique.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} neurons cannot fill {k} folds",
            unique.len()
        )));
    }
    let mut ids: Vec<u64> = unique.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let assignment = ids.into_iter().enumerate().map(|(i, id)| (id, i % k)).collect();
    Ok(FoldSplit { k, seed, assignment })
}

impl FoldSplit {
    pub fn fold_of(&self, neuron_id: u64) -> Option<usize> {
        self.assignment.get(&neuron_id).copied()
    }

    /// Neuron ids per fold, each sorted.
    pub fn folds(&self) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::new(); self.k];
        for (&id, &f) in &self.assignment {
            out[f].push(id);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.folds().iter().map(Vec::len).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let split: FoldSplit = serde_json::from_str(text)?;
        if let Some((id, f)) = split.assignment.iter().find(|(_, &f)| f >= split.k) {
            return Err(Error::InvalidArgument(format!("neuron {id} assigned to fold {f} >= k")));
        }
        Ok(split)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_254() {
        let ids: Vec<u64> = (1..=254).collect();
        let split = split_folds(&ids, 5, 3).unwrap();
        let mut sizes = split.sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![51, 51, 51, 51, 50]);
        assert_eq!(split.assignment.len(), 254);
    }

    #[test]
    fn one_per_fold() {
        let split = split_folds(&[10, 20, 30, 40, 50], 5, 0).unwrap();
        assert_eq!(split.sizes(), vec![1; 5]);
    }

    #[test]
    fn errors() {
        assert!(split_folds(&[1, 2, 3], 1, 0).is_err());
        assert!(split_folds(&[1, 2, 2, 3, 4, 5], 5, 0).is_err());
        assert!(split_folds(&[1, 2, 3], 5, 0).is_err());
    }

    #[test]
    fn json_shape() {
        let split = split_folds(&[7, 8, 9], 3, 11).unwrap();
        let v: serde_json::Value = serde_json::from_str(&split.to_json().unwrap()).unwrap();
        assert_eq!(v["k"], 3);
        assert_eq!(v["seed"], 11);
        assert!(v["assignment"]["7"].is_u64());
        assert_eq!(FoldSplit::from_json(&split.to_json().unwrap()).unwrap(), split);
        assert!(FoldSplit::from_json(r#"{"k":2,"seed":0,"assignment":{"1":2}}"#).is_err());
    }

    #[test]
    fn input_order_does_not_matter() {
        let a = split_folds(&[1, 2, 3, 4, 5, 6], 2, 9).unwrap();
        let b = split_folds(&[6, 5, 4, 3, 2, 1], 2, 9).unwrap();
        assert_eq!(a, b);
    }
}
