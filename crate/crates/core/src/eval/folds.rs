use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Assignment of every sample to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldSplit {
    /// Held-out samples of fold `f`, ascending.
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == f)
            .collect()
    }

    /// Training samples for fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != f)
            .collect()
    }
}

/// Stratified k-fold split. Each class is shuffled and dealt round-robin
/// into the folds; the starting fold carries over from one class to the
/// next, so fold sizes also differ by at most one overall (and `k = n`
/// yields singleton folds).
pub fn kfold_split(ds: &Dataset, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    if ds.len() < k {
        return Err(Error::Config(format!(
            "{}: {} samples cannot fill {k} folds",
            ds.name,
            ds.len()
        )));
    }
    let mut rng = seed::rng(seed);
    let mut assignments = vec![0; ds.len()];
    let mut next = 0;
    for class in 0..ds.classes {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldSplit {
        k,
        assignments,
        seed,
    })
}
