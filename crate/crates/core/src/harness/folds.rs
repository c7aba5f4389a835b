use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What fold assignment needs to know about a sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldKey {
    pub id: String,
    pub exercise: String,
    pub subject: String,
}

/// `assignment[i]` is the test fold of the i-th input sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl FoldSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Exercise-stratified k-fold split. Within each exercise the samples are
/// shuffled and dealt round-robin; the dealing position carries over between
/// exercises so overall fold sizes also differ by at most one.
pub fn make_folds(samples: &[FoldKey], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 || samples.len() < k {
        return Err(Error::TooFewSamples { samples: samples.len(), folds: k });
    }
    let mut strata: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        strata.entry(s.exercise.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; samples.len()];
    let mut next = 0;
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldSplit { k, assignment })
}

/// Subject-disjoint split: each subject's samples land in one fold. Subjects
/// are shuffled and greedily placed in the currently smallest fold.
pub fn make_subject_folds(samples: &[FoldKey], k: usize, seed: u64) -> Result<FoldSplit> {
    let mut subjects: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        subjects.entry(s.subject.as_str()).or_default().push(i);
    }
    if k < 2 || subjects.len() < k {
        return Err(Error::TooFewSamples { samples: subjects.len(), folds: k });
    }
    let mut groups: Vec<Vec<usize>> = subjects.into_values().collect();
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut sizes = vec![0usize; k];
    let mut assignment = vec![0; samples.len()];
    for group in groups {
        let fold = (0..k).min_by_key(|&f| (sizes[f], f)).unwrap();
        sizes[fold] += group.len();
        for i in group {
            assignment[i] = fold;
        }
    }
    Ok(FoldSplit { k, assignment })
}
