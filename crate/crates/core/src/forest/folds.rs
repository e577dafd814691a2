//! Stratified k-fold assignment.

use std::collections::BTreeMap;
use std::fmt::Display;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    /// Fold id per sample index.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    /// (train indices, test indices) for one fold.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold_of.len()).partition(|&i| self.fold_of[i] != fold)
    }

    pub fn fold_size(&self, fold: usize) -> usize {
        self.fold_of.iter().filter(|&&f| f == fold).count()
    }
}

/// Shuffles each class's samples by `seed` and deals them round-robin over
/// the folds. The dealing position carries over between classes so overall
/// fold sizes stay balanced too.
pub fn stratified_folds<L: Ord + Display>(labels: &[L], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut by_class: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if let Some((class, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(Error::Stratification {
            class: class.to_string(),
            count: members.len(),
            k,
        });
    }

    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for (ordinal, members) in by_class.values_mut().enumerate() {
        members.shuffle(&mut seed::rng(seed, &[0x666f6c64, ordinal as u64]));
        for &i in members.iter() {
            fold_of[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}
