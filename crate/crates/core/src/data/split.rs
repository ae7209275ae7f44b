use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EmbeddingDataset;
use crate::error::{Error, Result};

/// Train/test partition request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub test: f64,
    pub seed: u64,
    pub stratified: bool,
    /// Allows an empty test side (`train = 1, test = 0`).
    pub sweep: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.8,
            test: 0.2,
            seed: 0,
            stratified: true,
            sweep: false,
        }
    }
}

fn shuffled(mut v: Vec<usize>, seed: u64) -> Vec<usize> {
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

fn take(n: usize, frac: f64) -> usize {
    ((n as f64 * frac).round() as usize).min(n)
}

/// Disjoint train and test row indices.
pub fn split(data: &EmbeddingDataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let ok = |f: f64| f.is_finite() && f >= 0.0;
    if !ok(spec.train) || !ok(spec.test) || spec.train + spec.test > 1.0 + 1e-12 {
        return Err(Error::Config(format!(
            "split fractions must be non-negative with sum <= 1, got {} and {}",
            spec.train, spec.test
        )));
    }
    let groups: Vec<Vec<usize>> = if spec.stratified {
        (0..2u8)
            .map(|y| (0..data.len()).filter(|&i| data.labels()[i] == y).collect())
            .collect()
    } else {
        vec![(0..data.len()).collect()]
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (g, idx) in groups.into_iter().enumerate() {
        let n = idx.len();
        let order = shuffled(idx, spec.seed.wrapping_add(g as u64));
        let a = take(n, spec.train);
        let b = take(n, spec.test).min(n - a);
        train.extend_from_slice(&order[..a]);
        test.extend_from_slice(&order[a..a + b]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if train.is_empty() {
        return Err(Error::Config("split leaves the training side empty".into()));
    }
    if test.is_empty() && !spec.sweep {
        return Err(Error::Config(
            "split leaves the test side empty (allowed only in sweep mode)".into(),
        ));
    }
    Ok((train, test))
}

/// The first `round(ratio · n)` entries (at least one) of a seeded shuffle
/// of `indices`; smaller ratios under one seed give subsets of larger ones.
pub fn nested_subset(indices: &[usize], ratio: f64, seed: u64) -> Result<Vec<usize>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config(format!("data ratio must be in (0, 1], got {ratio}")));
    }
    if indices.is_empty() {
        return Err(Error::Config("cannot subset an empty index set".into()));
    }
    let order = shuffled(indices.to_vec(), seed);
    let k = take(order.len(), ratio).max(1);
    let mut out = order[..k].to_vec();
    out.sort_unstable();
    Ok(out)
}
