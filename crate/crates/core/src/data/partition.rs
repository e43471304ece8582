//! Label-skewed splitting of a training set across participants.
//!
//! For each label, participant proportions are drawn from a symmetric Dirichlet(β)
//! (independent Gamma(β, 1) draws, normalized). The label's shuffled indices are
//! then cut at the rounded cumulative proportions, so counts are exact.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, names, StreamRng};

pub const MAX_PARTITION_ATTEMPTS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub beta: f64,
    pub seed: u64,
    /// Sorted row indices into the training set, one list per participant.
    pub participants: Vec<Vec<usize>>,
    /// Drawn proportions, `proportions[label][participant]`.
    #[serde(default)]
    pub proportions: Vec<Vec<f64>>,
    /// Index of the attempt that produced a partition with no empty participant.
    #[serde(default)]
    pub attempt: u64,
}

impl Partition {
    pub fn n_participants(&self) -> usize {
        self.participants.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.participants.iter().map(Vec::len).collect()
    }

    /// Checks disjointness and coverage of `0..n_samples` and that nobody is empty.
    pub fn validate(&self, n_samples: usize) -> Result<()> {
        let mut seen = vec![false; n_samples];
        for (p, idx) in self.participants.iter().enumerate() {
            if idx.is_empty() {
                return Err(Error::Partition(format!("participant {p} has no samples")));
            }
            for &i in idx {
                if i >= n_samples {
                    return Err(Error::Partition(format!("participant {p} holds out-of-range index {i}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Partition(format!("index {i} assigned twice")));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Partition(format!("index {i} not assigned")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// A draw from the symmetric Dirichlet(β) over `k` categories.
///
/// For very small β every Gamma draw can underflow to zero; the limit of the
/// distribution in that case puts all mass on one category, chosen uniformly.
pub fn sample_dirichlet(beta: f64, k: usize, rng: &mut StreamRng) -> Result<Vec<f64>> {
    let gamma = Gamma::new(beta, 1.0).map_err(|e| Error::invalid(format!("bad Dirichlet parameter {beta}: {e}")))?;
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        Ok(draws.into_iter().map(|g| g / sum).collect())
    } else {
        let mut p = vec![0.0; k];
        p[rng.random_range(0..k)] = 1.0;
        Ok(p)
    }
}

/// Cut points `round(cumsum(p) * n)` with the last one pinned to `n`.
fn cumulative_counts(proportions: &[f64], n: usize) -> Vec<usize> {
    let mut counts = Vec::with_capacity(proportions.len());
    let mut acc = 0.0;
    let mut prev = 0usize;
    for (j, &p) in proportions.iter().enumerate() {
        acc += p;
        let cut = if j + 1 == proportions.len() { n } else { ((acc * n as f64).round() as usize).clamp(prev, n) };
        counts.push(cut - prev);
        prev = cut;
    }
    counts
}

pub fn dirichlet_partition(dataset: &Dataset, n_participants: usize, beta: f64, seed: u64) -> Result<Partition> {
    if n_participants == 0 {
        return Err(Error::invalid("need at least one participant"));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid(format!("beta must be finite and > 0, got {beta}")));
    }
    if dataset.len() < n_participants {
        return Err(Error::Partition(format!(
            "{} samples cannot cover {n_participants} participants",
            dataset.len()
        )));
    }
    let by_label: Vec<Vec<usize>> =
        (0..dataset.n_classes).map(|k| (0..dataset.len()).filter(|&i| dataset.labels[i] == k).collect()).collect();

    for attempt in 0..MAX_PARTITION_ATTEMPTS {
        let mut rng = rng::stream(seed, names::PARTITION, attempt);
        let mut participants = vec![Vec::new(); n_participants];
        let mut proportions = Vec::with_capacity(dataset.n_classes);
        for idx in &by_label {
            let mut idx = idx.clone();
            idx.shuffle(&mut rng);
            let p = sample_dirichlet(beta, n_participants, &mut rng)?;
            let mut start = 0;
            for (j, c) in cumulative_counts(&p, idx.len()).into_iter().enumerate() {
                participants[j].extend_from_slice(&idx[start..start + c]);
                start += c;
            }
            proportions.push(p);
        }
        if participants.iter().all(|p| !p.is_empty()) {
            for p in &mut participants {
                p.sort_unstable();
            }
            return Ok(Partition { beta, seed, participants, proportions, attempt });
        }
    }
    Err(Error::Partition(format!(
        "every one of {MAX_PARTITION_ATTEMPTS} attempts left a participant empty (beta {beta}, seed {seed})"
    )))
}
