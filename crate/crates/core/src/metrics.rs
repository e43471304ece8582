//! Binary classification metrics. No randomness; identical inputs give identical outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability that a random positive outscores a random negative, ties counting one half.
///
/// Computed from midranks: `(R+ - n+(n+ + 1)/2) / (n+ n-)`.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the midrank keeps every rank sum an integer
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum2 += twice_mid;
            }
        }
        i = j + 1;
    }
    let n_pos = n_pos as u128;
    let u2 = rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg as u128) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl Confusion {
    /// Rows with `score >= threshold` are predicted positive.
    pub fn from_scores(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= threshold, l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.r#fn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.r#fn
    }

    /// `2PR / (P + R)`, or 0 when precision and recall are both 0 or undefined.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.r#fn;
        if self.tp == 0 || denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / self.total() as f64
        }
    }
}

/// `(f1, accuracy)` at `threshold`; the positive class is the one flagged `true`.
pub fn f1_accuracy(scores: &[f64], labels: &[bool], threshold: f64) -> Result<(f64, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let c = Confusion::from_scores(scores, labels, threshold);
    Ok((c.f1(), c.accuracy()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub auc: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub n_test: usize,
    pub threshold: f64,
}

pub fn evaluate_scores(scores: &[f64], labels: &[bool], threshold: f64) -> Result<EvalResult> {
    if scores.is_empty() {
        return Err(Error::UndefinedMetric("empty test set".into()));
    }
    let auc = auc(scores, labels)?;
    let (f1, accuracy) = f1_accuracy(scores, labels, threshold)?;
    Ok(EvalResult { auc, f1, accuracy, n_test: scores.len(), threshold })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_extremes_and_ties() {
        let l = [false, false, true, true];
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &l).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &l).unwrap(), 0.0);
        assert_eq!(auc(&[0.5; 4], &l).unwrap(), 0.5);
    }

    #[test]
    fn auc_four_point_example() {
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
    }

    #[test]
    fn auc_single_class_is_undefined() {
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn f1_cases() {
        let l = [true, false, true];
        assert_eq!(f1_accuracy(&[0.9, 0.1, 0.8], &l, 0.5).unwrap(), (1.0, 1.0));
        let (f1, _) = f1_accuracy(&[0.1, 0.1, 0.1], &l, 0.5).unwrap();
        assert_eq!(f1, 0.0);
        // TP=2, FP=1, FN=1, TN=6
        let scores = [0.9, 0.8, 0.7, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
        let labels = [true, true, false, true, false, false, false, false, false, false];
        let (f1, acc) = f1_accuracy(&scores, &labels, 0.5).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((acc - 0.8).abs() < 1e-15);
    }
}
