//! Rebalancing local datasets to the global label distribution with synthetic rows.
//!
//! Every participant is topped up to the same total whose per-label split follows
//! the pooled label proportions. Real rows are never dropped: if a requested total
//! would require discarding some, it is raised to the smallest total that does not.

use serde::{Deserialize, Serialize};

use crate::data::{label_histogram, Dataset, LabelHistogram, Partition};
use crate::error::{Error, Result};
use crate::gan::{sample_synthetic, GanPair};
use crate::nn::Matrix;
use crate::rng::{self, names};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub target_total_per_participant: usize,
    /// Per-label target shared by every participant.
    pub per_label_target: Vec<usize>,
    /// `quota[participant][label]` synthetic rows to add.
    pub per_participant_quota: Vec<Vec<usize>>,
    /// `real_counts[participant][label]`.
    pub real_counts: Vec<Vec<usize>>,
    pub global_proportions: Vec<f64>,
    /// Total the caller asked for, if any.
    pub requested_total: Option<usize>,
}

impl AugmentationPlan {
    pub fn n_participants(&self) -> usize {
        self.per_participant_quota.len()
    }

    pub fn final_counts(&self, participant: usize) -> Vec<usize> {
        self.real_counts[participant].iter().zip(&self.per_participant_quota[participant]).map(|(r, q)| r + q).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn participant_histograms(partition: &Partition, dataset: &Dataset) -> Result<Vec<LabelHistogram>> {
    partition.participants.iter().map(|ix| label_histogram(dataset, Some(ix))).collect()
}

/// Label proportions over the union of all participants' rows.
pub fn global_label_distribution(partition: &Partition, dataset: &Dataset) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; dataset.n_classes];
    for h in participant_histograms(partition, dataset)? {
        for (c, n) in counts.iter_mut().zip(h.counts) {
            *c += n;
        }
    }
    let h = LabelHistogram { counts };
    if h.total() == 0 {
        return Err(Error::Planning("partition holds no samples".into()));
    }
    Ok(h.proportions())
}

/// Splits `total` by `proportions` with largest-remainder rounding (ties to the lower label).
pub fn apportion(total: usize, proportions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        out[k] += 1;
    }
    out
}

pub fn make_plan(partition: &Partition, dataset: &Dataset, target_total: Option<usize>) -> Result<AugmentationPlan> {
    let hists = participant_histograms(partition, dataset)?;
    let proportions = global_label_distribution(partition, dataset)?;
    let k = dataset.n_classes;
    // per-label maximum real count over participants: every target must reach it
    let need: Vec<usize> = (0..k).map(|l| hists.iter().map(|h| h.counts[l]).max().unwrap_or(0)).collect();
    let feasible = |t: usize| apportion(t, &proportions).iter().zip(&need).all(|(a, n)| a >= n);

    let largest_local = hists.iter().map(LabelHistogram::total).max().unwrap_or(0);
    let lower = need.iter().sum::<usize>().max(largest_local);
    // with t >= need_k / p_k for every label, floor(t p_k) >= need_k
    let upper = (0..k)
        .filter(|&l| need[l] > 0)
        .map(|l| (need[l] as f64 / proportions[l]).ceil() as usize + 1)
        .max()
        .unwrap_or(lower)
        .max(lower);
    let start = target_total.unwrap_or(lower).max(lower);
    let total = (start..=upper.max(start))
        .find(|&t| feasible(t))
        .ok_or_else(|| Error::Planning(format!("no feasible total in [{start}, {upper}]")))?;

    let per_label_target = apportion(total, &proportions);
    let real_counts: Vec<Vec<usize>> = hists.into_iter().map(|h| h.counts).collect();
    let quota: Vec<Vec<usize>> = real_counts
        .iter()
        .map(|r| per_label_target.iter().zip(r).map(|(t, r)| t - r).collect())
        .collect();
    Ok(AugmentationPlan {
        target_total_per_participant: total,
        per_label_target,
        per_participant_quota: quota,
        real_counts,
        global_proportions: proportions,
        requested_total: target_total,
    })
}

/// A participant's rows after augmentation; `synthetic[i]` marks generated rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedDataset {
    pub dataset: Dataset,
    pub synthetic: Vec<bool>,
}

impl AugmentedDataset {
    pub fn real_only(dataset: Dataset) -> Self {
        let n = dataset.len();
        AugmentedDataset { dataset, synthetic: vec![false; n] }
    }

    pub fn n_synthetic(&self) -> usize {
        self.synthetic.iter().filter(|&&s| s).count()
    }
}

/// Real rows (in partition order) followed by each label's synthetic quota.
///
/// Participant `p` draws its noise from stream `(seed, "augment", p)`.
pub fn apply_plan(
    plan: &AugmentationPlan,
    partition: &Partition,
    dataset: &Dataset,
    generator: &GanPair,
    seed: u64,
) -> Result<Vec<AugmentedDataset>> {
    if generator.n_features != dataset.n_features() || generator.n_classes != dataset.n_classes {
        return Err(Error::invalid(format!(
            "generator produces {} features over {} classes, dataset has {} features over {} classes",
            generator.n_features,
            generator.n_classes,
            dataset.n_features(),
            dataset.n_classes
        )));
    }
    if plan.n_participants() != partition.n_participants() {
        return Err(Error::invalid("plan and partition disagree on participant count"));
    }
    partition
        .participants
        .iter()
        .enumerate()
        .map(|(p, ix)| {
            let real = dataset.subset(ix)?;
            if real.histogram().counts != plan.real_counts[p] {
                return Err(Error::invalid(format!("plan was made for a different partition (participant {p})")));
            }
            let mut rng = rng::stream(seed, names::AUGMENT, p as u64);
            let mut features = real.features.clone();
            let mut labels = real.labels.clone();
            for (label, &q) in plan.per_participant_quota[p].iter().enumerate() {
                if q == 0 {
                    continue;
                }
                let rows: Matrix = sample_synthetic(generator, label, q, &mut rng)?;
                features = features.vconcat(&rows)?;
                labels.extend(std::iter::repeat_n(label, q));
            }
            let n_real = real.len();
            let synthetic = (0..labels.len()).map(|i| i >= n_real).collect();
            let dataset = Dataset { features, labels, ..real };
            Ok(AugmentedDataset { dataset, synthetic })
        })
        .collect()
}
