use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::StreamRng;

/// Feature matrix with dense integer labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    #[serde(default)]
    pub feature_names: Option<Vec<String>>,
    /// Original label strings, indexed by dense label. Set by the CSV loader.
    #[serde(default)]
    pub class_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let d = Dataset { features, labels, n_classes, feature_names: None, class_names: None };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::invalid(format!("a dataset needs at least 2 classes, got {}", self.n_classes)));
        }
        if self.labels.len() != self.features.rows() {
            return Err(Error::invalid(format!(
                "{} labels for {} feature rows",
                self.labels.len(),
                self.features.rows()
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.n_classes) {
            return Err(Error::invalid(format!("label {bad} outside [0, {})", self.n_classes)));
        }
        if !self.features.all_finite() {
            return Err(Error::invalid("non-finite feature value"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Rows at `indices`, in order, keeping names.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        check_indices(indices, self.len())?;
        Ok(Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        })
    }

    pub fn histogram(&self) -> LabelHistogram {
        LabelHistogram::from_labels(self.labels.iter().copied(), self.n_classes)
    }

    /// Per-feature (min, max).
    pub fn feature_ranges(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.n_features();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in self.features.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn check_indices(indices: &[usize], len: usize) -> Result<()> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= len) {
        return Err(Error::invalid(format!("index {bad} out of range for {len} samples")));
    }
    Ok(())
}

/// Per-class sample counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelHistogram {
    pub counts: Vec<usize>,
}

impl LabelHistogram {
    pub fn from_labels(labels: impl IntoIterator<Item = usize>, n_classes: usize) -> Self {
        let mut counts = vec![0; n_classes];
        for l in labels {
            counts[l] += 1;
        }
        LabelHistogram { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Normalized counts; all zeros for an empty histogram.
    pub fn proportions(&self) -> Vec<f64> {
        let t = self.total();
        if t == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / t as f64).collect()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.proportions().iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum()
    }
}

/// Histogram of the whole dataset, or of the rows at `indices` when given.
pub fn label_histogram(dataset: &Dataset, indices: Option<&[usize]>) -> Result<LabelHistogram> {
    match indices {
        None => Ok(dataset.histogram()),
        Some(ix) => {
            check_indices(ix, dataset.len())?;
            Ok(LabelHistogram::from_labels(ix.iter().map(|&i| dataset.labels[i]), dataset.n_classes))
        }
    }
}

/// Row indices of a stratified train/test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainTestSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split: in each class, `round(test_fraction * n_k)` shuffled rows go to test.
pub fn stratified_split(dataset: &Dataset, test_fraction: f64, rng: &mut StreamRng) -> Result<TrainTestSplit> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::invalid(format!("test fraction must be in [0, 1), got {test_fraction}")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for k in 0..dataset.n_classes {
        let mut idx: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.labels[i] == k).collect();
        idx.shuffle(rng);
        let n_test = (test_fraction * idx.len() as f64).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(TrainTestSplit { train, test })
}
