//! Target-classifier training over the swarm, evaluation, and the
//! train-on-synthetic / test-on-real utility protocol.

use serde::{Deserialize, Serialize};

use crate::baselines::{fedprox_gradient, SoftDataset};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gan::{sample_batch, sample_synthetic, GanPair};
use crate::metrics::{evaluate_scores, EvalResult};
use crate::nn::{softmax, softmax_cross_entropy, sgd_step_in_place, Activation, LrSchedule, Matrix, MlpModel, ParamVector};
use crate::rng::{self, names, StreamRng};
use crate::swarm::{self, AggregationRecord, Aggregator, ParticipantState, StepContext, SwarmConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHyper {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub schedule: LrSchedule,
}

impl Default for ClassifierHyper {
    fn default() -> Self {
        ClassifierHyper { hidden: vec![64, 32], batch_size: 32, schedule: LrSchedule::inverse_time(0.05, 0.001) }
    }
}

impl ClassifierHyper {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("classifier batch size must be >= 1"));
        }
        self.schedule.validate()
    }
}

/// ReLU MLP with one logit per class.
pub fn classifier_template(n_features: usize, n_classes: usize, hidden: &[usize], rng: &mut StreamRng) -> Result<MlpModel> {
    let mut widths = vec![n_features];
    widths.extend_from_slice(hidden);
    widths.push(n_classes);
    MlpModel::init(&widths, Activation::Relu, Activation::Identity, rng)
}

/// Mean softmax cross-entropy over `rows` and its parameter gradient.
pub fn classifier_gradient(model: &MlpModel, set: &SoftDataset, rows: &[usize]) -> Result<(f64, ParamVector)> {
    let x = set.features.select_rows(rows);
    let t = set.targets.select_rows(rows);
    let (logits, trace) = model.forward(&x)?;
    let (loss, grad) = softmax_cross_entropy(&logits, &t)?;
    Ok((loss, model.backward(&trace, &grad)?))
}

/// Mean cross-entropy over every row of `set`.
pub fn classifier_loss(model: &MlpModel, set: &SoftDataset) -> Result<f64> {
    let logits = model.predict(&set.features)?;
    Ok(softmax_cross_entropy(&logits, &set.targets)?.0)
}

/// One minibatch SGD step, optionally with the proximal pull toward `prox = (mu, w_global)`.
pub fn classifier_step(
    model: &mut MlpModel,
    set: &SoftDataset,
    hyper: &ClassifierHyper,
    step_index: u64,
    prox: Option<(f64, &ParamVector)>,
    rng: &mut StreamRng,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::invalid("empty local training set"));
    }
    let all: Vec<usize> = (0..set.len()).collect();
    let rows = sample_batch(&all, hyper.batch_size, rng);
    let (loss, mut grad) = classifier_gradient(model, set, &rows)?;
    let mut params = model.to_params();
    if let Some((mu, global)) = prox {
        grad = fedprox_gradient(&grad, &params, global, mu)?;
    }
    sgd_step_in_place(&mut params, &grad, hyper.schedule.lr_at(step_index))?;
    model.set_params(&params)?;
    if !loss.is_finite() {
        return Err(Error::Divergence { participant: 0, round: step_index, detail: format!("non-finite classifier loss at step {step_index}") });
    }
    Ok(loss)
}

/// Method-specific hooks into the shared loop.
pub struct ClassifierHooks<'a> {
    /// FedProx proximal coefficient; `None` for plain local SGD.
    pub prox_mu: Option<f64>,
    pub aggregator: &'a dyn Aggregator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRunReport {
    /// Cross-entropy of the aggregated model on the pooled real training rows, per sync.
    pub global_loss: Vec<f64>,
    pub records: Vec<AggregationRecord>,
}

/// Rows flagged real, pooled across participants.
pub fn pooled_real(local_sets: &[SoftDataset]) -> Result<SoftDataset> {
    let cols = local_sets.first().map(|s| s.features.cols()).unwrap_or(0);
    let classes = local_sets.first().map(|s| s.targets.cols()).unwrap_or(0);
    let mut f = Vec::new();
    let mut t = Vec::new();
    for s in local_sets {
        for r in 0..s.len() {
            if !s.synthetic[r] {
                f.extend_from_slice(s.features.row(r));
                t.extend_from_slice(s.targets.row(r));
            }
        }
    }
    let n = f.len() / cols.max(1);
    Ok(SoftDataset { features: Matrix::from_vec(n, cols, f)?, targets: Matrix::from_vec(n, classes, t)?, synthetic: vec![false; n] })
}

pub fn train_swarm_classifier(
    local_sets: &[SoftDataset],
    template: &MlpModel,
    hyper: &ClassifierHyper,
    config: &SwarmConfig,
    train_seed: u64,
    hooks: &ClassifierHooks<'_>,
) -> Result<(MlpModel, ClassifierRunReport)> {
    hyper.validate()?;
    if local_sets.len() != config.n_participants {
        return Err(Error::invalid("one local training set per participant required"));
    }
    let sets: Vec<Vec<usize>> = local_sets.iter().map(|s| (0..s.len()).collect()).collect();
    let mut participants = swarm::register(template, sets, train_seed)?;
    let step = |p: &mut ParticipantState<MlpModel>, ctx: &StepContext<'_>| {
        let n = p.local_step_count;
        let prox = hooks.prox_mu.map(|mu| (mu, ctx.global));
        Ok(vec![classifier_step(&mut p.model, &local_sets[p.id], hyper, n, prox, &mut p.rng)?])
    };
    let pooled = pooled_real(local_sets)?;
    let mut report = ClassifierRunReport { global_loss: Vec::new(), records: Vec::new() };
    config.validate()?;
    let n_syncs = config.n_syncs();
    if n_syncs == 0 {
        return Err(Error::config("empty training budget"));
    }
    for round in 0..n_syncs {
        let out = swarm::run_sync_cycle(&mut participants, &step, config, hooks.aggregator, round, false)?;
        report.records.push(out.record);
        report.global_loss.push(if pooled.is_empty() { 0.0 } else { classifier_loss(&participants[0].model, &pooled)? });
    }
    Ok((participants.swap_remove(0).model, report))
}

/// Plain local SGD on one set, with participant 0's training stream.
pub fn train_centralized_classifier(
    set: &SoftDataset,
    template: &MlpModel,
    hyper: &ClassifierHyper,
    steps: usize,
    train_seed: u64,
) -> Result<MlpModel> {
    let mut model = template.clone();
    let mut r = rng::stream(train_seed, names::TRAIN, 0);
    for n in 0..steps {
        classifier_step(&mut model, set, hyper, n as u64, None, &mut r)?;
    }
    Ok(model)
}

/// Softmax probability of `positive` for every row.
pub fn positive_scores(model: &MlpModel, features: &Matrix, positive: usize) -> Result<Vec<f64>> {
    let p = softmax(&model.predict(features)?);
    Ok((0..p.rows()).map(|r| p.get(r, positive)).collect())
}

pub fn evaluate(model: &MlpModel, test: &Dataset, positive: usize, threshold: f64) -> Result<EvalResult> {
    let scores = positive_scores(model, &test.features, positive)?;
    let labels: Vec<bool> = test.labels.iter().map(|&l| l == positive).collect();
    evaluate_scores(&scores, &labels, threshold)
}

impl From<&Dataset> for SoftDataset {
    fn from(d: &Dataset) -> Self {
        SoftDataset::from_hard(d.features.clone(), &d.labels, d.n_classes, vec![false; d.len()])
    }
}

/// Anything that can produce labelled rows on demand.
pub trait SampleSource: Sync {
    fn sample(&self, label: usize, n: usize, rng: &mut StreamRng) -> Result<Matrix>;
}

impl SampleSource for GanPair {
    fn sample(&self, label: usize, n: usize, rng: &mut StreamRng) -> Result<Matrix> {
        sample_synthetic(self, label, n, rng)
    }
}

/// Draws real rows of the requested label with replacement.
pub struct RealResampler<'a>(pub &'a Dataset);

impl SampleSource for RealResampler<'_> {
    fn sample(&self, label: usize, n: usize, rng: &mut StreamRng) -> Result<Matrix> {
        use rand::Rng;
        let pool: Vec<usize> = (0..self.0.len()).filter(|&i| self.0.labels[i] == label).collect();
        if pool.is_empty() {
            return Err(Error::invalid(format!("no real rows with label {label}")));
        }
        let rows: Vec<usize> = (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect();
        Ok(self.0.features.select_rows(&rows))
    }
}

/// Off-the-shelf learners for the synthetic-utility protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassifierTemplate {
    LogisticRegression { steps: usize, lr: f64 },
    Mlp { hidden: Vec<usize>, steps: usize, lr: f64 },
    NearestCentroid,
}

impl ClassifierTemplate {
    pub fn name(&self) -> String {
        match self {
            ClassifierTemplate::LogisticRegression { .. } => "logistic-regression".into(),
            ClassifierTemplate::Mlp { hidden, .. } => format!("mlp-{}", hidden.iter().map(ToString::to_string).collect::<Vec<_>>().join("x")),
            ClassifierTemplate::NearestCentroid => "nearest-centroid".into(),
        }
    }

    pub fn default_set() -> Vec<ClassifierTemplate> {
        vec![
            ClassifierTemplate::LogisticRegression { steps: 600, lr: 0.1 },
            ClassifierTemplate::Mlp { hidden: vec![32], steps: 600, lr: 0.05 },
            ClassifierTemplate::NearestCentroid,
        ]
    }

    /// Trains centrally on `train` and returns the test accuracy.
    pub fn fit_accuracy(&self, train: &SoftDataset, test: &Dataset, seed: u64) -> Result<f64> {
        let predictions: Vec<usize> = match self {
            ClassifierTemplate::NearestCentroid => {
                let c = train.targets.cols();
                let d = train.features.cols();
                let mut centroids = vec![vec![0.0; d]; c];
                let mut mass = vec![0.0; c];
                for r in 0..train.len() {
                    for k in 0..c {
                        let w = train.targets.get(r, k);
                        mass[k] += w;
                        for (acc, x) in centroids[k].iter_mut().zip(train.features.row(r)) {
                            *acc += w * x;
                        }
                    }
                }
                for (cen, m) in centroids.iter_mut().zip(&mass) {
                    if *m > 0.0 {
                        cen.iter_mut().for_each(|v| *v /= m);
                    } else {
                        cen.iter_mut().for_each(|v| *v = f64::INFINITY);
                    }
                }
                test.features.iter_rows().map(|x| crate::gan::nearest_center(x, &centroids)).collect()
            }
            ClassifierTemplate::LogisticRegression { steps, lr } | ClassifierTemplate::Mlp { steps, lr, .. } => {
                let hidden = match self {
                    ClassifierTemplate::Mlp { hidden, .. } => hidden.clone(),
                    _ => Vec::new(),
                };
                let mut init = rng::stream(seed, names::INIT, 0);
                let template = classifier_template(train.features.cols(), train.targets.cols(), &hidden, &mut init)?;
                let hyper = ClassifierHyper { hidden, batch_size: 32, schedule: LrSchedule::constant(*lr) };
                let model = train_centralized_classifier(train, &template, &hyper, *steps, seed)?;
                let p = model.predict(&test.features)?;
                (0..p.rows())
                    .map(|r| {
                        let row = p.row(r);
                        (0..row.len()).fold(0, |best, k| if row[k] > row[best] { k } else { best })
                    })
                    .collect()
            }
        };
        let correct = predictions.iter().zip(&test.labels).filter(|(p, l)| p == l).count();
        Ok(correct as f64 / test.len().max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityRow {
    pub template: String,
    /// Mean over seeds of real-test accuracy after training on synthetic rows.
    pub synthetic_accuracy: f64,
    /// Same learner trained on the real training rows.
    pub real_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityTable {
    pub rows: Vec<UtilityRow>,
    pub average_synthetic: f64,
    pub average_real: f64,
    /// Accuracy of always predicting the most frequent test label.
    pub majority_rate: f64,
}

/// Trains every template purely on rows from `source` (per-label counts `counts`) and
/// on `real_train`, testing both on `real_test`; averages over `seeds`.
pub fn synthetic_utility_eval(
    source: &dyn SampleSource,
    real_train: &Dataset,
    real_test: &Dataset,
    counts: &[usize],
    templates: &[ClassifierTemplate],
    seeds: &[u64],
) -> Result<UtilityTable> {
    if seeds.is_empty() || templates.is_empty() {
        return Err(Error::invalid("utility evaluation needs templates and seeds"));
    }
    if counts.len() != real_train.n_classes {
        return Err(Error::invalid("one synthetic count per class required"));
    }
    let real = SoftDataset::from(real_train);
    let mut synthetic_sets = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut r = rng::stream(seed, names::AUGMENT, 0);
        let mut f = Matrix::zeros(0, real_train.n_features());
        let mut labels = Vec::new();
        for (k, &n) in counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            f = f.vconcat(&source.sample(k, n, &mut r)?)?;
            labels.extend(std::iter::repeat_n(k, n));
        }
        let n = labels.len();
        synthetic_sets.push(SoftDataset::from_hard(f, &labels, real_train.n_classes, vec![true; n]));
    }
    let mut rows = Vec::with_capacity(templates.len());
    for t in templates {
        let mut syn = 0.0;
        let mut rl = 0.0;
        for (s, &seed) in synthetic_sets.iter().zip(seeds) {
            syn += t.fit_accuracy(s, real_test, seed)?;
            rl += t.fit_accuracy(&real, real_test, seed)?;
        }
        let n = seeds.len() as f64;
        rows.push(UtilityRow { template: t.name(), synthetic_accuracy: syn / n, real_accuracy: rl / n });
    }
    let m = rows.len() as f64;
    let hist = real_test.histogram();
    Ok(UtilityTable {
        average_synthetic: rows.iter().map(|r| r.synthetic_accuracy).sum::<f64>() / m,
        average_real: rows.iter().map(|r| r.real_accuracy).sum::<f64>() / m,
        majority_rate: *hist.counts.iter().max().unwrap_or(&0) as f64 / hist.total().max(1) as f64,
        rows,
    })
}
