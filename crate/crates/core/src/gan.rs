//! Class-conditional GAN trained across the swarm.
//!
//! The generator sees `[noise | one-hot label]` and ends in `tanh`, affinely mapped to
//! per-feature `[min, max]` ranges shared at registration. The discriminator sees
//! `[features | one-hot label]` and emits one logit. D is trained with binary
//! cross-entropy on real-vs-fake, G with the non-saturating loss `-ln D(G(z))`, and
//! within a step D is always updated first.

use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::nn::{bce_with_logits, sgd_step_in_place, Activation, LrSchedule, Matrix, MlpModel, ParamVector};
use crate::rng::{self, names, StreamRng};
use crate::swarm::{self, Aggregator, AggregationRecord, ParticipantState, StepContext, SwarmConfig, SwarmModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanPair {
    pub generator: MlpModel,
    pub discriminator: MlpModel,
    pub noise_dim: usize,
    pub n_classes: usize,
    pub n_features: usize,
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanArchitecture {
    pub noise_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
}

impl Default for GanArchitecture {
    fn default() -> Self {
        GanArchitecture { noise_dim: 16, generator_hidden: vec![64, 32], discriminator_hidden: vec![64, 32] }
    }
}

impl GanPair {
    pub fn init(
        arch: &GanArchitecture,
        n_features: usize,
        n_classes: usize,
        feature_min: Vec<f64>,
        feature_max: Vec<f64>,
        rng: &mut StreamRng,
    ) -> Result<Self> {
        if arch.noise_dim == 0 {
            return Err(Error::invalid("noise dimension must be >= 1"));
        }
        if feature_min.len() != n_features || feature_max.len() != n_features {
            return Err(Error::invalid("feature ranges must cover every feature"));
        }
        if feature_min.iter().zip(&feature_max).any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return Err(Error::invalid("feature ranges must be finite with min <= max"));
        }
        let mut gw = vec![arch.noise_dim + n_classes];
        gw.extend_from_slice(&arch.generator_hidden);
        gw.push(n_features);
        let mut dw = vec![n_features + n_classes];
        dw.extend_from_slice(&arch.discriminator_hidden);
        dw.push(1);
        let generator = MlpModel::init(&gw, Activation::Relu, Activation::Tanh, rng)?;
        let discriminator = MlpModel::init(&dw, Activation::Relu, Activation::Identity, rng)?;
        Ok(GanPair { generator, discriminator, noise_dim: arch.noise_dim, n_classes, n_features, feature_min, feature_max })
    }

    /// Initializes with ranges taken from `data`.
    pub fn for_dataset(arch: &GanArchitecture, data: &Dataset, rng: &mut StreamRng) -> Result<Self> {
        let (lo, hi) = data.feature_ranges();
        GanPair::init(arch, data.n_features(), data.n_classes, lo, hi, rng)
    }

    fn half_range(&self) -> Vec<f64> {
        self.feature_min.iter().zip(&self.feature_max).map(|(lo, hi)| 0.5 * (hi - lo)).collect()
    }

    fn rescale(&self, t: &Matrix) -> Matrix {
        let mut x = t.clone();
        for r in 0..x.rows() {
            for (j, v) in x.row_mut(r).iter_mut().enumerate() {
                let (lo, hi) = (self.feature_min[j], self.feature_max[j]);
                *v = lo + 0.5 * (*v + 1.0) * (hi - lo);
            }
        }
        x
    }

    /// Synthetic rows for the given noise and labels.
    pub fn generate(&self, noise: &Matrix, labels: &[usize]) -> Result<Matrix> {
        self.check_labels(labels)?;
        let input = noise.hconcat(&Matrix::one_hot(labels, self.n_classes))?;
        Ok(self.rescale(&self.generator.predict(&input)?))
    }

    /// Raw discriminator logits.
    pub fn discriminate(&self, x: &Matrix, labels: &[usize]) -> Result<Matrix> {
        self.check_labels(labels)?;
        self.discriminator.predict(&x.hconcat(&Matrix::one_hot(labels, self.n_classes))?)
    }

    fn check_labels(&self, labels: &[usize]) -> Result<()> {
        if let Some(&l) = labels.iter().find(|&&l| l >= self.n_classes) {
            return Err(Error::invalid(format!("label {l} outside [0, {})", self.n_classes)));
        }
        Ok(())
    }

    pub fn sample_noise(&self, n: usize, rng: &mut StreamRng) -> Matrix {
        let values = (0..n * self.noise_dim).map(|_| StandardNormal.sample(rng)).collect();
        Matrix::from_vec(n, self.noise_dim, values).expect("noise shape")
    }

    /// Gradient of the discriminator loss `BCE(D(real), 1) + BCE(D(fake), 0)`.
    pub fn discriminator_gradient(&self, real: &Matrix, fake: &Matrix, labels: &[usize]) -> Result<(f64, ParamVector)> {
        let onehot = Matrix::one_hot(labels, self.n_classes);
        let batch = real.hconcat(&onehot)?.vconcat(&fake.hconcat(&onehot)?)?;
        let (logits, trace) = self.discriminator.forward(&batch)?;
        let b = real.rows();
        let targets: Vec<f64> = (0..2 * b).map(|i| if i < b { 1.0 } else { 0.0 }).collect();
        // the stacked mean over 2B rows is half the sum of the two batch means
        let (loss, mut grad) = bce_with_logits(&logits, &targets)?;
        for g in grad.values_mut() {
            *g *= 2.0;
        }
        Ok((2.0 * loss, self.discriminator.backward(&trace, &grad)?))
    }

    /// Gradient of the non-saturating generator loss `-ln sigmoid(D(G(z)))`.
    pub fn generator_gradient(&self, noise: &Matrix, labels: &[usize]) -> Result<(f64, ParamVector)> {
        let onehot = Matrix::one_hot(labels, self.n_classes);
        let (t, g_trace) = self.generator.forward(&noise.hconcat(&onehot)?)?;
        let fake = self.rescale(&t);
        let (logits, d_trace) = self.discriminator.forward(&fake.hconcat(&onehot)?)?;
        let (loss, grad) = bce_with_logits(&logits, &vec![1.0; labels.len()])?;
        let d_grads = self.discriminator.backward_full(&d_trace, &grad)?;
        let scale = self.half_range();
        let mut dt = d_grads.input.columns(0, self.n_features);
        for r in 0..dt.rows() {
            for (j, v) in dt.row_mut(r).iter_mut().enumerate() {
                *v *= scale[j];
            }
        }
        Ok((loss, self.generator.backward(&g_trace, &dt)?))
    }

    /// One alternating update on fixed real rows and noise: D first, then G against the
    /// updated D using the same noise. Returns `(d_loss, g_loss)`.
    pub fn adversarial_update(
        &mut self,
        real: &Matrix,
        labels: &[usize],
        noise: &Matrix,
        lr_d: f64,
        lr_g: f64,
    ) -> Result<(f64, f64)> {
        let fake = self.generate(noise, labels)?;
        let (d_loss, d_grad) = self.discriminator_gradient(real, &fake, labels)?;
        self.apply_discriminator(&d_grad, lr_d)?;
        let (g_loss, g_grad) = self.generator_gradient(noise, labels)?;
        self.apply_generator(&g_grad, lr_g)?;
        Ok((d_loss, g_loss))
    }

    pub(crate) fn apply_discriminator(&mut self, grad: &ParamVector, lr: f64) -> Result<()> {
        let mut p = self.discriminator.to_params();
        sgd_step_in_place(&mut p, grad, lr)?;
        self.discriminator.set_params(&p)
    }

    pub(crate) fn apply_generator(&mut self, grad: &ParamVector, lr: f64) -> Result<()> {
        let mut p = self.generator.to_params();
        sgd_step_in_place(&mut p, grad, lr)?;
        self.generator.set_params(&p)
    }

    pub fn n_discriminator_layers(&self) -> usize {
        self.discriminator.layers().len()
    }

    pub fn save(&self, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
        let file = GanFile {
            format: GAN_FILE_FORMAT.into(),
            version: 1,
            config_hash: config_hash.map(str::to_owned),
            noise_dim: self.noise_dim,
            n_classes: self.n_classes,
            n_features: self.n_features,
            feature_min: self.feature_min.clone(),
            feature_max: self.feature_max.clone(),
            generator: self.generator.to_params(),
            discriminator: self.discriminator.to_params(),
        };
        std::fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    /// Loads a pair written by [`GanPair::save`], returning the embedded config hash.
    pub fn load(path: impl AsRef<Path>) -> Result<(GanPair, Option<String>)> {
        let file: GanFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format != GAN_FILE_FORMAT {
            return Err(Error::invalid(format!("not a GAN parameter file (format {:?})", file.format)));
        }
        let generator = MlpModel::from_params(&file.generator)?;
        let discriminator = MlpModel::from_params(&file.discriminator)?;
        if generator.input_dim() != file.noise_dim + file.n_classes
            || generator.output_dim() != file.n_features
            || discriminator.input_dim() != file.n_features + file.n_classes
            || discriminator.output_dim() != 1
        {
            return Err(Error::invalid("GAN file dimensions are inconsistent"));
        }
        let pair = GanPair {
            generator,
            discriminator,
            noise_dim: file.noise_dim,
            n_classes: file.n_classes,
            n_features: file.n_features,
            feature_min: file.feature_min,
            feature_max: file.feature_max,
        };
        Ok((pair, file.config_hash))
    }
}

pub const GAN_FILE_FORMAT: &str = "swarm-gan/gan-pair";

/// On-disk form: layout descriptors plus 64-bit values.
#[derive(Debug, Serialize, Deserialize)]
struct GanFile {
    format: String,
    version: u32,
    config_hash: Option<String>,
    noise_dim: usize,
    n_classes: usize,
    n_features: usize,
    feature_min: Vec<f64>,
    feature_max: Vec<f64>,
    generator: ParamVector,
    discriminator: ParamVector,
}

/// The swarm exchanges `(theta_D, theta_G)` as one vector.
impl SwarmModel for GanPair {
    fn params(&self) -> ParamVector {
        self.discriminator.to_params().concat(&self.generator.to_params())
    }

    fn load_params(&mut self, params: &ParamVector) -> Result<()> {
        let (d, g) = params.split_layers(self.n_discriminator_layers())?;
        self.discriminator.set_params(&d)?;
        self.generator.set_params(&g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanHyper {
    pub batch_size: usize,
    pub d_schedule: LrSchedule,
    pub g_schedule: LrSchedule,
    pub d_steps_per_g_step: usize,
}

impl Default for GanHyper {
    fn default() -> Self {
        GanHyper {
            batch_size: 64,
            d_schedule: LrSchedule::inverse_time(0.05, 0.003),
            g_schedule: LrSchedule::inverse_time(0.05, 0.003),
            d_steps_per_g_step: 1,
        }
    }
}

impl GanHyper {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("GAN batch size must be >= 1"));
        }
        if self.d_steps_per_g_step == 0 {
            return Err(Error::config("d_steps_per_g_step must be >= 1"));
        }
        self.d_schedule.validate()?;
        self.g_schedule.validate()
    }
}

/// `B` rows of `local`: without replacement when there are enough, with replacement otherwise.
pub fn sample_batch(local: &[usize], batch_size: usize, rng: &mut StreamRng) -> Vec<usize> {
    if local.len() >= batch_size {
        index::sample(rng, local.len(), batch_size).into_iter().map(|i| local[i]).collect()
    } else {
        (0..batch_size).map(|_| local[rng.random_range(0..local.len())]).collect()
    }
}

/// One local training step on the rows `local` of `data`. Returns `(d_loss, g_loss)`.
pub fn local_gan_step(
    pair: &mut GanPair,
    data: &Dataset,
    local: &[usize],
    hyper: &GanHyper,
    step_index: u64,
    rng: &mut StreamRng,
) -> Result<(f64, f64)> {
    if local.is_empty() {
        return Err(Error::invalid("local data is empty"));
    }
    if data.n_features() != pair.n_features || data.n_classes != pair.n_classes {
        return Err(Error::invalid("dataset does not match GAN dimensions"));
    }
    let lr_d = hyper.d_schedule.lr_at(step_index);
    let lr_g = hyper.g_schedule.lr_at(step_index);
    for _ in 1..hyper.d_steps_per_g_step {
        let rows = sample_batch(local, hyper.batch_size, rng);
        let labels: Vec<usize> = rows.iter().map(|&i| data.labels[i]).collect();
        let noise = pair.sample_noise(rows.len(), rng);
        let fake = pair.generate(&noise, &labels)?;
        let (_, g) = pair.discriminator_gradient(&data.features.select_rows(&rows), &fake, &labels)?;
        pair.apply_discriminator(&g, lr_d)?;
    }
    let rows = sample_batch(local, hyper.batch_size, rng);
    let labels: Vec<usize> = rows.iter().map(|&i| data.labels[i]).collect();
    let noise = pair.sample_noise(rows.len(), rng);
    let (d_loss, g_loss) = pair.adversarial_update(&data.features.select_rows(&rows), &labels, &noise, lr_d, lr_g)?;
    if !(d_loss.is_finite() && g_loss.is_finite()) {
        return Err(Error::Divergence {
            participant: 0,
            round: step_index,
            detail: format!("non-finite GAN loss at step {step_index} (d {d_loss}, g {g_loss})"),
        });
    }
    Ok((d_loss, g_loss))
}

/// `n` synthetic rows for `label`, from fresh noise.
pub fn sample_synthetic(pair: &GanPair, label: usize, n: usize, rng: &mut StreamRng) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::invalid("requested zero synthetic samples"));
    }
    if label >= pair.n_classes {
        return Err(Error::invalid(format!("label {label} outside [0, {})", pair.n_classes)));
    }
    let noise = pair.sample_noise(n, rng);
    pair.generate(&noise, &vec![label; n])
}

/// Number of centers with at least one sample within `3 sigma` (euclidean).
pub fn mode_coverage(samples: &Matrix, centers: &[Vec<f64>], sigma: f64) -> usize {
    let r2 = (3.0 * sigma) * (3.0 * sigma);
    centers
        .iter()
        .filter(|c| samples.iter_rows().any(|s| dist2(s, c) <= r2))
        .count()
}

/// Index of the closest center.
pub fn nearest_center(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = dist2(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fraction of `n_per_label` samples per label that land nearest their own label's center.
pub fn conditional_match_rate(pair: &GanPair, centers: &[Vec<f64>], n_per_label: usize, rng: &mut StreamRng) -> Result<f64> {
    let mut hits = 0;
    for k in 0..pair.n_classes.min(centers.len()) {
        let s = sample_synthetic(pair, k, n_per_label, rng)?;
        hits += s.iter_rows().filter(|r| nearest_center(r, centers) == k).count();
    }
    Ok(hits as f64 / (n_per_label * pair.n_classes.min(centers.len())) as f64)
}

/// Mean losses of one participant over one synchronization interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalLoss {
    pub round: u64,
    pub participant: usize,
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanRunReport {
    pub losses: Vec<IntervalLoss>,
    pub records: Vec<AggregationRecord>,
}

/// Trains the pair across the swarm; returns the post-final-sync global pair.
pub fn train_swarm_gan(
    data: &Dataset,
    partition: &Partition,
    template: &GanPair,
    hyper: &GanHyper,
    config: &SwarmConfig,
    train_seed: u64,
    aggregator: &dyn Aggregator,
) -> Result<(GanPair, GanRunReport)> {
    hyper.validate()?;
    partition.validate(data.len())?;
    let mut participants = swarm::register(template, partition.participants.clone(), train_seed)?;
    let step = |p: &mut ParticipantState<GanPair>, _: &StepContext<'_>| {
        let n = p.local_step_count;
        let (d, g) = local_gan_step(&mut p.model, data, &p.local_data, hyper, n, &mut p.rng)?;
        Ok(vec![d, g])
    };
    let run = swarm::run_swarm(&mut participants, &step, config, aggregator, false)?;
    let mut losses = Vec::new();
    for (round, per_part) in run.losses.iter().enumerate() {
        for (pid, steps) in per_part.iter().enumerate() {
            if steps.is_empty() {
                continue;
            }
            let n = steps.len() as f64;
            losses.push(IntervalLoss {
                round: round as u64,
                participant: pid,
                d_loss: steps.iter().map(|l| l[0]).sum::<f64>() / n,
                g_loss: steps.iter().map(|l| l[1]).sum::<f64>() / n,
            });
        }
    }
    let pair = participants.swap_remove(0).model;
    Ok((pair, GanRunReport { losses, records: run.records }))
}

/// Plain local loop over `local` with the stream participant 0 would use.
pub fn train_centralized_gan(
    data: &Dataset,
    local: &[usize],
    template: &GanPair,
    hyper: &GanHyper,
    steps: usize,
    train_seed: u64,
) -> Result<GanPair> {
    let mut pair = template.clone();
    let mut r = rng::stream(train_seed, names::TRAIN, 0);
    for n in 0..steps {
        local_gan_step(&mut pair, data, local, hyper, n as u64, &mut r)?;
    }
    Ok(pair)
}
