//! Run configuration documents.
//!
//! A run is described by one TOML document. Its SHA-256 (together with any seed
//! override given on the command line) is the config hash embedded in every output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{load_csv, make_gaussian_mixture, make_ring_mixture, Dataset};
use crate::error::{Error, Result};
use crate::gan::{GanArchitecture, GanHyper};
use crate::nn::LrSchedule;
use crate::trainer::ClassifierHyper;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every per-stage stream is split from it.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub partition: PartitionSpec,
    #[serde(default)]
    pub swarm: SwarmSpec,
    #[serde(default)]
    pub classifier: ClassifierSpec,
    #[serde(default)]
    pub gan: GanSpec,
    #[serde(default)]
    pub method: MethodSpec,
    #[serde(default)]
    pub eval: EvalSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Gaussian {
        n_per_class: usize,
        #[serde(default = "two")]
        n_classes: usize,
        #[serde(default = "two")]
        n_features: usize,
        #[serde(default = "default_separation")]
        separation: f64,
        /// Added to every feature of every row (uncentered features).
        #[serde(default)]
        offset: f64,
    },
    Ring {
        #[serde(default = "eight")]
        n_modes: usize,
        n_per_mode: usize,
        #[serde(default = "two_f")]
        radius: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    Csv {
        path: PathBuf,
        label_column: String,
    },
}

fn two() -> usize {
    2
}
fn eight() -> usize {
    8
}
fn two_f() -> f64 {
    2.0
}
fn default_separation() -> f64 {
    3.0
}
fn default_sigma() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub source: DatasetSource,
    /// Seed for synthetic generation and the train/test split. Kept apart from the
    /// master seed so runs over several master seeds share one dataset.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Label index treated as the positive class for AUC/F1.
    #[serde(default = "one")]
    pub positive_label: usize,
}

fn default_test_fraction() -> f64 {
    0.2
}
fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSpec {
    pub n_participants: usize,
    pub beta: f64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec { n_participants: 3, beta: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmSpec {
    /// Local steps between aggregations (T).
    pub sync_interval: usize,
    /// Local step budget per participant (N).
    pub local_steps: usize,
    /// Optional per-participant steps per interval.
    #[serde(default)]
    pub interval_steps: Option<Vec<usize>>,
}

impl Default for SwarmSpec {
    fn default() -> Self {
        SwarmSpec { sync_interval: 10, local_steps: 300, interval_steps: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSpec {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub schedule: LrSchedule,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        let h = ClassifierHyper::default();
        ClassifierSpec { hidden: h.hidden, batch_size: h.batch_size, schedule: h.schedule }
    }
}

impl ClassifierSpec {
    pub fn hyper(&self) -> ClassifierHyper {
        ClassifierHyper { hidden: self.hidden.clone(), batch_size: self.batch_size, schedule: self.schedule }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanSpec {
    pub noise_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub batch_size: usize,
    pub d_schedule: LrSchedule,
    pub g_schedule: LrSchedule,
    pub sync_interval: usize,
    pub local_steps: usize,
}

impl Default for GanSpec {
    fn default() -> Self {
        let a = GanArchitecture::default();
        let h = GanHyper::default();
        GanSpec {
            noise_dim: a.noise_dim,
            generator_hidden: a.generator_hidden,
            discriminator_hidden: a.discriminator_hidden,
            batch_size: h.batch_size,
            d_schedule: h.d_schedule,
            g_schedule: h.g_schedule,
            sync_interval: 10,
            local_steps: 3000,
        }
    }
}

impl GanSpec {
    pub fn architecture(&self) -> GanArchitecture {
        GanArchitecture {
            noise_dim: self.noise_dim,
            generator_hidden: self.generator_hidden.clone(),
            discriminator_hidden: self.discriminator_hidden.clone(),
        }
    }

    pub fn hyper(&self) -> GanHyper {
        GanHyper { batch_size: self.batch_size, d_schedule: self.d_schedule, g_schedule: self.g_schedule, d_steps_per_g_step: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vanilla,
    Slgan,
    Fedprox,
    Fednova,
    Mixup,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Vanilla, Method::Slgan, Method::Fedprox, Method::Fednova, Method::Mixup];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Slgan => "slgan",
            Method::Fedprox => "fedprox",
            Method::Fednova => "fednova",
            Method::Mixup => "mixup",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL.into_iter().find(|m| m.tag() == s).ok_or_else(|| {
            let tags: Vec<&str> = Method::ALL.iter().map(|m| m.tag()).collect();
            Error::config(format!("unknown method '{s}'; valid methods: {}", tags.join(", ")))
        })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: String,
    /// FedProx proximal coefficient.
    #[serde(default)]
    pub mu: Option<f64>,
    /// Mixup Beta(alpha, alpha) parameter.
    #[serde(default)]
    pub mixup_alpha: Option<f64>,
    /// Per-participant total after augmentation; planner default when absent.
    #[serde(default)]
    pub target_total: Option<usize>,
}

impl Default for MethodSpec {
    fn default() -> Self {
        MethodSpec { name: "vanilla".into(), mu: None, mixup_alpha: None, target_total: None }
    }
}

impl MethodSpec {
    pub fn method(&self) -> Result<Method> {
        Method::parse(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    #[serde(default = "half")]
    pub threshold: f64,
    /// Seeds used by the synthetic-utility protocol.
    #[serde(default = "default_eval_seeds")]
    pub seeds: Vec<u64>,
}

fn half() -> f64 {
    0.5
}
fn default_eval_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec { threshold: 0.5, seeds: default_eval_seeds() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Track drift during GAN training.
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "sixteen")]
    pub redraws: usize,
    #[serde(default = "eight")]
    pub lipschitz_probes: usize,
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
}

fn sixteen() -> usize {
    16
}
fn default_perturbation() -> f64 {
    1e-3
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec { enabled: false, redraws: 16, lipschitz_probes: 8, perturbation: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub betas: Vec<f64>,
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(RunConfig, String)> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.as_ref().display())))?;
        let mut cfg = RunConfig::from_toml(&text)?;
        if let DatasetSource::Csv { path: p, .. } = &mut cfg.dataset.source {
            if p.is_relative() {
                if let Some(dir) = path.as_ref().parent() {
                    *p = dir.join(&*p);
                }
            }
            if !p.exists() {
                return Err(Error::config(format!("dataset file {} does not exist", p.display())));
            }
        }
        Ok((cfg, text))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn method(&self) -> Result<Method> {
        self.method.method()
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        match &d.source {
            DatasetSource::Gaussian { n_per_class, n_classes, n_features, separation, offset } => {
                if !offset.is_finite() {
                    return Err(Error::config("gaussian offset must be finite"));
                }
                if *n_per_class == 0 || *n_classes < 2 || *n_features == 0 || !(separation.is_finite() && *separation >= 0.0) {
                    return Err(Error::config("gaussian dataset needs n_per_class >= 1, n_classes >= 2, n_features >= 1, separation >= 0"));
                }
            }
            DatasetSource::Ring { n_modes, n_per_mode, radius, sigma } => {
                if *n_modes < 2 || *n_per_mode == 0 || !(*radius > 0.0) || !(*sigma > 0.0) {
                    return Err(Error::config("ring dataset needs n_modes >= 2, n_per_mode >= 1, radius > 0, sigma > 0"));
                }
            }
            DatasetSource::Csv { .. } => {}
        }
        if !(d.test_fraction >= 0.0 && d.test_fraction < 1.0) {
            return Err(Error::config(format!("test_fraction must lie in [0, 1), got {}", d.test_fraction)));
        }
        let p = &self.partition;
        if p.n_participants == 0 {
            return Err(Error::config("n_participants must be >= 1"));
        }
        if !(p.beta.is_finite() && p.beta > 0.0) {
            return Err(Error::config(format!("beta must be finite and > 0, got {}", p.beta)));
        }
        if self.swarm.sync_interval == 0 || self.gan.sync_interval == 0 {
            return Err(Error::config("sync_interval must be >= 1"));
        }
        if let Some(st) = &self.swarm.interval_steps {
            if st.len() != p.n_participants || st.contains(&0) {
                return Err(Error::config("interval_steps needs one positive entry per participant"));
            }
        }
        self.classifier.hyper().validate()?;
        self.gan.hyper().validate()?;
        if self.gan.noise_dim == 0 {
            return Err(Error::config("gan noise_dim must be >= 1"));
        }
        let m = self.method()?;
        validate_method_params(m, &self.method)?;
        if !(self.eval.threshold.is_finite()) {
            return Err(Error::config("eval threshold must be finite"));
        }
        if self.diagnostics.redraws == 0 || self.diagnostics.lipschitz_probes == 0 {
            return Err(Error::config("diagnostics redraws and lipschitz_probes must be >= 1"));
        }
        if !(self.diagnostics.perturbation > 0.0) {
            return Err(Error::config("diagnostics perturbation must be > 0"));
        }
        if let Some(s) = &self.sweep {
            if s.betas.is_empty() || s.methods.is_empty() || s.seeds.is_empty() {
                return Err(Error::config("sweep lists (betas, methods, seeds) must all be non-empty"));
            }
            for b in &s.betas {
                if !(b.is_finite() && *b > 0.0) {
                    return Err(Error::config(format!("sweep beta must be finite and > 0, got {b}")));
                }
            }
            for name in &s.methods {
                validate_method_params(Method::parse(name)?, &self.method)?;
            }
        }
        Ok(())
    }

    pub fn build_dataset(&self) -> Result<Dataset> {
        match &self.dataset.source {
            DatasetSource::Gaussian { n_per_class, n_classes, n_features, separation, offset } => {
                let mut d = make_gaussian_mixture(*n_per_class, *n_classes, *n_features, *separation, self.dataset.seed)?;
                d.features.values_mut().iter_mut().for_each(|v| *v += offset);
                Ok(d)
            }
            DatasetSource::Ring { n_modes, n_per_mode, radius, sigma } => {
                make_ring_mixture(*n_modes, *n_per_mode, *radius, *sigma, self.dataset.seed)
            }
            DatasetSource::Csv { path, label_column } => load_csv(path, label_column),
        }
    }
}

fn validate_method_params(m: Method, spec: &MethodSpec) -> Result<()> {
    match m {
        Method::Fedprox => match spec.mu {
            Some(mu) if mu.is_finite() && mu >= 0.0 => Ok(()),
            Some(mu) => Err(Error::config(format!("fedprox mu must be finite and >= 0, got {mu}"))),
            None => Err(Error::config("method fedprox requires method.mu")),
        },
        Method::Mixup => match spec.mixup_alpha {
            Some(a) if a.is_finite() && a > 0.0 => Ok(()),
            Some(a) => Err(Error::config(format!("mixup alpha must be finite and > 0, got {a}"))),
            None => Err(Error::config("method mixup requires method.mixup_alpha")),
        },
        _ => Ok(()),
    }
}

/// Hex SHA-256 over the config bytes, plus the seed override when one was given.
pub fn config_hash(config_bytes: &[u8], seed_override: Option<u64>) -> String {
    let mut h = Sha256::new();
    h.update(config_bytes);
    if let Some(s) = seed_override {
        h.update(b"\nseed-override=");
        h.update(s.to_le_bytes());
    }
    hex::encode(h.finalize())
}
