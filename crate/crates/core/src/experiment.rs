//! End-to-end pipeline shared by the command line and the test suites:
//! dataset → split → partition → method-specific local data → swarm training → evaluation.

use serde::{Deserialize, Serialize};

use crate::augment::{apply_plan, make_plan, AugmentationPlan};
use crate::baselines::{mixup_augment_participant, FedNova, LambdaLaw, SoftDataset};
use crate::config::{Method, RunConfig};
use crate::data::{dirichlet_partition, stratified_split, Dataset, Partition};
use crate::error::{Error, Result};
use crate::gan::{train_swarm_gan, GanPair, GanRunReport};
use crate::metrics::EvalResult;
use crate::rng::{self, names};
use crate::swarm::{weights_from_sizes, Aggregator, SwarmConfig, WeightedAverage};
use crate::trainer::{classifier_template, evaluate, train_swarm_classifier, ClassifierHooks, ClassifierRunReport};

/// The data every method of one run shares.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Indices into `train`.
    pub partition: Partition,
}

impl Prepared {
    /// Test rows never reach a participant: the split is disjoint and every
    /// partition index addresses the training subset.
    pub fn check_isolation(&self) -> Result<()> {
        let mut seen = vec![false; self.train_indices.len() + self.test_indices.len()];
        for &i in self.train_indices.iter().chain(&self.test_indices) {
            if i >= seen.len() || seen[i] {
                return Err(Error::invalid("train and test indices overlap"));
            }
            seen[i] = true;
        }
        self.partition.validate(self.train.len())
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let full = cfg.build_dataset()?;
    if cfg.dataset.positive_label >= full.n_classes {
        return Err(Error::config(format!(
            "positive_label {} out of range for {} classes",
            cfg.dataset.positive_label, full.n_classes
        )));
    }
    let split = stratified_split(&full, cfg.dataset.test_fraction, &mut rng::stream(cfg.dataset.seed, names::SPLIT, 0))?;
    let train = full.subset(&split.train)?;
    let test = full.subset(&split.test)?;
    let partition = dirichlet_partition(&train, cfg.partition.n_participants, cfg.partition.beta, partition_seed(cfg.seed))?;
    let p = Prepared { train, test, train_indices: split.train, test_indices: split.test, partition };
    p.check_isolation()?;
    Ok(p)
}

pub fn partition_seed(master: u64) -> u64 {
    rng::sub_seed(master, names::PARTITION, 0)
}

/// Stream indices that separate the classifier's streams from the GAN's.
const CLASSIFIER: u64 = 0;
const GAN: u64 = 1;

pub fn gan_swarm_config(cfg: &RunConfig, partition: &Partition) -> Result<SwarmConfig> {
    SwarmConfig::new(&partition.sizes(), cfg.gan.sync_interval, cfg.gan.local_steps, rng::sub_seed(cfg.seed, names::ELECTION, GAN))
}

pub fn gan_template(cfg: &RunConfig, train: &Dataset) -> Result<GanPair> {
    GanPair::for_dataset(&cfg.gan.architecture(), train, &mut rng::stream(cfg.seed, names::INIT, GAN))
}

pub fn train_gan(cfg: &RunConfig, prepared: &Prepared) -> Result<(GanPair, GanRunReport)> {
    let template = gan_template(cfg, &prepared.train)?;
    let swarm = gan_swarm_config(cfg, &prepared.partition)?;
    train_swarm_gan(
        &prepared.train,
        &prepared.partition,
        &template,
        &cfg.gan.hyper(),
        &swarm,
        rng::sub_seed(cfg.seed, names::TRAIN, GAN),
        &WeightedAverage,
    )
}

pub fn augment_seed(master: u64) -> u64 {
    rng::sub_seed(master, names::AUGMENT, 0)
}

/// Per-participant local data for `method`, plus the plan when one was used.
pub struct LocalData {
    pub sets: Vec<SoftDataset>,
    pub plan: Option<AugmentationPlan>,
    pub gan: Option<(GanPair, GanRunReport)>,
}

fn real_sets(prepared: &Prepared) -> Result<Vec<SoftDataset>> {
    prepared.partition.participants.iter().map(|ix| Ok(SoftDataset::from(&prepared.train.subset(ix)?))).collect()
}

pub fn local_data(cfg: &RunConfig, prepared: &Prepared, method: Method, gan: Option<GanPair>) -> Result<LocalData> {
    match method {
        Method::Vanilla | Method::Fedprox | Method::Fednova => Ok(LocalData { sets: real_sets(prepared)?, plan: None, gan: None }),
        Method::Slgan => {
            let (pair, report) = match gan {
                Some(p) => (p, None),
                None => {
                    let (p, r) = train_gan(cfg, prepared)?;
                    (p, Some(r))
                }
            };
            let plan = make_plan(&prepared.partition, &prepared.train, cfg.method.target_total)?;
            let augmented = apply_plan(&plan, &prepared.partition, &prepared.train, &pair, augment_seed(cfg.seed))?;
            let sets = augmented
                .into_iter()
                .map(|a| SoftDataset::from_hard(a.dataset.features, &a.dataset.labels, a.dataset.n_classes, a.synthetic))
                .collect();
            Ok(LocalData { sets, plan: Some(plan), gan: report.map(|r| (pair, r)) })
        }
        Method::Mixup => {
            // Volume-matched to the GAN planner's quotas.
            let plan = make_plan(&prepared.partition, &prepared.train, cfg.method.target_total)?;
            let law = LambdaLaw { alpha: cfg.method.mixup_alpha.unwrap_or(1.0) };
            let sets = real_sets(prepared)?
                .iter()
                .enumerate()
                .map(|(p, local)| {
                    let n_new: usize = plan.per_participant_quota[p].iter().sum();
                    let mut r = rng::stream(augment_seed(cfg.seed), "mixup", p as u64);
                    mixup_augment_participant(local, n_new, law, &mut r)
                })
                .collect::<Result<_>>()?;
            Ok(LocalData { sets, plan: Some(plan), gan: None })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainEvalOutcome {
    pub method: Method,
    pub eval: EvalResult,
    pub classifier: ClassifierRunReport,
    pub local_sizes: Vec<usize>,
    pub plan: Option<AugmentationPlan>,
    pub gan: Option<GanRunReport>,
    /// Set when the swarm has a single participant, which is plain centralized training.
    pub degenerate: bool,
}

pub fn classifier_swarm_config(cfg: &RunConfig, sizes: &[usize]) -> Result<SwarmConfig> {
    let mut c = SwarmConfig::new(sizes, cfg.swarm.sync_interval, cfg.swarm.local_steps, rng::sub_seed(cfg.seed, names::ELECTION, CLASSIFIER))?;
    if let Some(st) = &cfg.swarm.interval_steps {
        c = c.with_interval_steps(st.clone())?;
    }
    Ok(c)
}

/// Trains and evaluates `method` on already prepared data.
pub fn train_eval_prepared(cfg: &RunConfig, prepared: &Prepared, method: Method, gan: Option<GanPair>) -> Result<TrainEvalOutcome> {
    let local = local_data(cfg, prepared, method, gan)?;
    let sizes: Vec<usize> = local.sets.iter().map(SoftDataset::len).collect();
    weights_from_sizes(&sizes)?;
    let swarm = classifier_swarm_config(cfg, &sizes)?;
    let hyper = cfg.classifier.hyper();
    let template = classifier_template(
        prepared.train.n_features(),
        prepared.train.n_classes,
        &hyper.hidden,
        &mut rng::stream(cfg.seed, names::INIT, CLASSIFIER),
    )?;
    let nova = FedNova;
    let aggregator: &dyn Aggregator = if method == Method::Fednova { &nova } else { &WeightedAverage };
    let prox_mu = if method == Method::Fedprox { Some(cfg.method.mu.unwrap_or(0.0)) } else { None };
    let hooks = ClassifierHooks { prox_mu, aggregator };
    let (model, report) =
        train_swarm_classifier(&local.sets, &template, &hyper, &swarm, rng::sub_seed(cfg.seed, names::TRAIN, CLASSIFIER), &hooks)?;
    let eval = evaluate(&model, &prepared.test, cfg.dataset.positive_label, cfg.eval.threshold)?;
    Ok(TrainEvalOutcome {
        method,
        eval,
        classifier: report,
        local_sizes: sizes,
        plan: local.plan,
        gan: local.gan.map(|g| g.1),
        degenerate: cfg.partition.n_participants == 1,
    })
}

pub fn train_eval(cfg: &RunConfig) -> Result<TrainEvalOutcome> {
    let prepared = prepare(cfg)?;
    train_eval_prepared(cfg, &prepared, cfg.method()?, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(beta: f64, method: &str) -> RunConfig {
        RunConfig::from_toml(&format!(
            "seed = 3\n[dataset]\nkind = \"gaussian\"\nn_per_class = 60\nseparation = 3.0\n\
             [partition]\nn_participants = 3\nbeta = {beta}\n\
             [swarm]\nsync_interval = 5\nlocal_steps = 60\n\
             [gan]\nnoise_dim = 4\ngenerator_hidden = [16]\ndiscriminator_hidden = [16]\nbatch_size = 16\n\
             d_schedule = {{ base = 0.05, decay = 0.003, form = \"inverse-time\" }}\n\
             g_schedule = {{ base = 0.05, decay = 0.003, form = \"inverse-time\" }}\n\
             sync_interval = 5\nlocal_steps = 40\n\
             [method]\nname = \"{method}\"\nmu = 0.0\nmixup_alpha = 1.0\n"
        ))
        .unwrap()
    }

    #[test]
    fn isolation_holds_and_split_is_stratified() {
        let p = prepare(&cfg(0.1, "vanilla")).unwrap();
        p.check_isolation().unwrap();
        assert_eq!(p.test.len(), 24);
        assert_eq!(p.test.histogram().counts, vec![12, 12]);
    }

    #[test]
    fn fedprox_with_zero_mu_equals_vanilla() {
        let a = train_eval(&cfg(0.5, "vanilla")).unwrap();
        let b = train_eval(&cfg(0.5, "fedprox")).unwrap();
        assert_eq!(a.eval, b.eval);
        assert_eq!(a.classifier, b.classifier);
    }

    #[test]
    fn every_method_runs() {
        for m in Method::ALL {
            let out = train_eval(&cfg(0.5, m.tag())).unwrap();
            assert!(out.eval.auc >= 0.0 && out.eval.auc <= 1.0);
            assert!(out.classifier.global_loss.iter().all(|l| l.is_finite()));
            if matches!(m, Method::Slgan | Method::Mixup) {
                let plan = out.plan.unwrap();
                for (p, &n) in out.local_sizes.iter().enumerate() {
                    assert_eq!(n, plan.final_counts(p).iter().sum::<usize>());
                }
            }
        }
    }
}
