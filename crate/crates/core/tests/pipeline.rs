//! Seeded end-to-end runs whose outcomes are checked by direction rather than value.

mod common;

use rayon::prelude::*;

use common::{mean, skewed_gaussian};
use swarm_gan::augment::{apply_plan, make_plan};
use swarm_gan::config::{Method, RunConfig};
use swarm_gan::data::{dirichlet_partition, make_gaussian_mixture, make_ring_mixture, Dataset, Partition};
use swarm_gan::diagnostics::{drift_study, estimate_assumption5, growth_bound, lipschitz_probe, noise_bank, BatchPlan, GradientField};
use swarm_gan::experiment::{prepare, train_eval_prepared};
use swarm_gan::gan::{GanArchitecture, GanHyper, GanPair};
use swarm_gan::rng;
use swarm_gan::swarm::SwarmConfig;
use swarm_gan::trainer::{synthetic_utility_eval, ClassifierTemplate, RealResampler};

fn blobs(seed: u64, beta: f64) -> RunConfig {
    RunConfig::from_toml(&format!(
        "seed = {seed}\n[dataset]\nkind = \"gaussian\"\nn_per_class = 150\nn_features = 2\nseparation = 4.0\n\
         [partition]\nn_participants = 3\nbeta = {beta}\n[swarm]\nsync_interval = 10\nlocal_steps = 300\n"
    ))
    .unwrap()
}

#[test]
fn iid_swarm_learns_separable_blobs() {
    for seed in 1..=3 {
        let cfg = blobs(seed, 1000.0);
        let out = train_eval_prepared(&cfg, &prepare(&cfg).unwrap(), Method::Vanilla, None).unwrap();
        assert!(out.eval.accuracy >= 0.95, "seed {seed}: accuracy {}", out.eval.accuracy);
    }
}

#[test]
fn label_skew_lowers_auc() {
    let auc = |beta: f64| {
        mean((1..=5u64).into_par_iter().map(|s| {
            let cfg = skewed_gaussian(s, beta, "vanilla");
            train_eval_prepared(&cfg, &prepare(&cfg).unwrap(), Method::Vanilla, None).unwrap().eval.auc
        }).collect::<Vec<_>>())
    };
    let (iid, skewed) = (auc(1000.0), auc(0.05));
    assert!(skewed < iid, "beta 0.05 {skewed} vs IID {iid}");
}

#[test]
fn augmentation_lowers_final_loss_under_skew() {
    for beta in [0.05, 0.1] {
        let losses: Vec<(f64, f64)> = (1..=5u64)
            .into_par_iter()
            .map(|s| {
                let cfg = skewed_gaussian(s, beta, "vanilla");
                let p = prepare(&cfg).unwrap();
                let last = |m| *train_eval_prepared(&cfg, &p, m, None).unwrap().classifier.global_loss.last().unwrap();
                (last(Method::Vanilla), last(Method::Slgan))
            })
            .collect();
        let vanilla = mean(losses.iter().map(|l| l.0));
        let augmented = mean(losses.iter().map(|l| l.1));
        assert!(augmented <= vanilla, "beta {beta}: augmented {augmented} vs vanilla {vanilla}");
    }
}

/// Total variation distance between a histogram's proportions and `target`.
fn tv(counts: &[usize], target: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    0.5 * counts.iter().zip(target).map(|(&c, t)| (c as f64 / n as f64 - t).abs()).sum::<f64>()
}

#[test]
fn augmentation_moves_participants_toward_global_proportions() {
    let d = make_gaussian_mixture(40, 4, 2, 3.0, 1).unwrap();
    let arch = GanArchitecture { noise_dim: 2, generator_hidden: vec![4], discriminator_hidden: vec![4] };
    let pair = GanPair::for_dataset(&arch, &d, &mut rng::stream(1, "init", 1)).unwrap();
    for beta in [0.05, 0.1, 0.5, 1.0] {
        for seed in 0..10 {
            let p = dirichlet_partition(&d, 3, beta, seed).unwrap();
            let plan = make_plan(&p, &d, None).unwrap();
            let out = apply_plan(&plan, &p, &d, &pair, seed).unwrap();
            for (ix, a) in p.participants.iter().zip(&out) {
                let before = tv(&d.subset(ix).unwrap().histogram().counts, &plan.global_proportions);
                let counts = a.dataset.histogram().counts;
                let total: usize = counts.iter().sum();
                // integer counts cannot match real-valued proportions exactly
                let rounding = d.n_classes as f64 / total as f64;
                let after = tv(&counts, &plan.global_proportions);
                assert!(after <= before + rounding, "beta {beta} seed {seed}: {before} -> {after}");
                if beta <= 0.1 {
                    assert!(a.dataset.histogram().entropy() >= d.subset(ix).unwrap().histogram().entropy() - 1e-12);
                }
            }
        }
    }
}

fn ring_pair(data: &Dataset, seed: u64) -> GanPair {
    let arch = GanArchitecture { noise_dim: 4, generator_hidden: vec![16], discriminator_hidden: vec![16] };
    GanPair::for_dataset(&arch, data, &mut rng::stream(seed, "init", 1)).unwrap()
}

#[test]
fn non_iid_split_has_larger_gradient_divergence() {
    let mut iid = Vec::new();
    let mut skewed = Vec::new();
    for seed in 1..=5u64 {
        let data = make_ring_mixture(8, 40, 2.0, 0.05, seed).unwrap();
        let bank = noise_bank(data.len(), 4, seed);
        let field = GradientField::new(&data, &bank).unwrap();
        let pair = ring_pair(&data, seed);
        let plan = BatchPlan { batch_size: 16, redraws: 16 };
        let mu = |p: &Partition| estimate_assumption5(&field, p, &pair, &plan, &mut rng::stream(seed, "diagnostics", 0)).unwrap().mu_gd;
        iid.push(mu(&dirichlet_partition(&data, 3, 1000.0, seed).unwrap()));
        skewed.push(mu(&dirichlet_partition(&data, 3, 0.05, seed).unwrap()));
    }
    assert!(mean(skewed.clone()) > mean(iid.clone()), "non-IID {skewed:?} vs IID {iid:?}");
}

#[test]
fn larger_batches_reduce_gradient_noise() {
    let data = make_ring_mixture(8, 40, 2.0, 0.05, 3).unwrap();
    let bank = noise_bank(data.len(), 4, 3);
    let field = GradientField::new(&data, &bank).unwrap();
    let pair = ring_pair(&data, 3);
    let one = Partition { beta: 1.0, seed: 0, participants: vec![(0..data.len()).collect()], proportions: vec![], attempt: 0 };
    let sigmas: Vec<f64> = [8, 32, 128, data.len()]
        .iter()
        .map(|&b| {
            let plan = BatchPlan { batch_size: b, redraws: 64 };
            estimate_assumption5(&field, &one, &pair, &plan, &mut rng::stream(3, "diagnostics", 0)).unwrap().sigma_gd
        })
        .collect();
    assert!(sigmas.windows(2).all(|w| w[1] <= w[0]), "{sigmas:?}");
    assert_eq!(*sigmas.last().unwrap(), 0.0);
}

#[test]
fn more_probes_never_lower_the_lipschitz_estimate() {
    let data = make_ring_mixture(4, 20, 2.0, 0.05, 1).unwrap();
    let bank = noise_bank(data.len(), 4, 1);
    let field = GradientField::new(&data, &bank).unwrap();
    let pair = ring_pair(&data, 1);
    let rows: Vec<usize> = (0..data.len()).collect();
    let at = swarm_gan::swarm::SwarmModel::params(&pair);
    let mut last = 0.0;
    for n in 1..=8 {
        let grad = |v: &swarm_gan::nn::ParamVector| {
            let mut p = pair.clone();
            swarm_gan::swarm::SwarmModel::load_params(&mut p, v)?;
            field.joint(&p, &rows)
        };
        let l = lipschitz_probe(grad, &at, n, 1e-3, &mut rng::stream(1, "probe", 0)).unwrap();
        assert!(l >= last, "{n} probes: {l} < {last}");
        last = l;
    }
}

#[test]
fn bound_grows_within_each_interval() {
    for m in 0..20u32 {
        assert!(growth_bound(1.0, 0.05, 2.0, m + 1) > growth_bound(1.0, 0.05, 2.0, m));
    }
    let data = make_ring_mixture(4, 20, 2.0, 0.05, 2).unwrap();
    let part = dirichlet_partition(&data, 3, 0.1, 2).unwrap();
    let hyper = GanHyper { batch_size: 8, ..GanHyper::default() };
    let cfg = SwarmConfig::new(&part.sizes(), 5, 20, 2).unwrap();
    let study = drift_study(&data, &part, &ring_pair(&data, 2), &hyper, &cfg, 4, 4, 1e-3, 2).unwrap();
    let pts = &study.trace.points;
    for w in pts.windows(2) {
        if w[0].round == w[1].round && w[0].participant == w[1].participant {
            assert!(w[1].step_in_interval > w[0].step_in_interval);
            assert!(w[1].bound >= w[0].bound, "{:?} then {:?}", w[0], w[1]);
        }
    }
    assert!(pts.iter().all(|p| p.drift >= 0.0));
    assert_eq!(study.trace.k, 5);
}

#[test]
fn resampled_real_rows_match_real_training() {
    let cfg = blobs(1, 1.0);
    let p = prepare(&cfg).unwrap();
    let counts = p.train.histogram().counts;
    let t = synthetic_utility_eval(&RealResampler(&p.train), &p.train, &p.test, &counts, &ClassifierTemplate::default_set(), &[1, 2, 3])
        .unwrap();
    assert!((t.average_synthetic - t.average_real).abs() <= 0.02, "{t:?}");
}

#[test]
fn untrained_generators_are_no_better_than_guessing() {
    let cfg = RunConfig::from_toml(
        "seed = 4\n[dataset]\nkind = \"gaussian\"\nn_per_class = 100\nn_classes = 3\nseparation = 4.0\n",
    )
    .unwrap();
    let p = prepare(&cfg).unwrap();
    let counts = p.train.histogram().counts;
    // any one random network may line up with the classes by chance; average over initializations
    let tables: Vec<_> = (0..10u64)
        .into_par_iter()
        .map(|g| {
            let pair = GanPair::for_dataset(&GanArchitecture::default(), &p.train, &mut rng::stream(g, "init", 1)).unwrap();
            synthetic_utility_eval(&pair, &p.train, &p.test, &counts, &ClassifierTemplate::default_set(), &[1, 2, 3]).unwrap()
        })
        .collect();
    let utility = mean(tables.iter().map(|t| t.average_synthetic));
    let majority = tables[0].majority_rate;
    assert!(utility <= majority + 0.05, "utility {utility} vs majority {majority}");
}
