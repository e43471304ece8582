//! Measurable quantities of the swarm GAN convergence argument.
//!
//! Gradients here are deterministic functions of the parameters and a row set:
//! every dataset row owns a fixed noise vector (the noise bank), so the "true"
//! gradient of a row set is its full-batch gradient and a stochastic gradient is
//! the gradient of a random subset. The pooled full-batch gradient over every
//! participant's rows plays the role of the true gradient `ĝ`; it is only
//! computable because the swarm is simulated.
//!
//! The interpolated sequences `(v_n, φ_n)` restart from the aggregated
//! parameters at every synchronization and follow the pooled gradient with the
//! same alternating D-then-G update used in training.

use std::path::Path;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::gan::{GanHyper, GanPair};
use crate::nn::{Matrix, ParamVector};
use crate::rng::{self, names, StreamRng};
use crate::swarm::{aggregate_weighted, elect_coordinator, AggregationRecord, SwarmConfig, SwarmModel};

/// One fixed noise row per dataset row.
pub fn noise_bank(n_rows: usize, noise_dim: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, names::DIAGNOSTICS, u64::MAX);
    let values = (0..n_rows * noise_dim).map(|_| StandardNormal.sample(&mut r)).collect();
    Matrix::from_vec(n_rows, noise_dim, values).expect("bank shape")
}

/// Deterministic GAN gradient field over rows of `data`.
pub struct GradientField<'a> {
    pub data: &'a Dataset,
    pub bank: &'a Matrix,
}

impl<'a> GradientField<'a> {
    pub fn new(data: &'a Dataset, bank: &'a Matrix) -> Result<Self> {
        if bank.rows() != data.len() {
            return Err(Error::invalid("noise bank needs one row per dataset row"));
        }
        Ok(GradientField { data, bank })
    }

    fn batch(&self, rows: &[usize]) -> (Matrix, Vec<usize>, Matrix) {
        let labels = rows.iter().map(|&i| self.data.labels[i]).collect();
        (self.data.features.select_rows(rows), labels, self.bank.select_rows(rows))
    }

    /// `(g_D, g_G)` at the current parameters, both evaluated before any update.
    pub fn gradients(&self, pair: &GanPair, rows: &[usize]) -> Result<(ParamVector, ParamVector)> {
        let (real, labels, noise) = self.batch(rows);
        let fake = pair.generate(&noise, &labels)?;
        let (_, gd) = pair.discriminator_gradient(&real, &fake, &labels)?;
        let (_, gg) = pair.generator_gradient(&noise, &labels)?;
        Ok((gd, gg))
    }

    /// Joint `g_D | g_G` as one vector.
    pub fn joint(&self, pair: &GanPair, rows: &[usize]) -> Result<ParamVector> {
        let (d, g) = self.gradients(pair, rows)?;
        Ok(d.concat(&g))
    }

    /// The alternating update used by training, on a fixed row set.
    pub fn step(&self, pair: &mut GanPair, rows: &[usize], lr_d: f64, lr_g: f64) -> Result<()> {
        let (real, labels, noise) = self.batch(rows);
        pair.adversarial_update(&real, &labels, &noise, lr_d, lr_g)?;
        Ok(())
    }
}

/// All rows of `local` (sorted) when `batch_size` covers them, otherwise a sorted
/// subset drawn without replacement.
pub fn draw_rows(local: &[usize], batch_size: usize, rng: &mut StreamRng) -> Vec<usize> {
    let mut rows: Vec<usize> = if batch_size >= local.len() {
        local.to_vec()
    } else {
        index::sample(rng, local.len(), batch_size).into_iter().map(|i| local[i]).collect()
    };
    rows.sort_unstable();
    rows
}

fn pooled_rows(partition: &Partition) -> Vec<usize> {
    let mut all: Vec<usize> = partition.participants.iter().flatten().copied().collect();
    all.sort_unstable();
    all
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub batch_size: usize,
    /// Stochastic-batch redraws per expectation.
    pub redraws: usize,
}

impl BatchPlan {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.redraws == 0 {
            return Err(Error::invalid("batch size and redraws must be >= 1"));
        }
        Ok(())
    }
}

/// Deviation of local stochastic gradients from the pooled full-batch gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientDeviation {
    /// Largest per-participant mean of `‖g_D^i − ĝ_D‖`.
    pub sigma_gd: f64,
    pub sigma_gg: f64,
    /// Largest single observation of `‖g_D^i − ĝ_D‖`.
    pub mu_gd: f64,
    /// Standard errors of the two means at the participant attaining the maximum.
    pub sigma_gd_stderr: f64,
    pub sigma_gg_stderr: f64,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Estimates the gradient-noise constants at the pair's current parameters.
pub fn estimate_assumption5(
    field: &GradientField<'_>,
    partition: &Partition,
    pair: &GanPair,
    plan: &BatchPlan,
    rng: &mut StreamRng,
) -> Result<GradientDeviation> {
    plan.validate()?;
    let (pd, pg) = field.gradients(pair, &pooled_rows(partition))?;
    let mut out = GradientDeviation { sigma_gd: 0.0, sigma_gg: 0.0, mu_gd: 0.0, sigma_gd_stderr: 0.0, sigma_gg_stderr: 0.0 };
    for local in &partition.participants {
        let mut ed = Vec::with_capacity(plan.redraws);
        let mut eg = Vec::with_capacity(plan.redraws);
        for _ in 0..plan.redraws {
            let rows = draw_rows(local, plan.batch_size, rng);
            let (d, g) = field.gradients(pair, &rows)?;
            ed.push(d.sub(&pd)?.norm());
            eg.push(g.sub(&pg)?.norm());
        }
        let (md, sd) = mean_stderr(&ed);
        let (mg, sg) = mean_stderr(&eg);
        if md > out.sigma_gd || (md == out.sigma_gd && sd > out.sigma_gd_stderr) {
            out.sigma_gd = md;
            out.sigma_gd_stderr = sd;
        }
        if mg > out.sigma_gg || (mg == out.sigma_gg && sg > out.sigma_gg_stderr) {
            out.sigma_gg = mg;
            out.sigma_gg_stderr = sg;
        }
        out.mu_gd = ed.iter().copied().fold(out.mu_gd, f64::max);
    }
    Ok(out)
}

/// Lower bound on the Lipschitz constant of `grad` around `at`: the largest
/// `‖g(θ) − g(θ + δ_k)‖ / ‖δ_k‖` over `n_probes` random directions of length `scale`.
///
/// Probe `k` depends only on the first `k` draws from `rng`, so more probes from
/// the same stream never lower the estimate.
pub fn lipschitz_probe<G>(grad: G, at: &ParamVector, n_probes: usize, scale: f64, rng: &mut StreamRng) -> Result<f64>
where
    G: Fn(&ParamVector) -> Result<ParamVector>,
{
    if n_probes == 0 {
        return Err(Error::invalid("need at least one probe"));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!("perturbation scale must be finite and > 0, got {scale}")));
    }
    let g0 = grad(at)?;
    let mut best = 0.0f64;
    for _ in 0..n_probes {
        let dir: Vec<f64> = (0..at.len()).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut delta = ParamVector::new(dir.iter().map(|v| v * scale / norm).collect(), at.layout.clone())?;
        let mut probe = at.clone();
        probe.add_scaled(1.0, &delta)?;
        // measure the step actually taken after rounding
        delta = probe.sub(at)?;
        let dn = delta.norm();
        if dn == 0.0 {
            continue;
        }
        let ratio = grad(&probe)?.sub(&g0)?.norm() / dn;
        best = best.max(ratio);
    }
    Ok(best)
}

/// Largest number of local steps any participant ran between two aggregations.
pub fn alpha_audit(records: &[AggregationRecord]) -> usize {
    records.iter().flat_map(|r| r.local_steps.iter().copied()).max().unwrap_or(0)
}

/// Per-step parameters of one synchronization interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalLog {
    pub round: u64,
    /// Aggregated joint `θ_D | θ_G` every participant starts from.
    pub start: ParamVector,
    /// Each participant's local step counter at the start of the interval.
    pub start_step: Vec<u64>,
    /// `trajectories[participant][redraw][j]` is the state after local step `j + 1`.
    pub trajectories: Vec<Vec<Vec<ParamVector>>>,
    /// Rows used by each of those steps.
    pub batches: Vec<Vec<Vec<Vec<usize>>>>,
}

/// A GAN swarm run with every local step recorded. Redraw 0 is the run itself;
/// further redraws replay each interval from the same start with fresh batches
/// and only feed expectations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticRun {
    pub intervals: Vec<IntervalLog>,
    pub records: Vec<AggregationRecord>,
    pub weights: Vec<f64>,
    pub hyper: GanHyper,
    pub n_discriminator_layers: usize,
}

impl DiagnosticRun {
    pub fn validate(&self) -> Result<()> {
        if self.intervals.len() != self.records.len() {
            return Err(Error::invalid("one aggregation record per logged interval required"));
        }
        for (iv, rec) in self.intervals.iter().zip(&self.records) {
            if iv.trajectories.len() != rec.local_steps.len() || iv.batches.len() != rec.local_steps.len() {
                return Err(Error::invalid(format!("interval {} is missing participants", iv.round)));
            }
            for (p, &tau) in rec.local_steps.iter().enumerate() {
                let redraws = &iv.trajectories[p];
                if redraws.is_empty() || iv.batches[p].len() != redraws.len() {
                    return Err(Error::invalid(format!("interval {} participant {p} has no redraws", iv.round)));
                }
                for (t, b) in redraws.iter().zip(&iv.batches[p]) {
                    if t.len() != tau || b.len() != tau {
                        return Err(Error::invalid(format!(
                            "interval {} participant {p}: {} logged steps, {tau} recorded",
                            iv.round,
                            t.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Trains a GAN across the swarm on the deterministic field, logging every step.
pub fn record_diagnostic_run(
    field: &GradientField<'_>,
    partition: &Partition,
    template: &GanPair,
    hyper: &GanHyper,
    config: &SwarmConfig,
    redraws: usize,
    seed: u64,
) -> Result<DiagnosticRun> {
    hyper.validate()?;
    config.validate()?;
    partition.validate(field.data.len())?;
    if redraws == 0 {
        return Err(Error::invalid("redraws must be >= 1"));
    }
    if partition.n_participants() != config.n_participants {
        return Err(Error::invalid("partition and swarm configuration disagree on participant count"));
    }
    let n_syncs = config.n_syncs();
    if n_syncs == 0 {
        return Err(Error::config("empty training budget"));
    }
    let n = config.n_participants;
    let mut global = template.clone();
    let mut step_count = vec![0u64; n];
    let mut run = DiagnosticRun {
        intervals: Vec::new(),
        records: Vec::new(),
        weights: config.aggregation_weights.clone(),
        hyper: hyper.clone(),
        n_discriminator_layers: template.n_discriminator_layers(),
    };
    for round in 0..n_syncs {
        let taus: Vec<usize> = (0..n).map(|p| config.steps_for(p, round)).collect();
        let start = global.params();
        let per_participant: Vec<Result<(Vec<Vec<ParamVector>>, Vec<Vec<Vec<usize>>>)>> = (0..n)
            .into_par_iter()
            .map(|p| {
                let mut trajs = Vec::with_capacity(redraws);
                let mut batches = Vec::with_capacity(redraws);
                for r in 0..redraws {
                    let mut rng = rng::stream(seed, names::DIAGNOSTICS, (round * n as u64 + p as u64) * redraws as u64 + r as u64);
                    let mut pair = global.clone();
                    let mut traj = Vec::with_capacity(taus[p]);
                    let mut rows_log = Vec::with_capacity(taus[p]);
                    for j in 0..taus[p] {
                        let k = step_count[p] + j as u64;
                        let rows = draw_rows(&partition.participants[p], hyper.batch_size, &mut rng);
                        field.step(&mut pair, &rows, hyper.d_schedule.lr_at(k), hyper.g_schedule.lr_at(k))?;
                        let params = pair.params();
                        if !params.is_finite() {
                            return Err(Error::Divergence { participant: p, round, detail: "non-finite parameters".into() });
                        }
                        traj.push(params);
                        rows_log.push(rows);
                    }
                    trajs.push(traj);
                    batches.push(rows_log);
                }
                Ok((trajs, batches))
            })
            .collect();
        let mut trajectories = Vec::with_capacity(n);
        let mut batches = Vec::with_capacity(n);
        for r in per_participant {
            let (t, b) = r?;
            trajectories.push(t);
            batches.push(b);
        }
        let locals: Vec<ParamVector> =
            trajectories.iter().map(|t| t[0].last().cloned().unwrap_or_else(|| start.clone())).collect();
        let aggregated = aggregate_weighted(&locals, &config.aggregation_weights)?;
        global.load_params(&aggregated)?;
        run.records.push(AggregationRecord {
            round,
            coordinator_id: elect_coordinator(n, config.election_seed, round),
            weights_used: config.aggregation_weights.clone(),
            local_steps: taus.clone(),
            pre_checksums: locals.iter().map(ParamVector::checksum).collect(),
            post_checksum: aggregated.checksum(),
        });
        run.intervals.push(IntervalLog { round, start, start_step: step_count.clone(), trajectories, batches });
        for (c, t) in step_count.iter_mut().zip(&taus) {
            *c += *t as u64;
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEstimates {
    pub sigma_gd: f64,
    pub sigma_gg: f64,
    pub mu_gd: f64,
    pub lipschitz_lb: f64,
    pub alpha_observed: usize,
    /// Largest `‖θ‖` seen anywhere in the run (boundedness monitor).
    pub max_param_norm: f64,
}

/// Constants measured along a recorded run: σ is the largest expectation (mean over
/// redraws) at any logged step, μ the largest single deviation, L the largest probe
/// ratio at the interval starts.
pub fn estimate_run_constants(
    field: &GradientField<'_>,
    partition: &Partition,
    template: &GanPair,
    run: &DiagnosticRun,
    n_probes: usize,
    perturbation: f64,
    seed: u64,
) -> Result<AssumptionEstimates> {
    run.validate()?;
    let pooled = pooled_rows(partition);
    let split = |v: &ParamVector| -> Result<GanPair> {
        let mut p = template.clone();
        p.load_params(v)?;
        Ok(p)
    };
    let mut est = AssumptionEstimates {
        sigma_gd: 0.0,
        sigma_gg: 0.0,
        mu_gd: 0.0,
        lipschitz_lb: 0.0,
        alpha_observed: alpha_audit(&run.records),
        max_param_norm: 0.0,
    };
    for iv in &run.intervals {
        est.max_param_norm = est.max_param_norm.max(iv.start.norm());
        let per_p: Vec<Result<(f64, f64, f64, f64)>> = iv
            .trajectories
            .par_iter()
            .zip(&iv.batches)
            .map(|(trajs, batches)| {
                let tau = trajs[0].len();
                let (mut sd, mut sg, mut mu, mut norm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
                for j in 0..tau {
                    let mut ed = 0.0;
                    let mut eg = 0.0;
                    for (t, b) in trajs.iter().zip(batches) {
                        let state = if j == 0 { &iv.start } else { &t[j - 1] };
                        norm = norm.max(t[j].norm());
                        let pair = split(state)?;
                        let (pd, pg) = field.gradients(&pair, &pooled)?;
                        let (d, g) = field.gradients(&pair, &b[j])?;
                        let dd = d.sub(&pd)?.norm();
                        ed += dd;
                        eg += g.sub(&pg)?.norm();
                        mu = mu.max(dd);
                    }
                    let r = trajs.len() as f64;
                    sd = sd.max(ed / r);
                    sg = sg.max(eg / r);
                }
                Ok((sd, sg, mu, norm))
            })
            .collect();
        for r in per_p {
            let (sd, sg, mu, norm) = r?;
            est.sigma_gd = est.sigma_gd.max(sd);
            est.sigma_gg = est.sigma_gg.max(sg);
            est.mu_gd = est.mu_gd.max(mu);
            est.max_param_norm = est.max_param_norm.max(norm);
        }
        let mut rng = rng::stream(seed, names::DIAGNOSTICS, iv.round);
        let l = lipschitz_probe(|v| field.joint(&split(v)?, &pooled), &iv.start, n_probes, perturbation, &mut rng)?;
        est.lipschitz_lb = est.lipschitz_lb.max(l);
    }
    Ok(est)
}

/// `(c / 2L)·[(1 + 2·lr·L)^m − 1]`, with its `L → 0` limit `c·lr·m`.
pub fn growth_bound(c: f64, lr: f64, l: f64, m: u32) -> f64 {
    if l == 0.0 {
        return c * lr * m as f64;
    }
    c / (2.0 * l) * ((1.0 + 2.0 * lr * l).powi(m as i32) - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPoint {
    pub round: u64,
    pub participant: usize,
    /// Local steps since the interval's aggregation.
    pub step_in_interval: usize,
    /// The participant's global step count `n`.
    pub step: u64,
    /// `E‖θ_D^i − v_n‖ + E‖θ_G^i − φ_n‖`.
    pub drift: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageDriftPoint {
    pub round: u64,
    pub step_in_interval: usize,
    pub step: u64,
    /// Same as [`DriftPoint::drift`] for the size-weighted average of all participants.
    pub drift: f64,
    /// Interval-level bound as printed, including the subtracted `lr·μ·K` term.
    pub bound: f64,
    /// The same bound without the subtracted term.
    pub bound_loose: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTrace {
    pub k: usize,
    pub constants: AssumptionEstimates,
    pub points: Vec<DriftPoint>,
    /// Empty when participants run different step counts in an interval.
    pub average_points: Vec<AverageDriftPoint>,
}

impl DriftTrace {
    pub fn max_drift_at_sync(&self) -> f64 {
        self.points.iter().filter(|p| p.step_in_interval == 0).map(|p| p.drift).fold(0.0, f64::max)
    }

    pub fn max_drift(&self) -> f64 {
        self.points.iter().map(|p| p.drift).fold(0.0, f64::max)
    }

    /// Points where the per-participant drift exceeds its bound.
    pub fn violations(&self) -> Vec<&DriftPoint> {
        self.points.iter().filter(|p| p.drift > p.bound).collect()
    }

    pub fn average_violations(&self, loose: bool) -> Vec<&AverageDriftPoint> {
        self.average_points.iter().filter(|p| p.drift > if loose { p.bound_loose } else { p.bound }).collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_average_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for p in &self.average_points {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn split_dg(v: &ParamVector, d_layers: usize) -> Result<(ParamVector, ParamVector)> {
    v.split_layers(d_layers)
}

/// Integrates `(v_n, φ_n)` from every aggregation point on the pooled rows and
/// compares the recorded trajectories against it. `K` is the observed α.
pub fn track_drift(
    field: &GradientField<'_>,
    partition: &Partition,
    template: &GanPair,
    run: &DiagnosticRun,
    constants: &AssumptionEstimates,
) -> Result<DriftTrace> {
    run.validate()?;
    let pooled = pooled_rows(partition);
    let d_layers = run.n_discriminator_layers;
    let k = constants.alpha_observed;
    let c = constants.sigma_gd + constants.mu_gd + constants.sigma_gg;
    let l = constants.lipschitz_lb;
    let lr = |n: u64| run.hyper.d_schedule.lr_at(n).max(run.hyper.g_schedule.lr_at(n));
    let mut trace = DriftTrace { k, constants: constants.clone(), points: Vec::new(), average_points: Vec::new() };

    for (iv, rec) in run.intervals.iter().zip(&run.records) {
        // reference sequences, one per distinct (start step, length)
        let mut refs: Vec<(u64, usize, Vec<ParamVector>)> = Vec::new();
        for (p, &tau) in rec.local_steps.iter().enumerate() {
            let s = iv.start_step[p];
            if refs.iter().any(|(rs, rt, _)| *rs == s && *rt >= tau) {
                continue;
            }
            let mut pair = template.clone();
            pair.load_params(&iv.start)?;
            let mut seq = vec![iv.start.clone()];
            for j in 0..tau {
                let n = s + j as u64;
                field.step(&mut pair, &pooled, run.hyper.d_schedule.lr_at(n), run.hyper.g_schedule.lr_at(n))?;
                seq.push(pair.params());
            }
            refs.retain(|(rs, _, _)| *rs != s);
            refs.push((s, tau, seq));
        }
        let reference = |p: usize| -> &Vec<ParamVector> {
            &refs.iter().find(|(rs, rt, _)| *rs == iv.start_step[p] && *rt >= rec.local_steps[p]).expect("reference").2
        };

        for (p, &tau) in rec.local_steps.iter().enumerate() {
            let seq = reference(p);
            for j in 0..=tau {
                let (vd, vg) = split_dg(&seq[j], d_layers)?;
                let trajs = &iv.trajectories[p];
                let mut dd = 0.0;
                let mut dg = 0.0;
                for t in trajs {
                    let state = if j == 0 { &iv.start } else { &t[j - 1] };
                    let (sd, sg) = split_dg(state, d_layers)?;
                    dd += sd.sub(&vd)?.norm();
                    dg += sg.sub(&vg)?.norm();
                }
                let r = trajs.len() as f64;
                let n = iv.start_step[p] + j as u64;
                let bound = if j == 0 { 0.0 } else { growth_bound(c, lr(n - 1), l, j as u32) };
                trace.points.push(DriftPoint {
                    round: iv.round,
                    participant: p,
                    step_in_interval: j,
                    step: n,
                    drift: dd / r + dg / r,
                    bound,
                });
            }
        }

        let homogeneous = rec.local_steps.windows(2).all(|w| w[0] == w[1]) && iv.start_step.windows(2).all(|w| w[0] == w[1]);
        let redraws = iv.trajectories.iter().map(Vec::len).min().unwrap_or(0);
        if homogeneous && redraws > 0 {
            let tau = rec.local_steps[0];
            let seq = reference(0);
            for j in 0..=tau {
                let (vd, vg) = split_dg(&seq[j], d_layers)?;
                let mut dd = 0.0;
                let mut dg = 0.0;
                for r in 0..redraws {
                    let states: Vec<ParamVector> = iv
                        .trajectories
                        .iter()
                        .map(|t| if j == 0 { iv.start.clone() } else { t[r][j - 1].clone() })
                        .collect();
                    // the aggregation point itself is not re-averaged
                    let avg = if j == 0 { iv.start.clone() } else { aggregate_weighted(&states, &run.weights)? };
                    let (ad, ag) = split_dg(&avg, d_layers)?;
                    dd += ad.sub(&vd)?.norm();
                    dg += ag.sub(&vg)?.norm();
                }
                let n = iv.start_step[0] + j as u64;
                let (bound, bound_loose) = if j == 0 {
                    (0.0, 0.0)
                } else {
                    let rate = lr(n - 1);
                    let loose = growth_bound(c, rate, l, k as u32);
                    (loose - rate * constants.mu_gd * k as f64, loose)
                };
                trace.average_points.push(AverageDriftPoint {
                    round: iv.round,
                    step_in_interval: j,
                    step: n,
                    drift: dd / redraws as f64 + dg / redraws as f64,
                    bound,
                    bound_loose,
                });
            }
        }
    }
    Ok(trace)
}

/// Everything a drift study produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftStudy {
    pub constants: AssumptionEstimates,
    pub trace: DriftTrace,
    pub records: Vec<AggregationRecord>,
}

/// Records a run, measures its constants, and tracks drift against the bounds.
#[allow(clippy::too_many_arguments)]
pub fn drift_study(
    data: &Dataset,
    partition: &Partition,
    template: &GanPair,
    hyper: &GanHyper,
    config: &SwarmConfig,
    redraws: usize,
    n_probes: usize,
    perturbation: f64,
    seed: u64,
) -> Result<DriftStudy> {
    let bank = noise_bank(data.len(), template.noise_dim, seed);
    let field = GradientField::new(data, &bank)?;
    let run = record_diagnostic_run(&field, partition, template, hyper, config, redraws, seed)?;
    let constants = estimate_run_constants(&field, partition, template, &run, n_probes, perturbation, seed)?;
    let trace = track_drift(&field, partition, template, &run, &constants)?;
    Ok(DriftStudy { constants, trace, records: run.records })
}
