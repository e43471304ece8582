//! In-process swarm network: a static participant registry, per-sync coordinator
//! election, synchronization intervals and size-weighted aggregation.
//!
//! Time is a round counter. Each participant runs its local steps for the interval,
//! then a barrier: a coordinator drawn uniformly from a dedicated election stream
//! aggregates all parameters and every participant replaces its own with the result.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{MlpModel, ParamVector};
use crate::rng::{self, names, StreamRng};

/// Anything a participant can train locally and exchange as a flat vector.
pub trait SwarmModel: Clone + Send + Sync {
    fn params(&self) -> ParamVector;
    fn load_params(&mut self, params: &ParamVector) -> Result<()>;
}

impl SwarmModel for ParamVector {
    fn params(&self) -> ParamVector {
        self.clone()
    }

    fn load_params(&mut self, params: &ParamVector) -> Result<()> {
        self.check_same_layout(params)?;
        self.values.copy_from_slice(&params.values);
        Ok(())
    }
}

impl SwarmModel for MlpModel {
    fn params(&self) -> ParamVector {
        self.to_params()
    }

    fn load_params(&mut self, params: &ParamVector) -> Result<()> {
        self.set_params(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub n_participants: usize,
    /// Local steps between consecutive synchronizations (T).
    pub sync_interval: usize,
    /// Total local steps per participant over the run (N).
    pub local_steps: usize,
    pub election_seed: u64,
    /// `p_c = |X_c| / sum_j |X_j|`.
    pub aggregation_weights: Vec<f64>,
    /// Optional per-participant step count for every interval, overriding T.
    #[serde(default)]
    pub interval_steps: Option<Vec<usize>>,
}

impl SwarmConfig {
    pub fn new(sizes: &[usize], sync_interval: usize, local_steps: usize, election_seed: u64) -> Result<Self> {
        let cfg = SwarmConfig {
            n_participants: sizes.len(),
            sync_interval,
            local_steps,
            election_seed,
            aggregation_weights: weights_from_sizes(sizes)?,
            interval_steps: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_interval_steps(mut self, steps: Vec<usize>) -> Result<Self> {
        self.interval_steps = Some(steps);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_participants == 0 {
            return Err(Error::config("a swarm needs at least one participant"));
        }
        if self.sync_interval == 0 {
            return Err(Error::config("synchronization interval must be >= 1"));
        }
        if self.aggregation_weights.len() != self.n_participants {
            return Err(Error::config("one aggregation weight per participant required"));
        }
        if self.aggregation_weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::config("aggregation weights must be positive"));
        }
        let s: f64 = self.aggregation_weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("aggregation weights sum to {s}, not 1")));
        }
        if let Some(st) = &self.interval_steps {
            if st.len() != self.n_participants {
                return Err(Error::config("one interval step count per participant required"));
            }
            if st.contains(&0) {
                return Err(Error::config("interval step counts must be >= 1"));
            }
        }
        Ok(())
    }

    /// Number of synchronizations, `ceil(N / T)`; the last interval may be short.
    /// With per-participant interval steps, `T` is the largest of them.
    pub fn n_syncs(&self) -> u64 {
        match &self.interval_steps {
            Some(_) => self.local_steps.div_ceil(self.step_cap().max(1)) as u64,
            None => self.local_steps.div_ceil(self.sync_interval) as u64,
        }
    }

    /// Steps participant `p` runs in interval `sync_round`.
    pub fn steps_for(&self, p: usize, sync_round: u64) -> usize {
        match &self.interval_steps {
            Some(st) => st[p],
            None => {
                let done = sync_round as usize * self.sync_interval;
                self.sync_interval.min(self.local_steps.saturating_sub(done))
            }
        }
    }

    /// Largest number of local steps any participant can run between two aggregations.
    pub fn step_cap(&self) -> usize {
        match &self.interval_steps {
            Some(st) => st.iter().copied().max().unwrap_or(0),
            None => self.sync_interval.min(self.local_steps),
        }
    }
}

/// `p_c = |X_c| / sum_j |X_j|`.
pub fn weights_from_sizes(sizes: &[usize]) -> Result<Vec<f64>> {
    if sizes.is_empty() {
        return Err(Error::invalid("no participant sizes"));
    }
    if sizes.contains(&0) {
        return Err(Error::invalid("participant with zero samples"));
    }
    let total: usize = sizes.iter().sum();
    Ok(sizes.iter().map(|&s| s as f64 / total as f64).collect())
}

/// Uniform draw over participants from the election stream of `sync_round`.
pub fn elect_coordinator(n_participants: usize, election_seed: u64, sync_round: u64) -> usize {
    use rand::Rng;
    assert!(n_participants > 0, "election needs a participant");
    rng::stream(election_seed, names::ELECTION, sync_round).random_range(0..n_participants)
}

/// `sum_c p_c * theta_c`, element by element, in participant order.
pub fn aggregate_weighted(params: &[ParamVector], weights: &[f64]) -> Result<ParamVector> {
    let first = params.first().ok_or_else(|| Error::invalid("nothing to aggregate"))?;
    if params.len() != weights.len() {
        return Err(Error::invalid(format!("{} parameter vectors but {} weights", params.len(), weights.len())));
    }
    for p in &params[1..] {
        first.check_same_layout(p)?;
    }
    // seeded with the first term so a single weight of 1 is bit-exact (keeps -0.0)
    let mut out: Vec<f64> = first.values.iter().map(|v| weights[0] * v).collect();
    for (p, &w) in params.iter().zip(weights).skip(1) {
        for (o, v) in out.iter_mut().zip(&p.values) {
            *o += w * v;
        }
    }
    Ok(ParamVector { values: out, layout: first.layout.clone() })
}

/// The aggregation rule applied by the elected coordinator.
pub trait Aggregator: Sync {
    /// `global` is the parameter vector every participant started the interval from,
    /// `taus` the number of local steps each participant actually ran.
    fn aggregate(
        &self,
        global: &ParamVector,
        locals: &[ParamVector],
        weights: &[f64],
        taus: &[usize],
    ) -> Result<ParamVector>;
}

/// Plain size-weighted averaging.
#[derive(Debug, Clone, Copy, Default)]
pub struct WeightedAverage;

impl Aggregator for WeightedAverage {
    fn aggregate(&self, _: &ParamVector, locals: &[ParamVector], weights: &[f64], _: &[usize]) -> Result<ParamVector> {
        aggregate_weighted(locals, weights)
    }
}

pub struct ParticipantState<M> {
    pub id: usize,
    pub local_data: Vec<usize>,
    pub model: M,
    pub local_step_count: u64,
    /// Private training stream.
    pub rng: StreamRng,
}

impl<M: SwarmModel> ParticipantState<M> {
    pub fn new(id: usize, local_data: Vec<usize>, model: M, train_seed: u64) -> Self {
        ParticipantState { id, local_data, model, local_step_count: 0, rng: rng::stream(train_seed, names::TRAIN, id as u64) }
    }
}

/// Read-only view handed to a local training function at every step.
pub struct StepContext<'a> {
    pub sync_round: u64,
    pub step_in_interval: usize,
    /// Parameters all participants held at the start of this interval.
    pub global: &'a ParamVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationRecord {
    pub round: u64,
    pub coordinator_id: usize,
    pub weights_used: Vec<f64>,
    pub local_steps: Vec<usize>,
    pub pre_checksums: Vec<String>,
    pub post_checksum: String,
}

/// What one interval produced besides the new parameters.
#[derive(Debug, Clone)]
pub struct CycleOutput {
    pub record: AggregationRecord,
    /// `losses[participant][step]` as returned by the local training function.
    pub losses: Vec<Vec<Vec<f64>>>,
    /// Parameters after every local step, when logging was requested.
    pub step_params: Option<Vec<Vec<ParamVector>>>,
}

/// Runs one synchronization interval followed by aggregation.
///
/// `local_train` performs one local step and returns the loss values it wants logged.
pub fn run_sync_cycle<M, F>(
    participants: &mut [ParticipantState<M>],
    local_train: &F,
    config: &SwarmConfig,
    aggregator: &dyn Aggregator,
    sync_round: u64,
    log_params: bool,
) -> Result<CycleOutput>
where
    M: SwarmModel,
    F: Fn(&mut ParticipantState<M>, &StepContext<'_>) -> Result<Vec<f64>> + Sync,
{
    if participants.len() != config.n_participants {
        return Err(Error::invalid(format!(
            "{} participants registered, configuration expects {}",
            participants.len(),
            config.n_participants
        )));
    }
    let global = participants[0].model.params();
    let taus: Vec<usize> = (0..participants.len()).map(|p| config.steps_for(p, sync_round)).collect();

    let results: Vec<Result<(Vec<Vec<f64>>, Vec<ParamVector>)>> = participants
        .par_iter_mut()
        .zip(taus.par_iter())
        .map(|(part, &tau)| {
            let mut losses = Vec::with_capacity(tau);
            let mut logged = Vec::new();
            for step in 0..tau {
                let ctx = StepContext { sync_round, step_in_interval: step, global: &global };
                let l = local_train(part, &ctx).map_err(|e| match e {
                    Error::Divergence { detail, .. } => {
                        Error::Divergence { participant: part.id, round: sync_round, detail }
                    }
                    other => other,
                })?;
                part.local_step_count += 1;
                losses.push(l);
                if log_params {
                    logged.push(part.model.params());
                }
            }
            Ok((losses, logged))
        })
        .collect();

    let mut losses = Vec::with_capacity(participants.len());
    let mut step_params = Vec::with_capacity(participants.len());
    for r in results {
        let (l, p) = r?;
        losses.push(l);
        step_params.push(p);
    }

    let locals: Vec<ParamVector> = participants.iter().map(|p| p.model.params()).collect();
    for (p, v) in locals.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Divergence {
                participant: p,
                round: sync_round,
                detail: "non-finite parameters at synchronization".into(),
            });
        }
    }
    let coordinator_id = elect_coordinator(participants.len(), config.election_seed, sync_round);
    let aggregated = aggregator.aggregate(&global, &locals, &config.aggregation_weights, &taus)?;
    if !aggregated.is_finite() {
        return Err(Error::Divergence {
            participant: coordinator_id,
            round: sync_round,
            detail: "aggregate is non-finite".into(),
        });
    }
    for p in participants.iter_mut() {
        p.model.load_params(&aggregated)?;
    }
    let record = AggregationRecord {
        round: sync_round,
        coordinator_id,
        weights_used: config.aggregation_weights.clone(),
        local_steps: taus,
        pre_checksums: locals.iter().map(ParamVector::checksum).collect(),
        post_checksum: aggregated.checksum(),
    };
    Ok(CycleOutput { record, losses, step_params: log_params.then_some(step_params) })
}

/// Registers participants with identical initial models.
pub fn register<M: SwarmModel>(init: &M, local_sets: Vec<Vec<usize>>, train_seed: u64) -> Result<Vec<ParticipantState<M>>> {
    if local_sets.iter().any(Vec::is_empty) {
        return Err(Error::invalid("every participant needs local data"));
    }
    Ok(local_sets
        .into_iter()
        .enumerate()
        .map(|(id, data)| ParticipantState::new(id, data, init.clone(), train_seed))
        .collect())
}

/// Full run: every interval until the step budget is spent.
pub struct SwarmRun {
    pub records: Vec<AggregationRecord>,
    /// `losses[sync][participant][step]`.
    pub losses: Vec<Vec<Vec<Vec<f64>>>>,
    pub step_params: Vec<Vec<Vec<ParamVector>>>,
}

pub fn run_swarm<M, F>(
    participants: &mut [ParticipantState<M>],
    local_train: &F,
    config: &SwarmConfig,
    aggregator: &dyn Aggregator,
    log_params: bool,
) -> Result<SwarmRun>
where
    M: SwarmModel,
    F: Fn(&mut ParticipantState<M>, &StepContext<'_>) -> Result<Vec<f64>> + Sync,
{
    config.validate()?;
    let n_syncs = config.n_syncs();
    if n_syncs == 0 {
        return Err(Error::config("empty training budget"));
    }
    let mut run = SwarmRun { records: Vec::new(), losses: Vec::new(), step_params: Vec::new() };
    for round in 0..n_syncs {
        let out = run_sync_cycle(participants, local_train, config, aggregator, round, log_params)?;
        run.records.push(out.record);
        run.losses.push(out.losses);
        if let Some(p) = out.step_params {
            run.step_params.push(p);
        }
    }
    Ok(run)
}

/// One JSON object per line.
pub fn write_run_log(path: impl AsRef<std::path::Path>, records: &[AggregationRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_run_log(path: impl AsRef<std::path::Path>) -> Result<Vec<AggregationRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}
