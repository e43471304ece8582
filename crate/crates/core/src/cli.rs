//! Command line front end: one subcommand per pipeline stage.
//!
//! Every file a command writes lands in `--out` and carries the config hash, either
//! inline (JSON documents, CSV column) or, for data CSVs that must stay loadable,
//! through `manifest.json`, which lists each file with its SHA-256.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::augment::apply_plan;
use crate::config::{config_hash, DatasetSource, Method, RunConfig};
use crate::data::{ring_centers, write_csv, Partition};
use crate::diagnostics::drift_study;
use crate::error::{Error, Result};
use crate::experiment::{self, gan_swarm_config, gan_template, prepare, train_eval_prepared, Prepared};
use crate::gan::{conditional_match_rate, mode_coverage, sample_synthetic, GanPair};
use crate::rng::{self, names};
use crate::swarm::write_run_log;
use crate::trainer::{synthetic_utility_eval, ClassifierTemplate};

pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REPORT_FORMAT: &str = "swarm-gan/run-report";
pub const SCHEMA_VERSION: u32 = 1;
/// The one report field allowed to differ between identical runs.
pub const WALL_TIME_FIELD: &str = "wall_time_seconds";
pub const DEGENERATE_NOTE: &str = "degenerate swarm (centralized)";

#[derive(Debug, Parser)]
#[command(name = "swarm-gan", version, about = "Swarm learning with GAN-based label rebalancing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the master seed in the config; folded into the config hash.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split the training data across participants.
    Partition(Common),
    /// Train the conditional GAN across the swarm.
    TrainGan(Common),
    /// Rebalance each participant's data with a trained generator.
    Augment {
        #[command(flatten)]
        common: Common,
        /// GAN file written by `train-gan` with the same config.
        #[arg(long)]
        gan: PathBuf,
    },
    /// Train the target classifier with the configured method and evaluate it.
    TrainEval {
        #[command(flatten)]
        common: Common,
        /// Reuse a GAN from `train-gan` (slgan only).
        #[arg(long)]
        gan: Option<PathBuf>,
    },
    /// Run the grid of betas × methods × seeds from the config's [sweep] table.
    Sweep(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Partition(c) | Command::TrainGan(c) | Command::Sweep(c) => c,
            Command::Augment { common, .. } | Command::TrainEval { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Partition(_) => "partition",
            Command::TrainGan(_) => "train-gan",
            Command::Augment { .. } => "augment",
            Command::TrainEval { .. } => "train-eval",
            Command::Sweep(_) => "sweep",
        }
    }
}

/// A validated config plus its identity.
pub struct Loaded {
    pub config: RunConfig,
    pub text: String,
    pub hash: String,
}

pub fn load(common: &Common) -> Result<Loaded> {
    let (mut config, text) = RunConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        config.seed = s;
    }
    let hash = config_hash(text.as_bytes(), common.seed);
    Ok(Loaded { config, text, hash })
}

/// Runs one command and returns the path of its report.
pub fn run(cli: Cli) -> Result<PathBuf> {
    let common = cli.command.common().clone();
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(Error::config("--threads must be >= 1"));
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let loaded = load(&common)?;
    std::fs::create_dir_all(&common.out)?;
    let started = Instant::now();
    log::info!("{} with config hash {}", cli.command.name(), loaded.hash);
    let body = match &cli.command {
        Command::Partition(_) => cmd_partition(&loaded, &common.out)?,
        Command::TrainGan(_) => cmd_train_gan(&loaded, &common.out)?,
        Command::Augment { gan, .. } => cmd_augment(&loaded, &common.out, gan)?,
        Command::TrainEval { gan, .. } => cmd_train_eval(&loaded, &common.out, gan.as_deref())?,
        Command::Sweep(_) => cmd_sweep(&loaded, &common.out)?,
    };
    let report = envelope(&loaded, cli.command.name(), body, started.elapsed().as_secs_f64());
    let path = common.out.join("report.json");
    write_json(&path, &report)?;
    write_manifest(&common.out, &loaded.hash)?;
    Ok(path)
}

fn envelope(loaded: &Loaded, command: &str, body: Value, wall: f64) -> Value {
    let mut notes = Vec::new();
    if loaded.config.partition.n_participants == 1 {
        notes.push(DEGENERATE_NOTE);
    }
    json!({
        "format": REPORT_FORMAT,
        "schema_version": SCHEMA_VERSION,
        "software_version": SOFTWARE_VERSION,
        "command": command,
        "config_hash": loaded.hash,
        "seed": loaded.config.seed,
        "config_echo": loaded.text,
        "notes": notes,
        "result": body,
        "wall_time_seconds": wall,
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    sha256: String,
}

/// Lists every file in `out` except the manifest itself and the report (whose only
/// varying field is wall time).
fn write_manifest(out: &Path, hash: &str) -> Result<()> {
    let mut names: Vec<String> = std::fs::read_dir(out)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n != "manifest.json" && n != "report.json")
        .collect();
    names.sort();
    let mut entries = Vec::with_capacity(names.len());
    for n in names {
        let bytes = std::fs::read(out.join(&n))?;
        entries.push(ManifestEntry { file: n, sha256: hex::encode(Sha256::digest(&bytes)) });
    }
    write_json(&out.join("manifest.json"), &json!({ "config_hash": hash, "files": entries }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PartitionFile {
    pub config_hash: String,
    pub partition: Partition,
}

fn histogram_rows(prepared: &Prepared) -> Result<Vec<Vec<usize>>> {
    prepared.partition.participants.iter().map(|ix| Ok(prepared.train.subset(ix)?.histogram().counts)).collect()
}

fn cmd_partition(loaded: &Loaded, out: &Path) -> Result<Value> {
    let prepared = prepare(&loaded.config)?;
    write_json(
        &out.join("partition.json"),
        &PartitionFile { config_hash: loaded.hash.clone(), partition: prepared.partition.clone() },
    )?;
    let hist = histogram_rows(&prepared)?;
    let mut w = csv::Writer::from_path(out.join("histogram.csv"))?;
    let mut header = vec!["config_hash".to_string(), "participant".to_string()];
    header.extend((0..prepared.train.n_classes).map(|k| format!("label_{k}")));
    header.push("total".into());
    w.write_record(&header)?;
    for (p, counts) in hist.iter().enumerate() {
        let mut row = vec![loaded.hash.clone(), p.to_string()];
        row.extend(counts.iter().map(ToString::to_string));
        row.push(counts.iter().sum::<usize>().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(json!({
        "n_train": prepared.train.len(),
        "n_test": prepared.test.len(),
        "beta": prepared.partition.beta,
        "attempt": prepared.partition.attempt,
        "histograms": hist,
    }))
}

fn cmd_train_gan(loaded: &Loaded, out: &Path) -> Result<Value> {
    let cfg = &loaded.config;
    let prepared = prepare(cfg)?;
    let (pair, report) = experiment::train_gan(cfg, &prepared)?;
    pair.save(out.join("gan.json"), Some(&loaded.hash))?;
    write_run_log(out.join("run_log.jsonl"), &report.records)?;

    let mut body = json!({
        "losses": report.losses,
        "records": report.records,
        "final_d_loss": report.losses.last().map(|l| l.d_loss),
        "final_g_loss": report.losses.last().map(|l| l.g_loss),
    });
    if let DatasetSource::Ring { n_modes, radius, sigma, .. } = cfg.dataset.source {
        let centers = ring_centers(n_modes, radius);
        let mut r = rng::stream(cfg.seed, names::EVAL, 0);
        let mut all = crate::nn::Matrix::zeros(0, 2);
        for k in 0..n_modes {
            all = all.vconcat(&sample_synthetic(&pair, k, 100, &mut r)?)?;
        }
        body["mode_coverage"] = json!(mode_coverage(&all, &centers, sigma));
        body["n_modes"] = json!(n_modes);
        body["conditional_match_rate"] = json!(conditional_match_rate(&pair, &centers, 100, &mut r)?);
    }
    let counts = prepared.train.histogram().counts;
    let utility = synthetic_utility_eval(
        &pair,
        &prepared.train,
        &prepared.test,
        &counts,
        &ClassifierTemplate::default_set(),
        &cfg.eval.seeds,
    )?;
    body["utility"] = serde_json::to_value(&utility)?;
    if cfg.diagnostics.enabled {
        let d = &cfg.diagnostics;
        let study = drift_study(
            &prepared.train,
            &prepared.partition,
            &gan_template(cfg, &prepared.train)?,
            &cfg.gan.hyper(),
            &gan_swarm_config(cfg, &prepared.partition)?,
            d.redraws,
            d.lipschitz_probes,
            d.perturbation,
            rng::sub_seed(cfg.seed, names::DIAGNOSTICS, 0),
        )?;
        study.trace.write_csv(out.join("drift.csv"))?;
        study.trace.write_average_csv(out.join("drift_average.csv"))?;
        write_json(&out.join("assumptions.json"), &json!({ "config_hash": loaded.hash, "estimates": study.constants }))?;
        body["diagnostics"] = json!({
            "constants": study.constants,
            "max_drift": study.trace.max_drift(),
            "max_drift_at_sync": study.trace.max_drift_at_sync(),
            "bound_violations": study.trace.violations().len(),
            "average_bound_violations": study.trace.average_violations(false).len(),
            "average_loose_bound_violations": study.trace.average_violations(true).len(),
        });
    }
    Ok(body)
}

fn check_gan_hash(path: &Path, hash: &str) -> Result<GanPair> {
    let (pair, stored) = GanPair::load(path)?;
    match stored {
        Some(h) if h == hash => Ok(pair),
        Some(h) => Err(Error::config(format!(
            "{} was produced by config {h}, refusing to mix it with config {hash}",
            path.display()
        ))),
        None => Err(Error::config(format!("{} carries no config hash", path.display()))),
    }
}

fn cmd_augment(loaded: &Loaded, out: &Path, gan: &Path) -> Result<Value> {
    let cfg = &loaded.config;
    let pair = check_gan_hash(gan, &loaded.hash)?;
    let prepared = prepare(cfg)?;
    let plan = crate::augment::make_plan(&prepared.partition, &prepared.train, cfg.method.target_total)?;
    let augmented = apply_plan(&plan, &prepared.partition, &prepared.train, &pair, experiment::augment_seed(cfg.seed))?;
    write_json(&out.join("plan.json"), &json!({ "config_hash": loaded.hash, "plan": plan }))?;
    let label_column = match &cfg.dataset.source {
        DatasetSource::Csv { label_column, .. } => label_column.clone(),
        _ => "label".into(),
    };
    let mut files = Vec::new();
    for (p, a) in augmented.iter().enumerate() {
        let name = format!("participant_{p}.csv");
        write_csv(out.join(&name), &a.dataset, &label_column, Some(&a.synthetic))?;
        files.push(json!({ "file": name, "rows": a.dataset.len(), "synthetic": a.n_synthetic(), "histogram": a.dataset.histogram().counts }));
    }
    Ok(json!({ "plan": plan, "participants": files }))
}

fn cmd_train_eval(loaded: &Loaded, out: &Path, gan: Option<&Path>) -> Result<Value> {
    let cfg = &loaded.config;
    let method = cfg.method()?;
    let pair = match gan {
        Some(p) if method == Method::Slgan => Some(check_gan_hash(p, &loaded.hash)?),
        Some(_) => return Err(Error::config("--gan is only meaningful with method slgan")),
        None => None,
    };
    let prepared = prepare(cfg)?;
    let outcome = train_eval_prepared(cfg, &prepared, method, pair)?;
    let mut w = csv::Writer::from_path(out.join("loss.csv"))?;
    w.write_record(["config_hash", "round", "global_loss"])?;
    for (r, l) in outcome.classifier.global_loss.iter().enumerate() {
        w.write_record([loaded.hash.clone(), r.to_string(), format!("{l:?}")])?;
    }
    w.flush()?;
    write_run_log(out.join("run_log.jsonl"), &outcome.classifier.records)?;
    Ok(serde_json::to_value(&outcome)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config_hash: String,
    pub cell_hash: String,
    pub beta: f64,
    pub method: String,
    pub seed: u64,
    pub auc: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub final_loss: f64,
}

/// Identity of one (beta, method) cell of a sweep; seeds run within it.
pub fn cell_hash(base_hash: &str, beta: f64, method: Method) -> String {
    let mut h = Sha256::new();
    h.update(base_hash.as_bytes());
    h.update(beta.to_le_bytes());
    h.update(method.tag().as_bytes());
    hex::encode(h.finalize())
}

pub const SWEEP_FILE: &str = "sweep.csv";

fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn cmd_sweep(loaded: &Loaded, out: &Path) -> Result<Value> {
    let cfg = &loaded.config;
    let sweep = cfg.sweep.clone().ok_or_else(|| Error::config("sweep needs a [sweep] table"))?;
    let methods: Vec<Method> = sweep.methods.iter().map(|m| Method::parse(m)).collect::<Result<_>>()?;
    let path = out.join(SWEEP_FILE);
    let existing = read_sweep(&path)?;
    if let Some(r) = existing.iter().find(|r| r.config_hash != loaded.hash) {
        return Err(Error::config(format!(
            "{} holds results of config {}, refusing to mix them with config {}",
            path.display(),
            r.config_hash,
            loaded.hash
        )));
    }
    let done: BTreeSet<(String, u64)> = existing.iter().map(|r| (r.cell_hash.clone(), r.seed)).collect();

    let mut cells = Vec::new();
    for &beta in &sweep.betas {
        for &m in &methods {
            for &seed in &sweep.seeds {
                cells.push((beta, m, seed, cell_hash(&loaded.hash, beta, m)));
            }
        }
    }
    let todo: Vec<_> = cells.iter().filter(|(_, _, s, h)| !done.contains(&(h.clone(), *s))).cloned().collect();
    log::info!("sweep: {} cells, {} already complete", cells.len(), cells.len() - todo.len());
    let fresh: Vec<Result<SweepRow>> = todo
        .par_iter()
        .map(|(beta, m, seed, h)| {
            let mut c = cfg.clone();
            c.partition.beta = *beta;
            c.seed = *seed;
            c.method.name = m.tag().into();
            let o = experiment::train_eval(&c)?;
            Ok(SweepRow {
                config_hash: loaded.hash.clone(),
                cell_hash: h.clone(),
                beta: *beta,
                method: m.tag().into(),
                seed: *seed,
                auc: o.eval.auc,
                f1: o.eval.f1,
                accuracy: o.eval.accuracy,
                final_loss: o.classifier.global_loss.last().copied().unwrap_or(f64::NAN),
            })
        })
        .collect();
    let mut rows = existing;
    for r in fresh {
        rows.push(r?);
    }
    // canonical order: the order of the sweep lists
    let key = |r: &SweepRow| cells.iter().position(|(_, _, s, h)| *h == r.cell_hash && *s == r.seed).unwrap_or(usize::MAX);
    rows.sort_by_key(key);
    rows.dedup_by(|a, b| a.cell_hash == b.cell_hash && a.seed == b.seed);
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(json!({
        "cells": cells.len(),
        "computed": todo.len(),
        "skipped": cells.len() - todo.len(),
        "rows": rows.len(),
        "file": SWEEP_FILE,
    }))
}

/// Strips the wall-time field so two reports can be compared byte for byte.
pub fn normalized_report(text: &str) -> Result<String> {
    let mut v: Value = serde_json::from_str(text)?;
    if let Some(o) = v.as_object_mut() {
        o.remove(WALL_TIME_FIELD);
    }
    Ok(serde_json::to_string_pretty(&v)?)
}
