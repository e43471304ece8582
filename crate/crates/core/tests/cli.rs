//! Drives the `swarm-gan` binary end to end.

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_swarm-gan");

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Sandbox { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn run(&self, cmd: &str, config: &Path, out: &str, extra: &[&str]) -> Output {
        Command::new(BIN)
            .arg(cmd)
            .arg("--config")
            .arg(config)
            .arg("--out")
            .arg(self.path(out))
            .args(extra)
            .output()
            .unwrap()
    }

    fn ok(&self, cmd: &str, config: &Path, out: &str, extra: &[&str]) -> Value {
        let o = self.run(cmd, config, out, extra);
        assert!(o.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice(&std::fs::read(self.path(out).join("report.json")).unwrap()).unwrap()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn partition_writes_histograms_that_sum_to_totals() {
    let s = Sandbox::new();
    let cfg = s.config("c.toml", &common::small(1, 1.0, "vanilla"));
    let report = s.ok("partition", &cfg, "p", &[]);
    let hist = report["result"]["histograms"].as_array().unwrap();
    assert_eq!(hist.len(), 3);
    let total: u64 = hist.iter().flat_map(|h| h.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, report["result"]["n_train"].as_u64().unwrap());
    let csv = std::fs::read_to_string(s.path("p").join("histogram.csv")).unwrap();
    let hash = report["config_hash"].as_str().unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.starts_with(hash)));
    assert_eq!(report["config_echo"].as_str().unwrap(), std::fs::read_to_string(&cfg).unwrap());
}

#[test]
fn partition_is_byte_identical_on_repeat() {
    let s = Sandbox::new();
    let cfg = s.config("c.toml", &common::small(3, 0.1, "vanilla"));
    s.ok("partition", &cfg, "a", &[]);
    s.ok("partition", &cfg, "b", &[]);
    for f in ["partition.json", "histogram.csv", "manifest.json"] {
        assert_eq!(std::fs::read(s.path("a").join(f)).unwrap(), std::fs::read(s.path("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_override_changes_the_hash() {
    let s = Sandbox::new();
    let cfg = s.config("c.toml", &common::small(3, 0.1, "vanilla"));
    let a = s.ok("partition", &cfg, "a", &[]);
    let b = s.ok("partition", &cfg, "b", &["--seed", "9"]);
    assert_ne!(a["config_hash"], b["config_hash"]);
    assert_eq!(b["seed"], 9);
}

#[test]
fn non_positive_beta_is_a_validation_error() {
    let s = Sandbox::new();
    for beta in ["0.0", "-1.0"] {
        let cfg = s.config("c.toml", &common::small(1, 1.0, "vanilla").replace("beta = 1", &format!("beta = {beta}")));
        let o = s.run("partition", &cfg, "p", &[]);
        assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
        assert!(stderr(&o).contains("beta"), "{}", stderr(&o));
    }
}

#[test]
fn unknown_method_lists_valid_tags() {
    let s = Sandbox::new();
    let cfg = s.config("c.toml", &common::small(1, 1.0, "fedsgd"));
    let o = s.run("train-eval", &cfg, "e", &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for tag in ["vanilla", "slgan", "fedprox", "fednova", "mixup"] {
        assert!(err.contains(tag), "{err}");
    }
}

#[test]
fn missing_method_hyperparameter_is_rejected() {
    let s = Sandbox::new();
    let cfg = s.config("c.toml", &common::small(1, 1.0, "fedprox").replace("mu = 0.0\n", ""));
    let o = s.run("train-eval", &cfg, "e", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mu"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_fails() {
    let s = Sandbox::new();
    let o = s.run("partition", &s.path("nope.toml"), "p", &[]);
    assert!(!o.status.success());
}

#[test]
fn single_participant_is_flagged_degenerate() {
    let s = Sandbox::new();
    let text = common::small(1, 1.0, "vanilla").replace("n_participants = 3", "n_participants = 1");
    let cfg = s.config("c.toml", &text);
    let report = s.ok("train-gan", &cfg, "g", &[]);
    assert!(report["notes"].as_array().unwrap().iter().any(|n| n == "degenerate swarm (centralized)"));
}

#[test]
fn empty_budget_is_refused() {
    let s = Sandbox::new();
    let text = common::small(1, 1.0, "vanilla").replace("local_steps = 40", "local_steps = 0");
    let cfg = s.config("c.toml", &text);
    let o = s.run("train-gan", &cfg, "g", &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("empty training budget"), "{}", stderr(&o));
}

#[test]
fn ring_report_includes_coverage() {
    let s = Sandbox::new();
    let text = common::small(1, 0.5, "vanilla")
        .replace("kind = \"gaussian\"\nn_per_class = 60\nseparation = 3.0", "kind = \"ring\"\nn_modes = 4\nn_per_mode = 20");
    let cfg = s.config("c.toml", &text);
    let report = s.ok("train-gan", &cfg, "g", &[]);
    let r = &report["result"];
    let covered = r["mode_coverage"].as_u64().unwrap();
    assert!(covered <= 4);
    assert_eq!(r["n_modes"], 4);
    let rate = r["conditional_match_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    assert!(r["utility"]["rows"].as_array().unwrap().len() >= 3);
}

#[test]
fn diagnostics_export_drift_files() {
    let s = Sandbox::new();
    let mut text = common::small(2, 0.1, "vanilla");
    text.push_str("[diagnostics]\nenabled = true\nredraws = 4\nlipschitz_probes = 2\n");
    let cfg = s.config("c.toml", &text);
    let report = s.ok("train-gan", &cfg, "g", &[]);
    let d = &report["result"]["diagnostics"];
    assert_eq!(d["max_drift_at_sync"], 0.0);
    for f in ["drift.csv", "drift_average.csv", "assumptions.json"] {
        assert!(s.path("g").join(f).exists(), "{f}");
    }
}

#[test]
fn augment_refuses_a_gan_from_another_config() {
    let s = Sandbox::new();
    let a = s.config("a.toml", &common::small(1, 0.5, "slgan"));
    let b = s.config("b.toml", &common::small(2, 0.5, "slgan"));
    s.ok("train-gan", &a, "g", &[]);
    let gan = s.path("g").join("gan.json");
    let o = s.run("augment", &b, "aug", &["--gan", gan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("refusing"), "{}", stderr(&o));
    let o = s.run("train-eval", &b, "e", &["--gan", gan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn augment_rejects_mismatched_dimensions() {
    let s = Sandbox::new();
    let a = s.config("a.toml", &common::small(1, 0.5, "slgan"));
    let wide = common::small(1, 0.5, "slgan").replace("n_per_class = 60", "n_per_class = 60\nn_features = 3");
    let b = s.config("b.toml", &wide);
    s.ok("train-gan", &a, "g", &[]);
    // relabel the file as if it came from config b, so only the shape check can catch it
    let hash_b = s.ok("partition", &b, "pb", &[])["config_hash"].clone();
    let path = s.path("g").join("gan.json");
    let mut file: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    file["config_hash"] = hash_b;
    std::fs::write(&path, serde_json::to_vec(&file).unwrap()).unwrap();
    let o = s.run("augment", &b, "aug", &["--gan", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("features"), "{}", stderr(&o));
}

#[test]
fn augment_writes_plan_and_tagged_rows() {
    let s = Sandbox::new();
    let cfg = s.config("c.toml", &common::small(1, 0.1, "slgan"));
    s.ok("train-gan", &cfg, "g", &[]);
    let gan = s.path("g").join("gan.json");
    let report = s.ok("augment", &cfg, "aug", &["--gan", gan.to_str().unwrap()]);
    let parts = report["result"]["participants"].as_array().unwrap();
    let targets: Vec<u64> = parts.iter().map(|p| p["rows"].as_u64().unwrap()).collect();
    assert!(targets.iter().all(|&t| t == targets[0]));
    let text = std::fs::read_to_string(s.path("aug").join("participant_0.csv")).unwrap();
    let synthetic = text.lines().skip(1).filter(|l| l.ends_with(",synthetic")).count() as u64;
    assert_eq!(synthetic, parts[0]["synthetic"].as_u64().unwrap());
    let manifest: Value = serde_json::from_slice(&std::fs::read(s.path("aug").join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], report["config_hash"]);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 4);
}

#[test]
fn fedprox_with_zero_mu_reports_vanilla_metrics() {
    let s = Sandbox::new();
    let v = s.ok("train-eval", &s.config("v.toml", &common::small(5, 0.3, "vanilla")), "v", &[]);
    let p = s.ok("train-eval", &s.config("p.toml", &common::small(5, 0.3, "fedprox")), "p", &[]);
    assert_eq!(v["result"]["eval"], p["result"]["eval"]);
    assert_eq!(v["result"]["classifier"], p["result"]["classifier"]);
}

#[test]
fn paired_runs_share_their_data() {
    let s = Sandbox::new();
    let v = s.ok("train-eval", &s.config("v.toml", &common::small(5, 0.05, "vanilla")), "v", &[]);
    let g = s.ok("train-eval", &s.config("g.toml", &common::small(5, 0.05, "slgan")), "g", &[]);
    assert_eq!(v["seed"], g["seed"]);
    let (ev, eg) = (&v["result"]["eval"], &g["result"]["eval"]);
    assert_eq!(ev["n_test"], eg["n_test"]);
    assert!(g["result"]["plan"].is_object());
    let loss = std::fs::read_to_string(s.path("g").join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 1 + 8);
}

fn sweep_config(betas: &str, methods: &str, seeds: &str) -> String {
    format!("{}[sweep]\nbetas = {betas}\nmethods = {methods}\nseeds = {seeds}\n", common::small(1, 0.5, "vanilla"))
}

#[test]
fn sweep_counts_rows_and_resumes() {
    let s = Sandbox::new();
    let cfg = s.config("s.toml", &sweep_config("[0.05, 0.1, 0.5, 1.0]", "[\"vanilla\", \"fedprox\"]", "[1, 2, 3, 4, 5]"));
    let first = s.ok("sweep", &cfg, "sw", &["--threads", "2"]);
    assert_eq!(first["result"]["rows"], 40);
    assert_eq!(first["result"]["computed"], 40);
    let csv_path = s.path("sw").join("sweep.csv");
    let before = std::fs::read(&csv_path).unwrap();
    assert_eq!(String::from_utf8_lossy(&before).lines().count(), 41);

    // drop some rows; the rerun recomputes only those and restores the file
    let text = String::from_utf8(before.clone()).unwrap();
    let kept: Vec<&str> = text.lines().enumerate().filter(|(i, _)| i % 4 != 1).map(|(_, l)| l).collect();
    std::fs::write(&csv_path, kept.join("\n") + "\n").unwrap();
    let second = s.ok("sweep", &cfg, "sw", &[]);
    assert_eq!(second["result"]["computed"], 10);
    assert_eq!(std::fs::read(&csv_path).unwrap(), before);
    let third = s.ok("sweep", &cfg, "sw", &[]);
    assert_eq!(third["result"]["computed"], 0);
}

#[test]
fn sweep_refuses_rows_from_another_config() {
    let s = Sandbox::new();
    let a = s.config("a.toml", &sweep_config("[0.5]", "[\"vanilla\"]", "[1]"));
    let b = s.config("b.toml", &sweep_config("[0.5]", "[\"vanilla\"]", "[2]"));
    s.ok("sweep", &a, "sw", &[]);
    let o = s.run("sweep", &b, "sw", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("refusing"), "{}", stderr(&o));
}

#[test]
fn empty_sweep_lists_are_rejected() {
    let s = Sandbox::new();
    for (b, m, sd) in [("[]", "[\"vanilla\"]", "[1]"), ("[0.5]", "[]", "[1]"), ("[0.5]", "[\"vanilla\"]", "[]")] {
        let cfg = s.config("s.toml", &sweep_config(b, m, sd));
        let o = s.run("sweep", &cfg, "sw", &[]);
        assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    }
}
