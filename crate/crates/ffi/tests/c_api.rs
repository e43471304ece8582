use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;

use swarm_gan_ffi::*;

fn last_error() -> String {
    let p = sg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn metrics_through_the_abi() {
    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [0u8, 0, 1, 1];
    let mut out = 0.0;
    assert_eq!(unsafe { sg_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut out) }, SgStatus::Ok);
    assert_eq!(out, 0.75);

    let (mut f1, mut acc) = (0.0, 0.0);
    let s = [0.9, 0.8, 0.7, 0.2, 0.1];
    let l = [1u8, 1, 0, 1, 0];
    assert_eq!(unsafe { sg_f1_accuracy(s.as_ptr(), l.as_ptr(), 5, 0.5, &mut f1, &mut acc) }, SgStatus::Ok);
    assert!((f1 - 2.0 / 3.0).abs() < 1e-12 && (acc - 0.6).abs() < 1e-12);
}

#[test]
fn single_class_auc_is_an_undefined_metric() {
    let mut out = 0.0;
    let st = unsafe { sg_auc([0.1, 0.2].as_ptr(), [1u8, 1].as_ptr(), 2, &mut out) };
    assert_eq!(st, SgStatus::UndefinedMetric);
    assert!(last_error().contains("metric"));
}

#[test]
fn null_pointers_are_reported_not_dereferenced() {
    let mut out = 0.0;
    assert_eq!(unsafe { sg_auc(std::ptr::null(), [1u8].as_ptr(), 1, &mut out) }, SgStatus::NullPointer);
    assert_eq!(unsafe { sg_auc([0.1].as_ptr(), [1u8].as_ptr(), 1, std::ptr::null_mut()) }, SgStatus::NullPointer);
    assert_eq!(unsafe { sg_dataset_len(std::ptr::null()) }, 0);
    unsafe { sg_dataset_free(std::ptr::null_mut()) };
}

#[test]
fn dataset_and_partition_handles() {
    let mut d = std::ptr::null_mut();
    assert_eq!(unsafe { sg_dataset_gaussian(20, 2, 3, 2.0, 7, &mut d) }, SgStatus::Ok);
    assert_eq!(unsafe { sg_dataset_len(d) }, 40);
    assert_eq!(unsafe { sg_dataset_n_features(d) }, 3);

    let mut p = std::ptr::null_mut();
    assert_eq!(unsafe { sg_partition_dirichlet(d, 3, 0.5, 1, &mut p) }, SgStatus::Ok);
    assert_eq!(unsafe { sg_partition_n_participants(p) }, 3);
    let mut seen = [false; 40];
    for k in 0..3 {
        let mut n = 0;
        assert_eq!(unsafe { sg_partition_size(p, k, &mut n) }, SgStatus::Ok);
        let mut buf = vec![0usize; n];
        if n > 0 {
            assert_eq!(unsafe { sg_partition_indices(p, k, buf.as_mut_ptr(), 0) }, SgStatus::BufferTooSmall);
        }
        assert_eq!(unsafe { sg_partition_indices(p, k, buf.as_mut_ptr(), n) }, SgStatus::Ok);
        for i in buf {
            assert!(!seen[i]);
            seen[i] = true;
        }
    }
    assert!(seen.iter().all(|&s| s));

    let mut bad = std::ptr::null_mut();
    assert_eq!(unsafe { sg_partition_dirichlet(d, 3, -1.0, 1, &mut bad) }, SgStatus::InvalidInput);
    assert!(bad.is_null());
    unsafe {
        sg_partition_free(p);
        sg_dataset_free(d);
    }
}

#[test]
fn csv_ingestion_errors_carry_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "a,label\n1.0,x\nfoo,y\n").unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let col = CString::new("label").unwrap();
    let mut d = std::ptr::null_mut();
    assert_eq!(unsafe { sg_dataset_load_csv(p.as_ptr(), col.as_ptr(), &mut d) }, SgStatus::Ingestion);
    let msg = last_error();
    assert!(msg.contains("row 3") && msg.contains("column a"), "{msg}");
}

#[test]
fn gan_round_trip_via_the_command_line_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 2\n[dataset]\nkind = \"ring\"\nn_modes = 4\nn_per_mode = 20\n\
         [partition]\nn_participants = 2\nbeta = 1.0\n\
         [gan]\nnoise_dim = 4\ngenerator_hidden = [8]\ndiscriminator_hidden = [8]\nbatch_size = 16\n\
         d_schedule = { base = 0.05, decay = 0.003, form = \"inverse-time\" }\n\
         g_schedule = { base = 0.05, decay = 0.003, form = \"inverse-time\" }\n\
         sync_interval = 5\nlocal_steps = 20\n\
         [eval]\nseeds = [1]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let c = |s: &str| CString::new(s).unwrap();
    let st = unsafe { sg_run_stage(c("train-gan").as_ptr(), c(cfg.to_str().unwrap()).as_ptr(), c(out.to_str().unwrap()).as_ptr()) };
    assert_eq!(st, SgStatus::Ok, "{}", last_error());

    let mut g = std::ptr::null_mut();
    assert_eq!(unsafe { sg_gan_load(c(out.join("gan.json").to_str().unwrap()).as_ptr(), &mut g) }, SgStatus::Ok);
    assert_eq!(unsafe { sg_gan_n_features(g) }, 2);
    assert_eq!(unsafe { sg_gan_n_classes(g) }, 4);
    let mut a = vec![0.0; 10];
    let mut b = vec![0.0; 10];
    assert_eq!(unsafe { sg_gan_sample(g, 1, 5, 9, a.as_mut_ptr(), 10) }, SgStatus::Ok);
    assert_eq!(unsafe { sg_gan_sample(g, 1, 5, 9, b.as_mut_ptr(), 10) }, SgStatus::Ok);
    assert_eq!(a, b);
    assert_eq!(unsafe { sg_gan_sample(g, 9, 5, 9, a.as_mut_ptr(), 10) }, SgStatus::InvalidInput);
    unsafe { sg_gan_free(g) };

    let st = unsafe { sg_run_stage(c("bogus").as_ptr(), c(cfg.to_str().unwrap()).as_ptr(), c(out.to_str().unwrap()).as_ptr()) };
    assert_eq!(st, SgStatus::InvalidInput);
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(sg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("swarm_gan.h")
}

#[test]
fn generated_header_declares_the_api() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "sg_last_error",
        "sg_auc",
        "sg_f1_accuracy",
        "sg_dataset_gaussian",
        "sg_dataset_load_csv",
        "sg_partition_dirichlet",
        "sg_partition_indices",
        "sg_gan_load",
        "sg_gan_sample",
        "sg_run_stage",
        "typedef struct SgDataset SgDataset",
        "SG_STATUS_UNDEFINED_METRIC = 7",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C compiler found; C link check not run");
        return;
    };
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libswarm_gan_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "swarm_gan.h"
int main(void) {
    double scores[4] = {0.1, 0.4, 0.35, 0.8};
    uint8_t labels[4] = {0, 0, 1, 1};
    double auc = 0.0;
    if (sg_auc(scores, labels, 4, &auc) != SG_STATUS_OK) return 1;
    SgDataset *d = NULL;
    if (sg_dataset_gaussian(10, 2, 2, 3.0, 1, &d) != SG_STATUS_OK) return 2;
    size_t n = sg_dataset_len(d);
    sg_dataset_free(d);
    if (sg_auc(scores, labels, 4, NULL) != SG_STATUS_NULL_POINTER) return 3;
    printf("%.2f %zu %s\n", auc, n, sg_last_error() ? "err" : "none");
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.75 20 err");
}
