//! C ABI over the swarm-gan core.
//!
//! Objects cross the boundary as opaque pointers created by `sg_*_new`/`sg_*_load`
//! style functions and released with the matching `sg_*_free`. Every fallible
//! function returns an [`SgStatus`]; on failure a description is available from
//! [`sg_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use swarm_gan::data::{dirichlet_partition, load_csv, make_gaussian_mixture, make_ring_mixture, Dataset, Partition};
use swarm_gan::gan::{sample_synthetic, GanPair};
use swarm_gan::metrics::{auc, f1_accuracy};
use swarm_gan::rng::{self, names};
use swarm_gan::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Ingestion = 3,
    Partition = 4,
    Divergence = 5,
    Planning = 6,
    UndefinedMetric = 7,
    Config = 8,
    Io = 9,
    BufferTooSmall = 10,
    Internal = 11,
}

impl From<&Error> for SgStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidInput(_) => SgStatus::InvalidInput,
            Error::Ingestion { .. } => SgStatus::Ingestion,
            Error::Partition(_) => SgStatus::Partition,
            Error::Divergence { .. } => SgStatus::Divergence,
            Error::Planning(_) => SgStatus::Planning,
            Error::UndefinedMetric(_) => SgStatus::UndefinedMetric,
            Error::Config(_) => SgStatus::Config,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => SgStatus::Io,
        }
    }
}

/// Opaque dataset handle.
pub struct SgDataset(Dataset);
/// Opaque partition handle.
pub struct SgPartition(Partition);
/// Opaque trained GAN handle.
pub struct SgGan(GanPair);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SgStatus, msg: impl Into<String>) -> SgStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), SgStatusError>) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgStatus::Ok,
        Ok(Err(SgStatusError(s, m))) => fail(s, m),
        Err(_) => fail(SgStatus::Internal, "internal panic"),
    }
}

struct SgStatusError(SgStatus, String);

impl From<Error> for SgStatusError {
    fn from(e: Error) -> Self {
        SgStatusError(SgStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> SgStatusError {
    SgStatusError(SgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SgStatusError> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| SgStatusError(SgStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], SgStatusError> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message describing the last failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Area under the ROC curve; `labels[i]` nonzero marks a positive.
///
/// # Safety
/// `scores` and `labels` must point to `n` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> SgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = slice_arg(scores, n, "scores")?;
        let l: Vec<bool> = slice_arg(labels, n, "labels")?.iter().map(|&b| b != 0).collect();
        *out = auc(s, &l)?;
        Ok(())
    })
}

/// F1 of the positive class and accuracy at `threshold`.
///
/// # Safety
/// `scores` and `labels` must point to `n` readable elements; `f1` and `accuracy` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_f1_accuracy(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    threshold: f64,
    f1: *mut f64,
    accuracy: *mut f64,
) -> SgStatus {
    guard(|| {
        if f1.is_null() || accuracy.is_null() {
            return Err(null("output"));
        }
        let s = slice_arg(scores, n, "scores")?;
        let l: Vec<bool> = slice_arg(labels, n, "labels")?.iter().map(|&b| b != 0).collect();
        let (f, a) = f1_accuracy(s, &l, threshold)?;
        *f1 = f;
        *accuracy = a;
        Ok(())
    })
}

fn put<T>(out: *mut *mut T, v: T) -> Result<(), SgStatusError> {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(v)) };
    Ok(())
}

/// Isotropic Gaussian classes; see the core library for the geometry.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_gaussian(
    n_per_class: usize,
    n_classes: usize,
    n_features: usize,
    separation: f64,
    seed: u64,
    out: *mut *mut SgDataset,
) -> SgStatus {
    guard(|| put(out, SgDataset(make_gaussian_mixture(n_per_class, n_classes, n_features, separation, seed)?)))
}

/// Gaussian modes on a circle; the label is the mode index.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_ring(
    n_modes: usize,
    n_per_mode: usize,
    radius: f64,
    sigma: f64,
    seed: u64,
    out: *mut *mut SgDataset,
) -> SgStatus {
    guard(|| put(out, SgDataset(make_ring_mixture(n_modes, n_per_mode, radius, sigma, seed)?)))
}

/// Loads a CSV with a header row; `label_column` names the label column.
///
/// # Safety
/// `path` and `label_column` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_load_csv(path: *const c_char, label_column: *const c_char, out: *mut *mut SgDataset) -> SgStatus {
    guard(|| {
        let p = PathBuf::from(str_arg(path, "path")?);
        let l = str_arg(label_column, "label_column")?;
        put(out, SgDataset(load_csv(p, l)?))
    })
}

/// Number of rows; 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_len(d: *const SgDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_n_features(d: *const SgDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.n_features())
}

/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_n_classes(d: *const SgDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.n_classes)
}

/// Copies the labels into `buf` (capacity `cap`).
///
/// # Safety
/// `d` must be a live handle and `buf` must have room for `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_labels(d: *const SgDataset, buf: *mut usize, cap: usize) -> SgStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| null("dataset"))?;
        copy_out(&d.0.labels, buf, cap)
    })
}

/// # Safety
/// `d` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_dataset_free(d: *mut SgDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

unsafe fn copy_out<T: Copy>(src: &[T], buf: *mut T, cap: usize) -> Result<(), SgStatusError> {
    if cap < src.len() {
        return Err(SgStatusError(SgStatus::BufferTooSmall, format!("need {} elements, buffer holds {cap}", src.len())));
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Dirichlet(beta) label-skew split of `d` across `n_participants`.
///
/// # Safety
/// `d` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_partition_dirichlet(
    d: *const SgDataset,
    n_participants: usize,
    beta: f64,
    seed: u64,
    out: *mut *mut SgPartition,
) -> SgStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| null("dataset"))?;
        put(out, SgPartition(dirichlet_partition(&d.0, n_participants, beta, seed)?))
    })
}

/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_partition_n_participants(p: *const SgPartition) -> usize {
    p.as_ref().map_or(0, |p| p.0.n_participants())
}

/// Number of rows held by `participant`.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_partition_size(p: *const SgPartition, participant: usize, out: *mut usize) -> SgStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("partition"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let ix = p.0.participants.get(participant).ok_or_else(|| SgStatusError(SgStatus::InvalidInput, format!("no participant {participant}")))?;
        *out = ix.len();
        Ok(())
    })
}

/// Copies `participant`'s sorted row indices into `buf`.
///
/// # Safety
/// `p` must be a live handle and `buf` must have room for `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn sg_partition_indices(p: *const SgPartition, participant: usize, buf: *mut usize, cap: usize) -> SgStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("partition"))?;
        let ix = p.0.participants.get(participant).ok_or_else(|| SgStatusError(SgStatus::InvalidInput, format!("no participant {participant}")))?;
        copy_out(ix, buf, cap)
    })
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_partition_free(p: *mut SgPartition) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Loads a GAN file written by the `train-gan` command.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_gan_load(path: *const c_char, out: *mut *mut SgGan) -> SgStatus {
    guard(|| {
        let (pair, _) = GanPair::load(str_arg(path, "path")?)?;
        put(out, SgGan(pair))
    })
}

/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_gan_n_features(g: *const SgGan) -> usize {
    g.as_ref().map_or(0, |g| g.0.n_features)
}

/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_gan_n_classes(g: *const SgGan) -> usize {
    g.as_ref().map_or(0, |g| g.0.n_classes)
}

/// Writes `n` synthetic rows of `label`, row-major, into `buf` (capacity `cap`
/// values, at least `n * n_features`). Same `seed` gives the same rows.
///
/// # Safety
/// `g` must be a live handle and `buf` must have room for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn sg_gan_sample(g: *const SgGan, label: usize, n: usize, seed: u64, buf: *mut f64, cap: usize) -> SgStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("gan"))?;
        let rows = sample_synthetic(&g.0, label, n, &mut rng::stream(seed, names::AUGMENT, label as u64))?;
        copy_out(rows.values(), buf, cap)
    })
}

/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_gan_free(g: *mut SgGan) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Runs one command-line stage (`partition`, `train-gan`, `train-eval`, `sweep`)
/// with the given config file and output directory.
///
/// # Safety
/// All arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sg_run_stage(stage: *const c_char, config_path: *const c_char, out_dir: *const c_char) -> SgStatus {
    use swarm_gan::cli::{run, Cli, Command, Common};
    guard(|| {
        let stage = str_arg(stage, "stage")?;
        let common = Common {
            config: PathBuf::from(str_arg(config_path, "config_path")?),
            out: PathBuf::from(str_arg(out_dir, "out_dir")?),
            seed: None,
            threads: None,
        };
        let command = match stage {
            "partition" => Command::Partition(common),
            "train-gan" => Command::TrainGan(common),
            "train-eval" => Command::TrainEval { common, gan: None },
            "sweep" => Command::Sweep(common),
            other => {
                return Err(SgStatusError(
                    SgStatus::InvalidInput,
                    format!("unknown stage '{other}'; expected partition, train-gan, train-eval or sweep"),
                ))
            }
        };
        run(Cli { command })?;
        Ok(())
    })
}
