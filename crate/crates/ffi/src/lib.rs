//! C ABI for `bmm_mtc`.
//!
//! Objects are handed out as opaque pointers and must be released with the
//! matching `*_free` function. Every fallible call returns a [`BmmStatus`];
//! on failure [`bmm_last_error_message`] describes the error for the calling
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bmm_mtc::clusterer::{cluster_algorithm1, ClusterOptions, ClusterRun};
use bmm_mtc::measures::{max_total_correlation, total_correlation};
use bmm_mtc::sampler::sample_bmm;
use bmm_mtc::{derive_algo_params, AlgoParams, BmmParams, DataFormat, Dataset, DimCap, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BmmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    Io = 4,
    Format = 5,
    Precondition = 6,
    Panic = 7,
}

/// Binary dataset.
pub struct BmmDataset {
    inner: Dataset,
}

/// Bernoulli mixture parameters.
pub struct BmmModel {
    inner: BmmParams,
}

/// Outcome of a clustering run.
pub struct BmmClusterRun {
    inner: ClusterRun,
}

/// Parameters of the clustering search.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BmmAlgoParams {
    pub alpha: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub l_sep: usize,
    pub d: usize,
    pub tau: f64,
    pub beta: f64,
}

impl From<&AlgoParams> for BmmAlgoParams {
    fn from(p: &AlgoParams) -> Self {
        BmmAlgoParams {
            alpha: p.alpha,
            delta: p.delta,
            epsilon: p.epsilon,
            l_sep: p.l_sep,
            d: p.d,
            tau: p.tau,
            beta: p.beta,
        }
    }
}

impl From<&BmmAlgoParams> for AlgoParams {
    fn from(p: &BmmAlgoParams) -> Self {
        AlgoParams {
            alpha: p.alpha,
            delta: p.delta,
            epsilon: p.epsilon,
            l_sep: p.l_sep,
            d: p.d,
            tau: p.tau,
            beta: p.beta,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

struct Failure(BmmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            _ if e.is_infeasible() => BmmStatus::Infeasible,
            Error::Io { .. } => BmmStatus::Io,
            Error::Format(_) => BmmStatus::Format,
            Error::Precondition(_) => BmmStatus::Precondition,
            _ => BmmStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BmmStatus::NullPointer, format!("`{what}` is NULL"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BmmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BmmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            BmmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Failure(BmmStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

fn boxed<T>(value: T, out: *mut *mut T) {
    // SAFETY: callers check `out` for NULL first.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

fn dim_cap() -> Result<DimCap, Failure> {
    Ok(DimCap::from_env()?)
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bmm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bmm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a dataset from `n * l` row-major cells, each 0 or 1.
///
/// # Safety
/// `cells` must point to `n * l` readable bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bmm_dataset_from_cells(
    cells: *const u8,
    n: usize,
    l: usize,
    out: *mut *mut BmmDataset,
) -> BmmStatus {
    guard(|| {
        if cells.is_null() {
            return Err(null("cells"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n.checked_mul(l).ok_or_else(|| {
            Failure(BmmStatus::InvalidArgument, "n * l overflows".into())
        })?;
        let cells = std::slice::from_raw_parts(cells, len);
        let mut ds = Dataset::zeros(n, l)?;
        for (idx, &c) in cells.iter().enumerate() {
            match c {
                0 => {}
                1 => ds.set(idx / l, idx % l, true),
                v => {
                    return Err(Failure(
                        BmmStatus::InvalidArgument,
                        format!("cell ({}, {}) = {v} is not 0 or 1", idx / l, idx % l),
                    ))
                }
            }
        }
        boxed(BmmDataset { inner: ds }, out);
        Ok(())
    })
}

/// Loads a CSV or binary dataset; the format is detected from the contents.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bmm_dataset_load(path: *const c_char, out: *mut *mut BmmDataset) -> BmmStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        boxed(BmmDataset { inner: Dataset::load(path, None)? }, out);
        Ok(())
    })
}

/// Saves a dataset as binary when `binary` is nonzero, CSV otherwise.
///
/// # Safety
/// `ds` must be a live dataset handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bmm_dataset_save(
    ds: *const BmmDataset,
    path: *const c_char,
    binary: i32,
) -> BmmStatus {
    guard(|| {
        let ds = deref(ds, "ds")?;
        let format = if binary != 0 { DataFormat::Bin } else { DataFormat::Csv };
        ds.inner.save(path_arg(path)?, format)?;
        Ok(())
    })
}

/// Row count, or 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn bmm_dataset_rows(ds: *const BmmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n())
}

/// Column count, or 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn bmm_dataset_cols(ds: *const BmmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.l())
}

/// Reads cell `(i, j)` into `out`.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bmm_dataset_get(
    ds: *const BmmDataset,
    i: usize,
    j: usize,
    out: *mut u8,
) -> BmmStatus {
    guard(|| {
        let ds = deref(ds, "ds")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if i >= ds.inner.n() || j >= ds.inner.l() {
            return Err(Failure(
                BmmStatus::InvalidArgument,
                format!("cell ({i}, {j}) out of range for {}x{}", ds.inner.n(), ds.inner.l()),
            ));
        }
        *out = u8::from(ds.inner.get(i, j));
        Ok(())
    })
}

/// Releases a dataset; NULL is ignored.
///
/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bmm_dataset_free(ds: *mut BmmDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Builds a mixture from a row-major `k x l` frequency matrix and `k` weights.
///
/// # Safety
/// `p` must point to `k * l` doubles, `w` to `k` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bmm_model_new(
    p: *const f64,
    k: usize,
    l: usize,
    w: *const f64,
    out: *mut *mut BmmModel,
) -> BmmStatus {
    guard(|| {
        if p.is_null() {
            return Err(null("p"));
        }
        if w.is_null() {
            return Err(null("w"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = k.checked_mul(l).ok_or_else(|| {
            Failure(BmmStatus::InvalidArgument, "k * l overflows".into())
        })?;
        let flat = std::slice::from_raw_parts(p, len);
        let rows = if l == 0 {
            vec![Vec::new(); k]
        } else {
            flat.chunks(l).map(<[f64]>::to_vec).collect()
        };
        let weights = std::slice::from_raw_parts(w, k).to_vec();
        boxed(BmmModel { inner: BmmParams::new(rows, weights)? }, out);
        Ok(())
    })
}

/// Releases a model; NULL is ignored.
///
/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bmm_model_free(model: *mut BmmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Draws `n` rows. When `labels_out` is non-NULL it receives the 1-based
/// generating component of each row.
///
/// # Safety
/// `model` must be live, `out` writable, and `labels_out` NULL or writable
/// for `n` entries.
#[no_mangle]
pub unsafe extern "C" fn bmm_sample(
    model: *const BmmModel,
    n: usize,
    seed: u64,
    labels_out: *mut u32,
    out: *mut *mut BmmDataset,
) -> BmmStatus {
    guard(|| {
        let model = deref(model, "model")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sample = sample_bmm(&model.inner, n, seed)?;
        if !labels_out.is_null() {
            std::slice::from_raw_parts_mut(labels_out, n).copy_from_slice(sample.truth.as_slice());
        }
        boxed(BmmDataset { inner: sample.data }, out);
        Ok(())
    })
}

/// Total correlation of the whole dataset.
///
/// # Safety
/// `ds` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bmm_total_correlation(ds: *const BmmDataset, out: *mut f64) -> BmmStatus {
    guard(|| {
        let ds = deref(ds, "ds")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = total_correlation(&ds.inner, dim_cap()?)?;
        Ok(())
    })
}

/// Maximal total correlation over all `d`-column subsets. When
/// `argmax_out` is non-NULL it receives the `d` maximizing column indices.
///
/// # Safety
/// `ds` must be live, `out` writable, and `argmax_out` NULL or writable for
/// `d` entries.
#[no_mangle]
pub unsafe extern "C" fn bmm_max_total_correlation(
    ds: *const BmmDataset,
    d: usize,
    argmax_out: *mut usize,
    out: *mut f64,
) -> BmmStatus {
    guard(|| {
        let ds = deref(ds, "ds")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = max_total_correlation(&ds.inner, d, None, 0, dim_cap()?)?;
        if !argmax_out.is_null() {
            std::slice::from_raw_parts_mut(argmax_out, d).copy_from_slice(&r.argmax_columns);
        }
        *out = r.value;
        Ok(())
    })
}

/// Derives `d`, `tau` and `beta`. A `d_override` of 0 derives `d` from the
/// tolerances.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bmm_derive_params(
    alpha: f64,
    delta: f64,
    epsilon: f64,
    l_sep: usize,
    d_override: usize,
    out: *mut BmmAlgoParams,
) -> BmmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let d = (d_override != 0).then_some(d_override);
        let p = derive_algo_params(alpha, delta, epsilon, l_sep, d, dim_cap()?)?;
        *out = BmmAlgoParams::from(&p);
        Ok(())
    })
}

/// Runs the clustering search. A `search_cap` of 0 uses the default. A run
/// that accepts no partition still succeeds; see
/// [`bmm_cluster_run_accepted`].
///
/// # Safety
/// `ds` and `params` must be valid pointers and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bmm_cluster(
    ds: *const BmmDataset,
    params: *const BmmAlgoParams,
    search_cap: u64,
    out: *mut *mut BmmClusterRun,
) -> BmmStatus {
    guard(|| {
        let ds = deref(ds, "ds")?;
        let params = AlgoParams::from(deref(params, "params")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let mut opts = ClusterOptions {
            dim_cap: dim_cap()?,
            ..ClusterOptions::default()
        };
        if search_cap != 0 {
            opts.search_cap = search_cap as u128;
        }
        let run = cluster_algorithm1(&ds.inner, &params, &opts)?;
        boxed(BmmClusterRun { inner: run }, out);
        Ok(())
    })
}

/// 1 when a partition was accepted, 0 otherwise (including NULL).
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bmm_cluster_run_accepted(run: *const BmmClusterRun) -> i32 {
    run.as_ref().map_or(0, |r| i32::from(r.inner.result.is_some()))
}

/// Cluster count of the accepted partition, or 0.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bmm_cluster_run_kappa(run: *const BmmClusterRun) -> usize {
    run.as_ref().and_then(|r| r.inner.accepted_kappa).unwrap_or(0)
}

/// Number of candidate partitions tested.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bmm_cluster_run_partitions_tested(run: *const BmmClusterRun) -> u64 {
    run.as_ref().map_or(0, |r| r.inner.partitions_tested)
}

/// Copies the accepted labels (1-based) into `out`, which holds `len`
/// entries and must match the row count.
///
/// # Safety
/// `run` must be live and `out` writable for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn bmm_cluster_run_labels(
    run: *const BmmClusterRun,
    out: *mut u32,
    len: usize,
) -> BmmStatus {
    guard(|| {
        let run = deref(run, "run")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let z = run.inner.result.as_ref().ok_or_else(|| {
            Failure(BmmStatus::InvalidArgument, "no partition was accepted".into())
        })?;
        if z.len() != len {
            return Err(Failure(
                BmmStatus::InvalidArgument,
                format!("buffer holds {len} labels but the run has {}", z.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(z.as_slice());
        Ok(())
    })
}

/// Releases a cluster run; NULL is ignored.
///
/// # Safety
/// `run` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bmm_cluster_run_free(run: *mut BmmClusterRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
