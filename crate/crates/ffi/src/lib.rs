//! C interface to the fpthermo solvers.
//!
//! Handles are opaque pointers created by `fpt_*_new`-style calls and released
//! with the matching `_free`. Every fallible call returns an [`FptStatus`];
//! on failure the message is kept per thread and can be copied out with
//! [`fpt_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fpthermo::fpsolve::{init_density, make_grid, stationary_density, uniform_times, FpSolver, InitialCondition, SolverOptions};
use fpthermo::markov::{decomposition_check, MarkovChain};
use fpthermo::model::{catalog, CatalogParams, SystemSpec};
use fpthermo::ougauss::{ou_rates, GaussianState, OuSpec};
use fpthermo::thermo::{instrument, ThermoRecord};
use fpthermo::Error;
use nalgebra::{DMatrix, DVector};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FptStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Bad arguments or an ill-posed system.
    InvalidInput = 2,
    /// The computation itself failed (solver abort, non-Hurwitz drift, ...).
    Numeric = 3,
    /// Index past the end of a result.
    OutOfRange = 4,
    /// A panic was caught; the handle arguments should be considered suspect.
    Panic = 5,
}

/// A diffusion system from the built-in catalog.
pub struct FptSystem {
    spec: SystemSpec,
}

/// Thermodynamic records of one Fokker-Planck run.
pub struct FptRun {
    records: Vec<ThermoRecord>,
}

/// One row of a run's thermodynamic table.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FptRecord {
    pub t: f64,
    pub entropy: f64,
    pub ep: f64,
    pub qex: f64,
    pub free_energy: f64,
    pub qhk: f64,
    pub dsdt_fd: f64,
    pub dfdt_fd: f64,
    pub res_entropy: f64,
    pub res_freeenergy: f64,
}

/// Closed-form functionals of a Gaussian state of a linear system.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FptOuRates {
    pub entropy: f64,
    pub entropy_rate: f64,
    pub ep: f64,
    pub qex: f64,
    pub free_energy: f64,
    pub qhk: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FptDecomposition {
    pub generated: f64,
    pub change: f64,
    pub folding: f64,
    pub residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(FptStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.exit_code() == 2 { FptStatus::InvalidInput } else { FptStatus::Numeric };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FptStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: &str) -> Failure {
    Failure(FptStatus::InvalidInput, msg.to_string())
}

/// Run `f`, turning errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            FptStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FptStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to `n` readable values.
unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Copy the last error message of this thread into `buf` (NUL terminated,
/// truncated to `len`). Returns the full message length in bytes, so a
/// caller can size a buffer by passing `len = 0`.
///
/// # Safety
/// `buf` must be null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn fpt_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Build a catalog system (`"ou1d"`, `"double_well"`, `"rot_ou"`, ...) at
/// the given alpha.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpt_system_from_catalog(
    name: *const c_char,
    alpha: f64,
    out: *mut *mut FptSystem,
) -> FptStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let name = CStr::from_ptr(name).to_str().map_err(|_| invalid("name is not UTF-8"))?;
        let params = CatalogParams { alpha: Some(alpha), ..Default::default() };
        let spec = catalog(name, &params)?.spec;
        *out = Box::into_raw(Box::new(FptSystem { spec }));
        Ok(())
    })
}

/// # Safety
/// `system` must be null or a handle from [`fpt_system_from_catalog`] that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn fpt_system_free(system: *mut FptSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Spatial dimension of a system, 0 for a null handle.
///
/// # Safety
/// `system` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fpt_system_dim(system: *const FptSystem) -> usize {
    system.as_ref().map_or(0, |s| s.spec.dim())
}

/// Solve the Fokker-Planck equation on a box from a Gaussian start and
/// record the thermodynamic functionals every `spacing` time units.
/// `lower`, `upper`, `cells` and `mean` have `dim` entries; `cov` is a
/// row-major `dim x dim` matrix. `dt <= 0` selects the default step.
///
/// # Safety
/// All pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpt_fp_run(
    system: *const FptSystem,
    dim: usize,
    lower: *const f64,
    upper: *const f64,
    cells: *const usize,
    mean: *const f64,
    cov: *const f64,
    t_end: f64,
    spacing: f64,
    dt: f64,
    out: *mut *mut FptRun,
) -> FptStatus {
    guard(|| {
        let system = system.as_ref().ok_or_else(|| null("system"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if dim != system.spec.dim() {
            return Err(invalid("dim does not match the system"));
        }
        let lower = slice(lower, dim, "lower")?;
        let upper = slice(upper, dim, "upper")?;
        let cells = slice(cells, dim, "cells")?;
        let mean = slice(mean, dim, "mean")?;
        let cov = slice(cov, dim * dim, "cov")?;
        if !(spacing > 0.0) {
            return Err(invalid("spacing must be positive"));
        }
        let bounds: Vec<(f64, f64)> = lower.iter().copied().zip(upper.iter().copied()).collect();
        let grid = make_grid(&bounds, cells)?;
        let init = InitialCondition::Gaussian {
            mean: mean.to_vec(),
            cov: DMatrix::from_row_slice(dim, dim, cov),
        };
        let f0 = init_density(&grid, &init)?;
        let pi = stationary_density(&system.spec, &grid)?;
        let mut opts = SolverOptions::default();
        if dt > 0.0 {
            opts.dt = dt;
        }
        let mut solver = FpSolver::new(&system.spec, &grid, opts)?;
        let snaps = solver.solve(&f0, t_end, &uniform_times(t_end, spacing, true))?;
        let records = instrument(&system.spec, &snaps, &pi)?;
        *out = Box::into_raw(Box::new(FptRun { records }));
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a live handle from [`fpt_fp_run`].
#[no_mangle]
pub unsafe extern "C" fn fpt_run_free(run: *mut FptRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of records, 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fpt_run_len(run: *const FptRun) -> usize {
    run.as_ref().map_or(0, |r| r.records.len())
}

/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fpt_run_record(run: *const FptRun, index: usize, out: *mut FptRecord) -> FptStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = run.records.get(index).ok_or_else(|| {
            Failure(FptStatus::OutOfRange, format!("record {index} of {}", run.records.len()))
        })?;
        *out = FptRecord {
            t: r.t,
            entropy: r.entropy,
            ep: r.ep,
            qex: r.qex,
            free_energy: r.free_energy,
            qhk: r.qhk,
            dsdt_fd: r.dsdt_fd,
            dfdt_fd: r.dfdt_fd,
            res_entropy: r.res_entropy,
            res_freeenergy: r.res_freeenergy,
        };
        Ok(())
    })
}

/// Closed-form functionals of `N(mean, cov)` for a linear system. Fails
/// with [`FptStatus::Numeric`] when the drift is not Hurwitz, since free
/// energy and house-keeping heat then do not exist.
///
/// # Safety
/// `mean` has `dim` entries, `cov` is row-major `dim x dim`, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fpt_ou_rates(
    system: *const FptSystem,
    dim: usize,
    mean: *const f64,
    cov: *const f64,
    out: *mut FptOuRates,
) -> FptStatus {
    guard(|| {
        let system = system.as_ref().ok_or_else(|| null("system"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if dim != system.spec.dim() {
            return Err(invalid("dim does not match the system"));
        }
        let ou = OuSpec::from_system(&system.spec)?;
        let state = GaussianState::new(
            DVector::from_column_slice(slice(mean, dim, "mean")?),
            DMatrix::from_row_slice(dim, dim, slice(cov, dim * dim, "cov")?),
        )?;
        let r = ou_rates(&ou, &state);
        let (Some(free_energy), Some(qhk)) = (r.free_energy, r.qhk) else {
            return Err(Failure(FptStatus::Numeric, "drift matrix is not Hurwitz".into()));
        };
        *out = FptOuRates {
            entropy: r.entropy,
            entropy_rate: r.entropy_rate,
            ep: r.ep,
            qex: r.qex,
            free_energy,
            qhk,
        };
        Ok(())
    })
}

/// Entropy decomposition of one step of a finite chain with initial law `p`
/// (`n` entries) and row-major `n x n` transition matrix.
///
/// # Safety
/// `p` has `n` entries, `transition` has `n * n`, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fpt_markov_decomposition(
    n: usize,
    p: *const f64,
    transition: *const f64,
    out: *mut FptDecomposition,
) -> FptStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = slice(p, n, "p")?.to_vec();
        let rows = slice(transition, n * n, "transition")?;
        let rows = if n == 0 { Vec::new() } else { rows.chunks(n).map(<[f64]>::to_vec).collect() };
        let d = decomposition_check(&MarkovChain::new(p, rows)?);
        *out = FptDecomposition {
            generated: d.generated,
            change: d.change,
            folding: d.folding,
            residual: d.residual,
        };
        Ok(())
    })
}
