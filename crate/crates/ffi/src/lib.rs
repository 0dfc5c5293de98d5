//! C interface to the redundant Schwarz solvers.
//!
//! Objects are opaque handles created by `rsc_*_new`/constructor functions
//! and released with the matching `*_free`. Every fallible call returns an
//! [`RscStatus`]; on failure [`rsc_last_error_message`] describes the error
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use resilient_schwarz::experiment::{run_with_system, ExperimentConfig, Method, OuterSolver};
use resilient_schwarz::faultsim::{validate_schedule, FaultEvent, FaultKind, FaultSchedule, Violation};
use resilient_schwarz::redundancy::PairingMap;
use resilient_schwarz::problems::{build_poisson, load_matrix_market, ProblemSpec, SparseSystem};
use resilient_schwarz::{Error, SparseMatrix};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Numerical = 4,
    PairFailure = 5,
    Io = 6,
    NotConverged = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RscMethod {
    Psc = 0,
    Ssc = 1,
    Srsc = 2,
    Prsc = 3,
}

/// Sparse linear system `A u = f`.
pub struct RscSystem {
    system: SparseSystem,
}

/// Configured method and fault schedule bound to one system.
pub struct RscSolver {
    system: SparseSystem,
    config: ExperimentConfig,
    failures: Vec<FaultEvent>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> RscStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::IndexOutOfRange { .. } => RscStatus::Dimension,
        Error::NotSpd(_) | Error::Singular { .. } | Error::Divergence { .. } | Error::Hypothesis(_) => {
            RscStatus::Numerical
        }
        Error::PairFailure(..) | Error::StaleCopy { .. } => RscStatus::PairFailure,
        Error::Io(_) | Error::MatrixMarket { .. } => RscStatus::Io,
        _ => RscStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<RscStatus, (RscStatus, String)>) -> RscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            RscStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (RscStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RscStatus, String) {
    (RscStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (RscStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the most recent failed call on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rsc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Finite-difference Poisson system on a `dims[0] x ... x dims[n_dims-1]`
/// interior grid (1 to 3 axes) with an all-ones right-hand side.
///
/// # Safety
/// `dims` must point to `n_dims` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rsc_system_poisson(dims: *const usize, n_dims: usize, out: *mut *mut RscSystem) -> RscStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dims = slice(dims, n_dims, "dims")?;
        let system = build_poisson(&ProblemSpec::poisson(dims)).map_err(lib_err)?;
        emit(out, RscSystem { system });
        Ok(RscStatus::Ok)
    })
}

/// System from a square CSR matrix. `rhs` may be null for all ones.
///
/// # Safety
/// `row_offsets` holds `n + 1` entries, `col_indices` and `values` hold
/// `row_offsets[n]` entries, `rhs` is null or holds `n` entries.
#[no_mangle]
pub unsafe extern "C" fn rsc_system_from_csr(
    n: usize,
    row_offsets: *const usize,
    col_indices: *const usize,
    values: *const f64,
    rhs: *const f64,
    out: *mut *mut RscSystem,
) -> RscStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let offsets = slice(row_offsets, n + 1, "row_offsets")?;
        let nnz = offsets[n];
        let cols = slice(col_indices, nnz, "col_indices")?;
        let vals = slice(values, nnz, "values")?;
        let matrix = SparseMatrix::try_new(n, n, offsets.to_vec(), cols.to_vec(), vals.to_vec()).map_err(lib_err)?;
        let f = if rhs.is_null() { vec![1.0; n] } else { slice(rhs, n, "rhs")?.to_vec() };
        let system = SparseSystem::new(matrix, f).map_err(lib_err)?;
        emit(out, RscSystem { system });
        Ok(RscStatus::Ok)
    })
}

/// System from a Matrix Market coordinate file, right-hand side all ones.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsc_system_load_mtx(path: *const c_char, out: *mut *mut RscSystem) -> RscStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (RscStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let system = load_matrix_market(path).map_err(lib_err)?;
        emit(out, RscSystem { system });
        Ok(RscStatus::Ok)
    })
}

/// # Safety
/// `system` must be null or a handle from an `rsc_system_*` constructor
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn rsc_system_free(system: *mut RscSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// # Safety
/// `system` must be a live handle and `n` writable.
#[no_mangle]
pub unsafe extern "C" fn rsc_system_size(system: *const RscSystem, n: *mut usize) -> RscStatus {
    guard(|| {
        let system = system.as_ref().ok_or_else(|| null("system"))?;
        if n.is_null() {
            return Err(null("n"));
        }
        *n = system.system.n();
        Ok(RscStatus::Ok)
    })
}

/// Solver over `n_ranks` contiguous subdomains with `overlap` layers and a
/// method code from [`RscMethod`]. The system is copied, so it may be freed
/// afterwards. `stationary` nonzero iterates the method directly (ssc and
/// srsc only) instead of FGMRES(30).
///
/// # Safety
/// `system` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rsc_solver_new(
    system: *const RscSystem,
    n_ranks: usize,
    overlap: usize,
    method: i32,
    stationary: i32,
    out: *mut *mut RscSolver,
) -> RscStatus {
    guard(|| {
        let system = system.as_ref().ok_or_else(|| null("system"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = ExperimentConfig {
            n_ranks,
            overlap,
            method: match method {
                m if m == RscMethod::Psc as i32 => Method::Psc,
                m if m == RscMethod::Ssc as i32 => Method::Ssc,
                m if m == RscMethod::Srsc as i32 => Method::Srsc,
                m if m == RscMethod::Prsc as i32 => Method::Prsc,
                other => return Err((RscStatus::InvalidArgument, format!("unknown method code {other}"))),
            },
            solver: if stationary != 0 { OuterSolver::Stationary } else { OuterSolver::Fgmres },
            ..ExperimentConfig::default()
        };
        config.validate().map_err(lib_err)?;
        if n_ranks > system.system.n() {
            return Err((
                RscStatus::Dimension,
                format!("{n_ranks} ranks for {} unknowns", system.system.n()),
            ));
        }
        emit(
            out,
            RscSolver {
                system: system.system.clone(),
                config,
                failures: Vec::new(),
            },
        );
        Ok(RscStatus::Ok)
    })
}

/// Schedules a permanent fail-stop of `rank` from outer iteration
/// `at_iteration` (0 means failed from the start).
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rsc_solver_set_failed(solver: *mut RscSolver, rank: usize, at_iteration: usize) -> RscStatus {
    guard(|| {
        let solver = solver.as_mut().ok_or_else(|| null("solver"))?;
        if rank >= solver.config.n_ranks {
            return Err((
                RscStatus::Dimension,
                format!("rank {rank} out of range for {} ranks", solver.config.n_ranks),
            ));
        }
        let mut events = solver.failures.clone();
        events.push(FaultEvent::permanent(at_iteration, rank, FaultKind::FailStop));
        let schedule = FaultSchedule::new(events.clone(), true).map_err(lib_err)?;
        if solver.config.n_ranks % 2 == 0 {
            let pairing = PairingMap::new(solver.config.n_ranks).map_err(lib_err)?;
            let violations = validate_schedule(&schedule, &pairing, None);
            let pair_wide = violations.iter().find(|v| matches!(v, Violation::PairWide { .. }));
            if let (Some(v), true) = (pair_wide, solver.config.method.needs_pairing()) {
                return Err((RscStatus::PairFailure, format!("{v:?}")));
            }
            if let Some(v) = violations.iter().find(|v| !matches!(v, Violation::PairWide { .. })) {
                return Err((RscStatus::InvalidArgument, format!("{v:?}")));
            }
        }
        solver.failures = events;
        solver.config.fault_schedule = schedule;
        Ok(RscStatus::Ok)
    })
}

/// Solves from a zero initial guess to relative residual `tol`. The
/// iterate is written to `x` (length `x_len` = system size) even when the
/// tolerance is missed, in which case `RSC_STATUS_NOT_CONVERGED` is
/// returned. `iterations` and `relres` may be null.
///
/// # Safety
/// `solver` must be a live handle, `x` must hold `x_len` values.
#[no_mangle]
pub unsafe extern "C" fn rsc_solver_solve(
    solver: *mut RscSolver,
    tol: f64,
    max_iters: usize,
    x: *mut f64,
    x_len: usize,
    iterations: *mut usize,
    relres: *mut f64,
) -> RscStatus {
    guard(|| {
        let solver = solver.as_mut().ok_or_else(|| null("solver"))?;
        let n = solver.system.n();
        if x.is_null() {
            return Err(null("x"));
        }
        if x_len != n {
            return Err((RscStatus::Dimension, format!("x has length {x_len}, system has {n} unknowns")));
        }
        let mut config = solver.config.clone();
        config.solver_config.tol = tol;
        config.solver_config.max_iters = max_iters;
        let outcome = run_with_system(&config, &solver.system).map_err(lib_err)?;
        let s = &outcome.summary;
        if outcome.solution.len() == n {
            std::slice::from_raw_parts_mut(x, n).copy_from_slice(&outcome.solution);
        }
        if !iterations.is_null() {
            *iterations = s.iterations;
        }
        if !relres.is_null() {
            *relres = s.final_relres;
        }
        if s.converged {
            Ok(RscStatus::Ok)
        } else {
            let why = s.diagnostic.clone().unwrap_or_else(|| {
                format!("relative residual {:e} after {} iterations", s.final_relres, s.iterations)
            });
            Err((RscStatus::NotConverged, why))
        }
    })
}

/// # Safety
/// `solver` must be null or a live handle from [`rsc_solver_new`].
#[no_mangle]
pub unsafe extern "C" fn rsc_solver_free(solver: *mut RscSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}
