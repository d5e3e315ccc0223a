//! C ABI for the hdgml solvers. Handles are opaque pointers; every
//! fallible call returns an `HdgmlStatus` code and writes results through
//! out-pointers. The matching header is `include/hdgml.h`.

use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::ptr;

use hdgml::benchmarks::{make_case, CaseId};
use hdgml::hdg::{l2_error_u, recover_volume};
use hdgml::run::{run_cell, RunOptions, RunOutcome, SolverChoice};
use hdgml::HdgError;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdgmlStatus {
    Ok = 0,
    /// A pointer argument was null or a string was not valid UTF-8.
    InvalidArgument = 1,
    /// Unknown example name or solver name.
    UnknownCase = 2,
    /// Mesh construction failed (levels out of range, non-square domain).
    InvalidMesh = 3,
    /// A local solver or front factorization was singular.
    Singular = 4,
    /// The requested quantity does not exist (e.g. no exact solution).
    Unavailable = 5,
    /// Any other solver-side failure.
    Internal = 6,
}

fn status_of(err: &HdgError) -> HdgmlStatus {
    match err {
        HdgError::UnknownCase(_) | HdgError::Unsupported(_) => HdgmlStatus::UnknownCase,
        HdgError::InvalidMesh(_) => HdgmlStatus::InvalidMesh,
        HdgError::SingularLocalSolver { .. } | HdgError::SingularFront { .. } => {
            HdgmlStatus::Singular
        }
        _ => HdgmlStatus::Internal,
    }
}

/// Solve options mirrored in C. Obtain defaults from
/// `hdgml_options_default` and override fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HdgmlOptions {
    pub tol: c_double,
    pub max_iter: c_int,
    pub smooth_steps: c_int,
    pub enrich_cap: c_int,
    /// Nonzero: also run the ND direct solve and fill error_vs_direct.
    pub compare_direct: c_int,
    /// Seed for the Example II permeability field.
    pub seed: u64,
}

#[no_mangle]
pub extern "C" fn hdgml_options_default() -> HdgmlOptions {
    HdgmlOptions {
        tol: 1e-9,
        max_iter: 200,
        smooth_steps: 2,
        enrich_cap: 10,
        compare_direct: 0,
        seed: 2023,
    }
}

/// Opaque result of one solve.
pub struct HdgmlSolve {
    outcome: RunOutcome,
    case_exact: Option<hdgml::hdg::ScalarField>,
    case: hdgml::benchmarks::BenchmarkCase,
}

unsafe fn parse_cstr<'a>(s: *const c_char) -> Result<&'a str, HdgmlStatus> {
    if s.is_null() {
        return Err(HdgmlStatus::InvalidArgument);
    }
    CStr::from_ptr(s).to_str().map_err(|_| HdgmlStatus::InvalidArgument)
}

/// Run one solve. `example` and `solver` are case names as accepted by the
/// CLI ("I", "III-shock", "ml", "eml", "direct-nd", "bjacobi"). `param` is
/// the case parameter; pass NaN for the case default. On success writes a
/// handle to `out`; free it with `hdgml_solve_free`.
///
/// # Safety
/// `example` and `solver` must be valid NUL-terminated strings and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hdgml_solve(
    example: *const c_char,
    param: c_double,
    levels: c_int,
    order: c_int,
    solver: *const c_char,
    options: *const HdgmlOptions,
    out: *mut *mut HdgmlSolve,
) -> HdgmlStatus {
    if out.is_null() || levels < 1 || order < 1 {
        return HdgmlStatus::InvalidArgument;
    }
    let example = match parse_cstr(example) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let solver = match parse_cstr(solver) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let opts_in = if options.is_null() { hdgml_options_default() } else { *options };

    let id: CaseId = match example.parse() {
        Ok(id) => id,
        Err(_) => return HdgmlStatus::UnknownCase,
    };
    let choice: SolverChoice = match solver.parse() {
        Ok(c) => c,
        Err(_) => return HdgmlStatus::UnknownCase,
    };
    let case = match make_case(id, if param.is_nan() { None } else { Some(param) }, opts_in.seed) {
        Ok(c) => c,
        Err(e) => return status_of(&e),
    };

    let mut opts = RunOptions::new(choice);
    opts.tol = opts_in.tol;
    opts.max_iter = opts_in.max_iter.max(1) as usize;
    opts.smooth_steps = opts_in.smooth_steps.max(0) as usize;
    opts.enrich_cap = opts_in.enrich_cap.max(1) as usize;
    opts.compare_direct = opts_in.compare_direct != 0;

    match run_cell(&case, levels as usize, order as usize, &opts) {
        Ok(outcome) => {
            let handle = Box::new(HdgmlSolve {
                outcome,
                case_exact: case.exact.clone(),
                case,
            });
            *out = Box::into_raw(handle);
            HdgmlStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// # Safety
/// `h` must be a handle returned by `hdgml_solve` (or null).
#[no_mangle]
pub unsafe extern "C" fn hdgml_solve_free(h: *mut HdgmlSolve) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

unsafe fn handle<'a>(h: *const HdgmlSolve) -> Option<&'a HdgmlSolve> {
    h.as_ref()
}

/// GMRES iteration count (0 for a direct solve).
///
/// # Safety
/// `h` must be a live solve handle.
#[no_mangle]
pub unsafe extern "C" fn hdgml_solve_iterations(h: *const HdgmlSolve) -> c_int {
    handle(h).map_or(-1, |s| s.outcome.report.iterations as c_int)
}

/// 1 if the solve converged, 0 if not, -1 on a null handle.
///
/// # Safety
/// `h` must be a live solve handle.
#[no_mangle]
pub unsafe extern "C" fn hdgml_solve_converged(h: *const HdgmlSolve) -> c_int {
    handle(h).map_or(-1, |s| s.outcome.report.converged as c_int)
}

/// Final true relative residual `|b - A x| / |b|`.
///
/// # Safety
/// `h` must be a live solve handle.
#[no_mangle]
pub unsafe extern "C" fn hdgml_solve_true_residual(h: *const HdgmlSolve) -> c_double {
    handle(h).map_or(f64::NAN, |s| s.outcome.report.final_true_residual)
}

/// `max|lambda_direct - lambda|`; requires `compare_direct` in the options.
///
/// # Safety
/// `h` must be a live solve handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hdgml_solve_error_vs_direct(
    h: *const HdgmlSolve,
    out: *mut c_double,
) -> HdgmlStatus {
    let Some(s) = handle(h) else { return HdgmlStatus::InvalidArgument };
    if out.is_null() {
        return HdgmlStatus::InvalidArgument;
    }
    match s.outcome.report.error_vs_direct {
        Some(e) => {
            *out = e;
            HdgmlStatus::Ok
        }
        None => HdgmlStatus::Unavailable,
    }
}

/// L2 error of the recovered volume solution against the case's exact
/// solution; `Unavailable` for cases without one.
///
/// # Safety
/// `h` must be a live solve handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hdgml_solve_l2_error(
    h: *const HdgmlSolve,
    out: *mut c_double,
) -> HdgmlStatus {
    let Some(s) = handle(h) else { return HdgmlStatus::InvalidArgument };
    if out.is_null() {
        return HdgmlStatus::InvalidArgument;
    }
    let Some(exact) = &s.case_exact else { return HdgmlStatus::Unavailable };
    let coeffs = s.case.coefficients(&s.outcome.mesh);
    match recover_volume(&s.outcome.mesh, &coeffs, &s.outcome.system, &s.outcome.lambda) {
        Ok(sols) => {
            *out = l2_error_u(&s.outcome.mesh, &s.outcome.system, &sols, exact);
            HdgmlStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Number of trace unknowns.
///
/// # Safety
/// `h` must be a live solve handle.
#[no_mangle]
pub unsafe extern "C" fn hdgml_solve_trace_len(h: *const HdgmlSolve) -> usize {
    handle(h).map_or(0, |s| s.outcome.lambda.len())
}

/// Copy the trace solution into `buf` (capacity `len` doubles); fails if
/// `len` is smaller than `hdgml_solve_trace_len`.
///
/// # Safety
/// `h` must be a live solve handle; `buf` must point to at least `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hdgml_solve_copy_trace(
    h: *const HdgmlSolve,
    buf: *mut c_double,
    len: usize,
) -> HdgmlStatus {
    let Some(s) = handle(h) else { return HdgmlStatus::InvalidArgument };
    if buf.is_null() || len < s.outcome.lambda.len() {
        return HdgmlStatus::InvalidArgument;
    }
    ptr::copy_nonoverlapping(s.outcome.lambda.as_slice().as_ptr(), buf, s.outcome.lambda.len());
    HdgmlStatus::Ok
}

/// Full report serialized as JSON. Free the string with `hdgml_string_free`.
///
/// # Safety
/// `h` must be a live solve handle.
#[no_mangle]
pub unsafe extern "C" fn hdgml_solve_report_json(h: *const HdgmlSolve) -> *mut c_char {
    let Some(s) = handle(h) else { return ptr::null_mut() };
    match serde_json::to_string(&s.outcome.report) {
        Ok(j) => CString::new(j).map(CString::into_raw).unwrap_or(ptr::null_mut()),
        Err(_) => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must come from `hdgml_solve_report_json` (or be null).
#[no_mangle]
pub unsafe extern "C" fn hdgml_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
