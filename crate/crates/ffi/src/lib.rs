//! C interface to `cbf-core`.
//!
//! Kernel pairs live behind the opaque `CbfPair` handle. Every function
//! returns a `CbfStatus`; on failure the message is available from
//! `cbf_last_error_message` on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cbf_core::bernstein::BernsteinSpec;
use cbf_core::grid::{Grid, GridFunction};
use cbf_core::kernels::{make_pair, KernelPair, PairOptions};
use cbf_core::ops::verify_sonine;
use cbf_core::sim;
use cbf_core::solver::{SeriesSolution, Solver};
use cbf_core::CbfError;

/// Opaque kernel pair.
pub struct CbfPair {
    pair: KernelPair,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbfStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Numeric = 3,
    Panic = 4,
}

/// Series diagnostics of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CbfDiagnostics {
    pub terms_used: usize,
    pub tail_bound: f64,
    pub residual: f64,
    pub q: f64,
    pub bound_excess: f64,
}

/// A Monte Carlo estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CbfEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Kernel values at one point.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CbfKernelValues {
    pub tail: f64,
    pub density: f64,
    pub tail_primitive: f64,
    pub potential: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Core(CbfError),
}

impl From<CbfError> for Failure {
    fn from(e: CbfError) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CbfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CbfStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CbfStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            let status = match e.exit_code() {
                2 => CbfStatus::Validation,
                _ => CbfStatus::Numeric,
            };
            set_error(e.to_string());
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CbfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

fn boxed(pair: KernelPair) -> *mut CbfPair {
    Box::into_raw(Box::new(CbfPair { pair }))
}

/// Stable pair with index `alpha` in (0, 1).
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free
/// with `cbf_pair_free`.
#[no_mangle]
pub unsafe extern "C" fn cbf_pair_new_stable(alpha: f64, out_pair: *mut *mut CbfPair) -> CbfStatus {
    guard(|| {
        let slot = out(out_pair, "out_pair")?;
        *slot = ptr::null_mut();
        *slot = boxed(KernelPair::stable(alpha)?);
        Ok(())
    })
}

/// Pair from a JSON Bernstein specification, e.g.
/// `{"family": "tempered_stable", "alpha": 0.5, "theta": 1.0}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_pair` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cbf_pair_new_from_json(json: *const c_char, out_pair: *mut *mut CbfPair) -> CbfStatus {
    guard(|| {
        let slot = out(out_pair, "out_pair")?;
        *slot = ptr::null_mut();
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| CbfError::Validation(format!("json is not UTF-8: {e}")))?;
        let spec: BernsteinSpec =
            serde_json::from_str(text).map_err(|e| CbfError::Validation(format!("spec: {e}")))?;
        *slot = boxed(make_pair(&spec, &PairOptions::default())?);
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `pair` must come from a constructor of this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn cbf_pair_free(pair: *mut CbfPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// Contraction constant `q` of the pair.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbf_pair_q(pair: *const CbfPair, out_q: *mut f64) -> CbfStatus {
    guard(|| {
        let p = deref(pair, "pair")?;
        *out(out_q, "out_q")? = p.pair.q();
        Ok(())
    })
}

/// Tail, density, tail primitive and potential at `x > 0`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbf_pair_eval(pair: *const CbfPair, x: f64, out_values: *mut CbfKernelValues) -> CbfStatus {
    guard(|| {
        let p = &deref(pair, "pair")?.pair;
        let slot = out(out_values, "out_values")?;
        if !(x > 0.0 && x.is_finite()) {
            return Err(CbfError::Domain(format!("kernels are evaluated at x > 0, got {x}")).into());
        }
        *slot = CbfKernelValues {
            tail: p.tail(x),
            density: p.density(x),
            tail_primitive: p.tail_primitive(x),
            potential: p.potential(x),
        };
        Ok(())
    })
}

/// Largest deviation of `μ̄ ∗ k` from 1 on `n` cells of `[0, t_end]`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbf_verify_sonine(
    pair: *const CbfPair,
    t_end: f64,
    n: usize,
    out_deviation: *mut f64,
) -> CbfStatus {
    guard(|| {
        let p = &deref(pair, "pair")?.pair;
        let slot = out(out_deviation, "out_deviation")?;
        Grid::new(t_end, n)?;
        *slot = verify_sonine(p, t_end, n)?;
        Ok(())
    })
}

unsafe fn write_solution(
    sol: &SeriesSolution,
    values: *mut f64,
    len: usize,
    diagnostics: *mut CbfDiagnostics,
) -> Result<(), Failure> {
    let v = sol.phi.values();
    if len != v.len() {
        return Err(CbfError::Validation(format!("output buffer holds {len} values, need {}", v.len())).into());
    }
    if values.is_null() {
        return Err(Failure::Null("out_values"));
    }
    std::slice::from_raw_parts_mut(values, len).copy_from_slice(v);
    if let Some(d) = diagnostics.as_mut() {
        *d = CbfDiagnostics {
            terms_used: sol.terms_used,
            tail_bound: sol.tail_bound,
            residual: sol.residual,
            q: sol.q_used,
            bound_excess: sol.bound_excess,
        };
    }
    Ok(())
}

/// Homogeneous resolvent solution on `n` cells of `[0, t_end]`; `out_values`
/// must hold `n + 1` values. `out_diagnostics` may be null.
///
/// # Safety
/// Pointers must be valid and `out_values` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn cbf_solve_resolvent(
    pair: *const CbfPair,
    t_end: f64,
    n: usize,
    lambda: f64,
    phi0: f64,
    tol: f64,
    out_values: *mut f64,
    len: usize,
    out_diagnostics: *mut CbfDiagnostics,
) -> CbfStatus {
    guard(|| {
        let p = &deref(pair, "pair")?.pair;
        let solver = Solver::new(p, Grid::new(t_end, n)?)?;
        let sol = solver.solve_resolvent(lambda, phi0, tol)?;
        write_solution(&sol, out_values, len, out_diagnostics)
    })
}

/// Censored initial value problem with source values `g` at the `n + 1`
/// nodes of `[0, t_end]`.
///
/// # Safety
/// `g` and `out_values` must each hold `len = n + 1` values.
#[no_mangle]
pub unsafe extern "C" fn cbf_solve_ivp(
    pair: *const CbfPair,
    t_end: f64,
    n: usize,
    g: *const f64,
    phi0: f64,
    tol: f64,
    out_values: *mut f64,
    len: usize,
    out_diagnostics: *mut CbfDiagnostics,
) -> CbfStatus {
    guard(|| {
        let p = &deref(pair, "pair")?.pair;
        let grid = Grid::new(t_end, n)?;
        if g.is_null() {
            return Err(Failure::Null("g"));
        }
        if len != n + 1 {
            return Err(CbfError::Validation(format!("buffers hold {len} values, need {}", n + 1)).into());
        }
        let source = GridFunction::new(grid, std::slice::from_raw_parts(g, len).to_vec())?;
        let solver = Solver::new(p, grid)?;
        let sol = solver.solve_censored_ivp(&source, phi0, tol)?;
        write_solution(&sol, out_values, len, out_diagnostics)
    })
}

/// `E^x[τ_∞]` from `n_chains` exact undershoot chains.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbf_estimate_lifetime_mean(
    pair: *const CbfPair,
    x0: f64,
    n_chains: usize,
    seed: u64,
    out_estimate: *mut CbfEstimate,
) -> CbfStatus {
    guard(|| {
        let p = &deref(pair, "pair")?.pair;
        let slot = out(out_estimate, "out_estimate")?;
        let e = sim::estimate_lifetime_mean(p, x0, n_chains, seed)?;
        *slot = CbfEstimate {
            estimate: e.estimate,
            stderr: e.stderr,
            n: e.n,
        };
        Ok(())
    })
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn cbf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
