//! C ABI for the mean-variance solver.
//!
//! The exported surface mirrors `include/roughmv.h`: a solve call that
//! returns an opaque handle, copy-out accessors for the curves, scalar
//! getters for the closed-form quantities, and a per-thread error message
//! channel. The header is written by hand and a test keeps it in lockstep
//! with the exported symbols, so the two files must change together.
//!
//! Panics never cross the boundary: every entry point that can fail runs
//! under `catch_unwind` and reports `ROUGHMV_NUMERIC_FAILURE` instead.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, UnwindSafe};

use roughmv::kernels::KernelSpec;
use roughmv::portfolio::{solve_mv, ModelParams, MVSolution, RateCurve};
use roughmv::{Error, Grid};

/// Result code of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoughmvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NumericFailure = 3,
    Explosion = 4,
}

pub const ROUGHMV_KERNEL_CONSTANT: i32 = 0;
pub const ROUGHMV_KERNEL_FRACTIONAL: i32 = 1;
pub const ROUGHMV_KERNEL_EXPONENTIAL: i32 = 2;

/// Mirror of `roughmv_model`; field order is ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RoughmvModel {
    pub v0: f64,
    pub kappa: f64,
    pub phi: f64,
    pub sigma: f64,
    pub rho: f64,
    pub theta: f64,
    pub rate: f64,
    pub horizon: f64,
    pub x0: f64,
    pub c: f64,
}

/// Mirror of `roughmv_kernel`; field order is ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RoughmvKernel {
    pub shape: i32,
    pub scale: f64,
    pub param: f64,
}

/// Opaque solved problem behind the `roughmv_solution` pointer.
pub struct RoughmvSolution {
    inner: MVSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let cstring = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = cstring);
}

fn status_of(e: &Error) -> RoughmvStatus {
    match e {
        Error::Numeric(_) => RoughmvStatus::NumericFailure,
        Error::Explosion { .. } => RoughmvStatus::Explosion,
        _ => RoughmvStatus::InvalidParameter,
    }
}

fn fail(e: &Error) -> RoughmvStatus {
    set_error(e.to_string());
    status_of(e)
}

fn fail_null(what: &str) -> RoughmvStatus {
    set_error(format!("{what} must not be NULL"));
    RoughmvStatus::NullPointer
}

fn guarded<F>(f: F) -> RoughmvStatus
where
    F: FnOnce() -> RoughmvStatus + UnwindSafe,
{
    match catch_unwind(f) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".into());
            RoughmvStatus::NumericFailure
        }
    }
}

fn build_kernel(k: &RoughmvKernel) -> roughmv::Result<KernelSpec> {
    match k.shape {
        ROUGHMV_KERNEL_CONSTANT => KernelSpec::constant(k.scale),
        ROUGHMV_KERNEL_FRACTIONAL => KernelSpec::fractional(k.scale, k.param),
        ROUGHMV_KERNEL_EXPONENTIAL => KernelSpec::exponential(k.scale, k.param),
        other => Err(Error::InvalidParameter(format!(
            "unknown kernel shape code {other}"
        ))),
    }
}

fn build_params(m: &RoughmvModel) -> ModelParams {
    ModelParams {
        v0: m.v0,
        kappa: m.kappa,
        phi: m.phi,
        sigma: m.sigma,
        rho: m.rho,
        theta: m.theta,
        rate: RateCurve::Constant(m.rate),
        horizon: m.horizon,
        x0: m.x0,
        c: m.c,
    }
}

/// Static version string.
#[no_mangle]
pub extern "C" fn roughmv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Most recent failure on this thread, empty if none so far. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn roughmv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Solve the problem and hand back an owned handle through `out`.
///
/// # Safety
/// `model`, `kernel`, and `out` must be valid for reads (writes for
/// `out`) or NULL; NULL is reported, not dereferenced.
#[no_mangle]
pub unsafe extern "C" fn roughmv_solve(
    model: *const RoughmvModel,
    kernel: *const RoughmvKernel,
    n_steps: usize,
    out: *mut *mut RoughmvSolution,
) -> RoughmvStatus {
    guarded(|| {
        if out.is_null() {
            return fail_null("out");
        }
        let (Some(model), Some(kernel)) = (model.as_ref(), kernel.as_ref()) else {
            return fail_null("model and kernel");
        };
        let spec = match build_kernel(kernel) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let params = build_params(model);
        let solved = Grid::new(params.horizon, n_steps)
            .and_then(|grid| solve_mv(&params, &spec, &grid));
        match solved {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RoughmvSolution { inner }));
                RoughmvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a handle produced by [`roughmv_solve`]. NULL is a no-op.
///
/// # Safety
/// `sol` must be NULL or a pointer returned by `roughmv_solve` that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn roughmv_solution_free(sol: *mut RoughmvSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Grid length of the solution; 0 for NULL.
///
/// # Safety
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn roughmv_solution_len(sol: *const RoughmvSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.inner.psi().grid().len())
}

unsafe fn copy_curve(
    sol: *const RoughmvSolution,
    buf: *mut f64,
    len: usize,
    values: impl FnOnce(&RoughmvSolution) -> Vec<f64> + UnwindSafe,
) -> RoughmvStatus {
    guarded(|| {
        let Some(sol) = sol.as_ref() else {
            return fail_null("sol");
        };
        if buf.is_null() {
            return fail_null("buf");
        }
        let curve = values(sol);
        if len != curve.len() {
            set_error(format!(
                "buffer holds {len} values but the grid has {}",
                curve.len()
            ));
            return RoughmvStatus::InvalidParameter;
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&curve);
        RoughmvStatus::Ok
    })
}

/// Copy the grid times into `buf`.
///
/// # Safety
/// `sol` must be NULL or live; `buf` NULL or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn roughmv_solution_times(
    sol: *const RoughmvSolution,
    buf: *mut f64,
    len: usize,
) -> RoughmvStatus {
    copy_curve(sol, buf, len, |s| s.inner.psi().grid().nodes().collect())
}

/// Copy the strategy-equation curve into `buf`.
///
/// # Safety
/// `sol` must be NULL or live; `buf` NULL or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn roughmv_solution_psi(
    sol: *const RoughmvSolution,
    buf: *mut f64,
    len: usize,
) -> RoughmvStatus {
    copy_curve(sol, buf, len, |s| s.inner.psi().values().to_vec())
}

/// Copy the per-node hedging weights into `buf`.
///
/// # Safety
/// `sol` must be NULL or live; `buf` NULL or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn roughmv_solution_hedging_weights(
    sol: *const RoughmvSolution,
    buf: *mut f64,
    len: usize,
) -> RoughmvStatus {
    copy_curve(sol, buf, len, |s| s.inner.hedging_weights())
}

unsafe fn scalar(sol: *const RoughmvSolution, get: impl FnOnce(&MVSolution) -> f64) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| get(&s.inner))
}

/// Initial scaling factor M0; NaN for NULL.
///
/// # Safety
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn roughmv_solution_m0(sol: *const RoughmvSolution) -> f64 {
    scalar(sol, MVSolution::m0)
}

/// Expectation-constraint multiplier; NaN for NULL.
///
/// # Safety
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn roughmv_solution_eta_star(sol: *const RoughmvSolution) -> f64 {
    scalar(sol, MVSolution::eta_star)
}

/// Shifted wealth target; NaN for NULL.
///
/// # Safety
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn roughmv_solution_zeta_star(sol: *const RoughmvSolution) -> f64 {
    scalar(sol, MVSolution::zeta_star)
}

/// Terminal-wealth variance under the optimal strategy; NaN for NULL.
///
/// # Safety
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn roughmv_solution_optimal_variance(
    sol: *const RoughmvSolution,
) -> f64 {
    scalar(sol, MVSolution::variance_opt)
}

unsafe fn feedback(
    sol: *const RoughmvSolution,
    out: *mut f64,
    eval: impl FnOnce(&MVSolution) -> roughmv::Result<f64> + UnwindSafe,
) -> RoughmvStatus {
    guarded(|| {
        let Some(sol) = sol.as_ref() else {
            return fail_null("sol");
        };
        if out.is_null() {
            return fail_null("out");
        }
        match eval(&sol.inner) {
            Ok(v) => {
                *out = v;
                RoughmvStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Optimal dollar volatility exposure at (t, v, x); t must be on the grid.
///
/// # Safety
/// `sol` must be NULL or live; `out_u` NULL or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn roughmv_optimal_control(
    sol: *const RoughmvSolution,
    t: f64,
    v: f64,
    x: f64,
    out_u: *mut f64,
) -> RoughmvStatus {
    feedback(sol, out_u, move |mv| mv.optimal_u(t, v, x))
}

/// Optimal dollar stock position at (t, v, x); t must be on the grid.
///
/// # Safety
/// `sol` must be NULL or live; `out_pi` NULL or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn roughmv_optimal_exposure(
    sol: *const RoughmvSolution,
    t: f64,
    v: f64,
    x: f64,
    out_pi: *mut f64,
) -> RoughmvStatus {
    feedback(sol, out_pi, move |mv| mv.optimal_pi(t, v, x))
}
