//! C interface to `cffcm`.
//!
//! Every fallible function returns a [`CffcmStatus`] and writes its result
//! through an out pointer. On failure, [`cffcm_last_error_message`] describes
//! the most recent error raised on the calling thread. Handles are created by
//! `*_new` / `cffcm_solve` and released by the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use cffcm::bench::{example4_problem, Example4Case};
use cffcm::cf::{cf_exact_cos, cf_exact_exp, cf_exact_power, fast_init, fast_sweep, l1_direct, l1_sweep};
use cffcm::solver::{solve_with, ExactSolution, SolveOptions, SpaceFn, SpaceTimeFn, CG_DEFAULT_TOL};
use cffcm::spectral::error_norms;
use cffcm::{
    Error, FastCfState, FractionalOrder, LinearSolver, MultiTermOperator, ProblemSpec, SampledSignal, Solution,
    TimeGrid,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CffcmStatus {
    Ok = 0,
    NullPointer = 1,
    /// Argument outside the domain of the operation.
    Domain = 2,
    SingularParameter = 3,
    QuadratureNotConverged = 4,
    NewtonNotConverged = 5,
    CgNotConverged = 6,
    NotPositiveDefinite = 7,
    /// Initial data not zero at the boundary.
    Compatibility = 8,
    /// Output buffer shorter than required.
    BufferTooSmall = 9,
    Internal = 10,
    /// A Rust panic was caught at the boundary.
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CffcmSolver {
    ConjugateGradient = 0,
    Cholesky = 1,
}

/// Errors at the final time; `h1` has unit weight on the derivative.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CffcmErrorNorms {
    pub sup: f64,
    pub l2: f64,
    pub h1: f64,
}

/// `f(x, user_data)`
pub type CffcmSpaceFn = Option<extern "C" fn(x: f64, user_data: *mut c_void) -> f64>;
/// `f(x, t, user_data)`
pub type CffcmSpaceTimeFn = Option<extern "C" fn(x: f64, t: f64, user_data: *mut c_void) -> f64>;

/// Running fast CF derivative of a scalar signal.
pub struct CffcmFastState(FastCfState);

/// A diffusion problem on `[0, S] x (0, T]`.
pub struct CffcmProblem(ProblemSpec);

/// The field at the final time of a march.
pub struct CffcmSolution(Solution);

enum Failure {
    Null(&'static str),
    Buffer { needed: usize, given: usize },
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> CffcmStatus {
    match e {
        Error::Domain(_) | Error::Config(_) => CffcmStatus::Domain,
        Error::SingularParameter(_) => CffcmStatus::SingularParameter,
        Error::QuadratureNotConverged { .. } => CffcmStatus::QuadratureNotConverged,
        Error::NewtonNotConverged { .. } => CffcmStatus::NewtonNotConverged,
        Error::CgNotConverged { .. } => CffcmStatus::CgNotConverged,
        Error::NotPositiveDefinite => CffcmStatus::NotPositiveDefinite,
        Error::Compatibility(_) => CffcmStatus::Compatibility,
        _ => CffcmStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CffcmStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return CffcmStatus::Ok,
        Ok(Err(Failure::Null(name))) => (CffcmStatus::NullPointer, format!("{name} is null")),
        Ok(Err(Failure::Buffer { needed, given })) => (
            CffcmStatus::BufferTooSmall,
            format!("output buffer holds {given} values, {needed} needed"),
        ),
        Ok(Err(Failure::Core(e))) => (status_of(&e), e.to_string()),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (CffcmStatus::Panic, format!("panic: {msg}"))
        }
    };
    set_last_error(msg);
    status
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn in_slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn order(alpha: f64) -> Result<FractionalOrder, Failure> {
    Ok(FractionalOrder::new(alpha)?)
}

/// Samples `values[0..len]` on a uniform grid of `[0, horizon]`.
unsafe fn signal(values: *const f64, len: usize, horizon: f64) -> Result<SampledSignal, Failure> {
    let v = in_slice(values, len, "values")?;
    if v.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {}", v.len())).into());
    }
    let grid = TimeGrid::new(horizon, v.len() - 1)?;
    Ok(SampledSignal::new(grid, v.to_vec())?)
}

/// Version string of the library, statically allocated.
#[no_mangle]
pub extern "C" fn cffcm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cffcm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Exact CF derivative of `t^m`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cffcm_exact_power(m: u32, alpha: f64, t: f64, out: *mut f64) -> CffcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = cf_exact_power(m, order(alpha)?, t);
        Ok(())
    })
}

/// Exact CF derivative of `cos(omega t)`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cffcm_exact_cos(omega: f64, alpha: f64, t: f64, out: *mut f64) -> CffcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = cf_exact_cos(omega, order(alpha)?, t);
        Ok(())
    })
}

/// Exact CF derivative of `exp(omega t)`; fails near `omega = -beta`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cffcm_exact_exp(omega: f64, alpha: f64, t: f64, out: *mut f64) -> CffcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = cf_exact_exp(omega, order(alpha)?, t)?;
        Ok(())
    })
}

/// L1 value at step `k` of `len` samples on `[0, horizon]`, summing the full
/// history.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cffcm_l1_direct(
    values: *const f64,
    len: usize,
    horizon: f64,
    alpha: f64,
    k: usize,
    out: *mut f64,
) -> CffcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = l1_direct(&signal(values, len, horizon)?, order(alpha)?, k)?;
        Ok(())
    })
}

unsafe fn write_sweep(result: &[f64], out: *mut f64, out_len: usize) -> Result<(), Failure> {
    if out_len < result.len() {
        return Err(Failure::Buffer {
            needed: result.len(),
            given: out_len,
        });
    }
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    std::slice::from_raw_parts_mut(out, result.len()).copy_from_slice(result);
    Ok(())
}

/// L1 values at `k = 1..len-1` with tabulated coefficients, O(len^2) work.
/// `out` receives `len - 1` values.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` to `out_len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cffcm_l1_sweep(
    values: *const f64,
    len: usize,
    horizon: f64,
    alpha: f64,
    out: *mut f64,
    out_len: usize,
) -> CffcmStatus {
    guard(|| {
        let result = l1_sweep(&signal(values, len, horizon)?, order(alpha)?);
        write_sweep(&result, out, out_len)
    })
}

/// Same values as [`cffcm_l1_sweep`] from the O(1)-memory recurrence.
///
/// # Safety
/// As for [`cffcm_l1_sweep`].
#[no_mangle]
pub unsafe extern "C" fn cffcm_fast_sweep(
    values: *const f64,
    len: usize,
    horizon: f64,
    alpha: f64,
    out: *mut f64,
    out_len: usize,
) -> CffcmStatus {
    guard(|| {
        let result = fast_sweep(&signal(values, len, horizon)?, order(alpha)?)?;
        write_sweep(&result, out, out_len)
    })
}

/// Starts the recurrence from `h(0) = h0`, `h(dt) = h1`.
///
/// # Safety
/// `out` must be valid for writes. The handle must be released with
/// [`cffcm_fast_state_free`].
#[no_mangle]
pub unsafe extern "C" fn cffcm_fast_state_new(
    alpha: f64,
    dt: f64,
    h0: f64,
    h1: f64,
    out: *mut *mut CffcmFastState,
) -> CffcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let state = fast_init(order(alpha)?, dt, h0, h1)?;
        *out = Box::into_raw(Box::new(CffcmFastState(state)));
        Ok(())
    })
}

/// Advances by one step with the next sample; writes the new value to
/// `value` when it is not null.
///
/// # Safety
/// `state` must come from [`cffcm_fast_state_new`]; `value` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cffcm_fast_state_step(
    state: *mut CffcmFastState,
    h_next: f64,
    value: *mut f64,
) -> CffcmStatus {
    guard(|| {
        let state = out_ref(state, "state")?;
        let v = state.0.step(h_next);
        if let Some(value) = value.as_mut() {
            *value = v;
        }
        Ok(())
    })
}

/// Current value and step index of the recurrence.
///
/// # Safety
/// `state` must come from [`cffcm_fast_state_new`]; the out pointers must be
/// null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cffcm_fast_state_current(
    state: *const CffcmFastState,
    value: *mut f64,
    step: *mut usize,
) -> CffcmStatus {
    guard(|| {
        let state = state.as_ref().ok_or(Failure::Null("state"))?;
        if let Some(value) = value.as_mut() {
            *value = state.0.current();
        }
        if let Some(step) = step.as_mut() {
            *step = state.0.step_index();
        }
        Ok(())
    })
}

/// # Safety
/// `state` must be null or come from [`cffcm_fast_state_new`], and must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cffcm_fast_state_free(state: *mut CffcmFastState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// The manufactured three-term problem on `[0, pi]` with exact solution
/// `(1 + t^2) sin x`, weights `1, 2, 3` and the order set `case` (1 to 4).
///
/// # Safety
/// `out` must be valid for writes. Release with [`cffcm_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn cffcm_problem_example(case: u8, horizon: f64, out: *mut *mut CffcmProblem) -> CffcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let case = Example4Case::from_number(case)?;
        let spec = example4_problem(case.operator(), horizon)?;
        *out = Box::into_raw(Box::new(CffcmProblem(spec)));
        Ok(())
    })
}

#[derive(Clone, Copy)]
struct UserData(*mut c_void);

// The caller promises the callbacks may be invoked with `user_data` from any
// thread for as long as the problem lives.
unsafe impl Send for UserData {}
unsafe impl Sync for UserData {}

impl UserData {
    fn get(self) -> *mut c_void {
        self.0
    }
}

/// A problem with `n_terms` orders, initial data `initial(x)` and forcing
/// `forcing(x, t)`.
///
/// # Safety
/// `weights` and `alphas` must point to `n_terms` readable doubles. The
/// callbacks are called with `user_data`, possibly after this function
/// returns, until the problem is freed; they must not unwind.
#[no_mangle]
pub unsafe extern "C" fn cffcm_problem_new(
    weights: *const f64,
    alphas: *const f64,
    n_terms: usize,
    length: f64,
    horizon: f64,
    initial: CffcmSpaceFn,
    forcing: CffcmSpaceTimeFn,
    user_data: *mut c_void,
    out: *mut *mut CffcmProblem,
) -> CffcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let weights = in_slice(weights, n_terms, "weights")?;
        let alphas = in_slice(alphas, n_terms, "alphas")?;
        let initial = initial.ok_or(Failure::Null("initial"))?;
        let forcing = forcing.ok_or(Failure::Null("forcing"))?;
        let ud = UserData(user_data);
        let initial: SpaceFn = Arc::new(move |x| initial(x, ud.get()));
        let forcing: SpaceTimeFn = Arc::new(move |x, t| forcing(x, t, ud.get()));
        let mt = MultiTermOperator::new(weights, alphas)?;
        let spec = ProblemSpec::new(length, horizon, mt, initial, forcing)?;
        *out = Box::into_raw(Box::new(CffcmProblem(spec)));
        Ok(())
    })
}

/// Attaches an exact solution `u(x, t)` and its `x` derivative, enabling
/// [`cffcm_solution_errors`].
///
/// # Safety
/// `problem` must come from a `cffcm_problem_*` constructor. The callback
/// contract of [`cffcm_problem_new`] applies.
#[no_mangle]
pub unsafe extern "C" fn cffcm_problem_set_exact(
    problem: *mut CffcmProblem,
    value: CffcmSpaceTimeFn,
    dx: CffcmSpaceTimeFn,
    user_data: *mut c_void,
) -> CffcmStatus {
    guard(|| {
        let problem = out_ref(problem, "problem")?;
        let value = value.ok_or(Failure::Null("value"))?;
        let dx = dx.ok_or(Failure::Null("dx"))?;
        let ud = UserData(user_data);
        problem.0.exact = Some(ExactSolution {
            value: Arc::new(move |x, t| value(x, t, ud.get())),
            dx: Arc::new(move |x, t| dx(x, t, ud.get())),
        });
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or come from a `cffcm_problem_*` constructor, and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cffcm_problem_free(problem: *mut CffcmProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Marches `steps` uniform steps with LGL degree `degree`. `tol <= 0` selects
/// the default CG tolerance; it is ignored for Cholesky.
///
/// # Safety
/// `problem` must come from a `cffcm_problem_*` constructor and `out` must be
/// valid for writes. Release the solution with [`cffcm_solution_free`].
#[no_mangle]
pub unsafe extern "C" fn cffcm_solve(
    problem: *const CffcmProblem,
    degree: usize,
    steps: usize,
    solver: CffcmSolver,
    tol: f64,
    out: *mut *mut CffcmSolution,
) -> CffcmStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or(Failure::Null("problem"))?;
        let out = out_ref(out, "out")?;
        let solver = match solver {
            CffcmSolver::ConjugateGradient => LinearSolver::ConjugateGradient {
                tol: if tol > 0.0 { tol } else { CG_DEFAULT_TOL },
                max_iter: None,
            },
            CffcmSolver::Cholesky => LinearSolver::Cholesky,
        };
        let options = SolveOptions {
            solver,
            record_norms: false,
        };
        let sol = solve_with(&problem.0, degree, steps, options)?;
        *out = Box::into_raw(Box::new(CffcmSolution(sol)));
        Ok(())
    })
}

/// Number of nodal values, `degree + 1`.
///
/// # Safety
/// `solution` must be null or come from [`cffcm_solve`].
#[no_mangle]
pub unsafe extern "C" fn cffcm_solution_len(solution: *const CffcmSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.0.field.values().len())
}

/// Copies the nodal values and, when `nodes` is not null, the node positions.
///
/// # Safety
/// `solution` must come from [`cffcm_solve`]; `values` (and `nodes`, if not
/// null) must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cffcm_solution_values(
    solution: *const CffcmSolution,
    values: *mut f64,
    nodes: *mut f64,
    len: usize,
) -> CffcmStatus {
    guard(|| {
        let sol = &solution.as_ref().ok_or(Failure::Null("solution"))?.0;
        let field = sol.field.values();
        write_sweep(field, values, len)?;
        if !nodes.is_null() {
            write_sweep(sol.field.basis().nodes(), nodes, len)?;
        }
        Ok(())
    })
}

/// Interpolated value of the final field at `x`.
///
/// # Safety
/// `solution` must come from [`cffcm_solve`]; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cffcm_solution_eval(solution: *const CffcmSolution, x: f64, out: *mut f64) -> CffcmStatus {
    guard(|| {
        let sol = &solution.as_ref().ok_or(Failure::Null("solution"))?.0;
        let out = out_ref(out, "out")?;
        if !(0.0..=sol.field.basis().length()).contains(&x) {
            return Err(Error::Domain(format!("x = {x} outside [0, {}]", sol.field.basis().length())).into());
        }
        *out = sol.field.eval(x);
        Ok(())
    })
}

/// Errors of `solution` against the exact solution of `problem` at the final
/// time.
///
/// # Safety
/// `solution` must come from [`cffcm_solve`] on `problem`; `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cffcm_solution_errors(
    solution: *const CffcmSolution,
    problem: *const CffcmProblem,
    out: *mut CffcmErrorNorms,
) -> CffcmStatus {
    guard(|| {
        let sol = &solution.as_ref().ok_or(Failure::Null("solution"))?.0;
        let problem = &problem.as_ref().ok_or(Failure::Null("problem"))?.0;
        let out = out_ref(out, "out")?;
        let exact = problem
            .exact
            .as_ref()
            .ok_or_else(|| Error::Domain("problem has no exact solution".into()))?;
        let t = sol.time;
        let e = error_norms(|x| (exact.value)(x, t), |x| (exact.dx)(x, t), &sol.field, 1.0)?;
        *out = CffcmErrorNorms {
            sup: e.sup,
            l2: e.l2,
            h1: e.h1,
        };
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or come from [`cffcm_solve`], and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cffcm_solution_free(solution: *mut CffcmSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}
