//! C ABI over the `delay-attractor` library.
//!
//! Handles are opaque and owned by the caller: every `*_new`/`*_from_*` has a
//! matching `*_free`. Functions return a [`DaStatus`]; on failure the message is
//! available from [`da_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use delay_attractor::bounds::{absorbing_radius, bound_at, optimize_bound_with, BoundReport};
use delay_attractor::config::RunConfig;
use delay_attractor::harness::{random_segment, stream_rng};
use delay_attractor::integrator::{Segment, Semiflow, Trajectory};
use delay_attractor::spectral::{build_spectral_data, dominant_root};
use delay_attractor::{validate, Error, Field, ModelParams};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    Divergence = 4,
    Unsupported = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

/// One evaluated `(m, α)` point of the dimension bound.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DaBound {
    pub m: usize,
    pub k_m: usize,
    pub alpha: f64,
    pub zeta: f64,
    /// NaN when infeasible.
    pub dim_bound: f64,
    pub feasible: bool,
}

/// Validated model built from a run configuration.
pub struct DaModel {
    config: RunConfig,
    params: ModelParams,
}

/// A running trajectory together with its semiflow.
pub struct DaTrajectory {
    flow: Semiflow,
    traj: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap_or_default());
}

fn status_of(err: &Error) -> DaStatus {
    match err {
        Error::InvalidParameter { .. }
        | Error::InvalidGrid(_)
        | Error::GridMismatch
        | Error::NegativeTime(_)
        | Error::StepMismatch { .. }
        | Error::OutOfRange { .. } => DaStatus::InvalidArgument,
        Error::Divergence { .. } => DaStatus::Divergence,
        Error::Infeasible(_) => DaStatus::Infeasible,
        Error::Unsupported(_) => DaStatus::Unsupported,
        Error::Config(_) | Error::Format(_) => DaStatus::Config,
        Error::Io(_) => DaStatus::Io,
    }
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), (DaStatus, String)>) -> DaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DaStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DaStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (DaStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (DaStatus, String) {
    (DaStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (DaStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (DaStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

fn model_from(config: RunConfig) -> Result<Box<DaModel>, (DaStatus, String)> {
    let params = config.params().map_err(lib_err)?;
    Ok(Box::new(DaModel { config, params }))
}

fn bound_out(r: &BoundReport) -> DaBound {
    DaBound {
        m: r.m,
        k_m: r.k_m,
        alpha: r.alpha,
        zeta: r.zeta,
        dim_bound: r.dim_bound.unwrap_or(f64::NAN),
        feasible: r.feasible,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn da_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn da_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a model from TOML text in the `delay-attractor` config format.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn da_model_from_toml(
    toml: *const c_char,
    out: *mut *mut DaModel,
) -> DaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(toml, "toml")?;
        let (config, _) = RunConfig::from_toml_str(text, &[]).map_err(lib_err)?;
        *out = Box::into_raw(model_from(config)?);
        Ok(())
    })
}

/// Applies a dotted `key=value` override and re-validates. The model is left
/// unchanged on failure.
///
/// # Safety
/// `model` must come from this library; `assignment` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn da_model_set(model: *mut DaModel, assignment: *const c_char) -> DaStatus {
    guard(|| {
        let model = model.as_mut().ok_or_else(|| null("model"))?;
        let assignment = read_str(assignment, "assignment")?;
        let text = model.config.to_toml().map_err(lib_err)?;
        let (config, _) =
            RunConfig::from_toml_str(&text, &[assignment.to_string()]).map_err(lib_err)?;
        *model = *model_from(config)?;
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn da_model_free(model: *mut DaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Hypothesis flags of the model.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn da_model_validate(
    model: *const DaModel,
    absorbing_ok: *mut bool,
    tail_contracts: *mut bool,
) -> DaStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if absorbing_ok.is_null() || tail_contracts.is_null() {
            return Err(null("output flag"));
        }
        let report = validate(&model.params).map_err(lib_err)?;
        *absorbing_ok = report.absorbing_ok;
        *tail_contracts = report.tail_contracts;
        Ok(())
    })
}

/// Radius of the absorbing ball; `DA_STATUS_INFEASIBLE` when the model is not dissipative.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn da_model_absorbing_radius(
    model: *const DaModel,
    out: *mut f64,
) -> DaStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = absorbing_radius(&model.params).map_err(lib_err)?;
        Ok(())
    })
}

/// Dominant real characteristic root for one Dirichlet eigenvalue, using the
/// model's `spectral.charEq` setting.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn da_model_dominant_root(
    model: *const DaModel,
    eigenvalue: f64,
    out: *mut f64,
) -> DaStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = dominant_root(eigenvalue, &model.params, model.config.spectral.form())
            .map_err(lib_err)?;
        Ok(())
    })
}

/// ζ and the dimension bound at a given cut `m` and slack `alpha`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn da_model_bound_at(
    model: *const DaModel,
    m: usize,
    alpha: f64,
    out: *mut DaBound,
) -> DaStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cfg = &model.config;
        let table = build_spectral_data(
            &model.params,
            1,
            cfg.spectral.m_max.max(m),
            cfg.spectral.form(),
        )
        .map_err(lib_err)?;
        let report =
            bound_at(&model.params, &table, m, alpha, cfg.bounds.t_star).map_err(lib_err)?;
        *out = bound_out(&report);
        Ok(())
    })
}

/// Best feasible `(m, α)` over the configured search, or the least-ζ point if none is feasible.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn da_model_optimize_bound(
    model: *const DaModel,
    out: *mut DaBound,
) -> DaStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cfg = &model.config;
        let form = cfg.spectral.form();
        let table =
            build_spectral_data(&model.params, 1, cfg.spectral.m_max, form).map_err(lib_err)?;
        let report = optimize_bound_with(&model.params, &table, &cfg.bounds.options(form))
            .map_err(lib_err)?;
        *out = bound_out(&report);
        Ok(())
    })
}

fn start_trajectory(
    model: &DaModel,
    make: impl FnOnce(&Semiflow) -> delay_attractor::Result<Segment>,
) -> Result<Box<DaTrajectory>, (DaStatus, String)> {
    let flow =
        Semiflow::new(model.params.clone(), model.config.integrator.n_tau).map_err(lib_err)?;
    let phi = make(&flow).map_err(lib_err)?;
    let traj = flow.start(phi).map_err(lib_err)?;
    Ok(Box::new(DaTrajectory { flow, traj }))
}

/// Trajectory from the constant history `u ≡ value`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn da_trajectory_new_constant(
    model: *const DaModel,
    value: f64,
    out: *mut *mut DaTrajectory,
) -> DaStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = start_trajectory(model, |flow| {
            Segment::constant(
                Field::constant(flow.grid(), value),
                flow.n_tau(),
                model.params.tau,
            )
        })?;
        *out = Box::into_raw(t);
        Ok(())
    })
}

/// Trajectory from a seeded band-limited random history with `‖φ‖_C = norm`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn da_trajectory_new_random(
    model: *const DaModel,
    norm: f64,
    seed: u64,
    out: *mut *mut DaTrajectory,
) -> DaStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = model.config.initial.segment_spec();
        let t = start_trajectory(model, |flow| {
            random_segment(
                flow.engine(),
                flow.n_tau(),
                model.params.tau,
                norm,
                &spec,
                &mut stream_rng(seed, 0),
            )
        })?;
        *out = Box::into_raw(t);
        Ok(())
    })
}

/// Advances by `steps` integrator steps.
///
/// # Safety
/// `traj` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn da_trajectory_step(traj: *mut DaTrajectory, steps: usize) -> DaStatus {
    guard(|| {
        let t = traj.as_mut().ok_or_else(|| null("traj"))?;
        for _ in 0..steps {
            t.flow.step(&mut t.traj).map_err(lib_err)?;
        }
        Ok(())
    })
}

/// Advances by `duration`, which must be a multiple of the step `τ/n_τ`.
///
/// # Safety
/// `traj` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn da_trajectory_advance(traj: *mut DaTrajectory, duration: f64) -> DaStatus {
    guard(|| {
        let t = traj.as_mut().ok_or_else(|| null("traj"))?;
        t.flow.advance(&mut t.traj, duration).map_err(lib_err)
    })
}

/// Elapsed time, or NaN for a null handle.
///
/// # Safety
/// `traj` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn da_trajectory_time(traj: *const DaTrajectory) -> f64 {
    traj.as_ref().map_or(f64::NAN, |t| t.traj.time())
}

/// `‖u_t‖_C` of the current history window, or NaN for a null handle.
///
/// # Safety
/// `traj` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn da_trajectory_segment_norm(traj: *const DaTrajectory) -> f64 {
    traj.as_ref().map_or(f64::NAN, |t| t.traj.segment_norm())
}

/// Number of grid nodes in one state, or 0 for a null handle.
///
/// # Safety
/// `traj` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn da_trajectory_len(traj: *const DaTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.traj.state().values().len())
}

/// Copies the current state `u(t)` (row-major) into `buf` of length `len`.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn da_trajectory_state(
    traj: *const DaTrajectory,
    buf: *mut f64,
    len: usize,
) -> DaStatus {
    guard(|| {
        let t = traj.as_ref().ok_or_else(|| null("traj"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let values = t.traj.state().values();
        if len != values.len() {
            return Err((
                DaStatus::InvalidArgument,
                format!("buffer holds {len} values, state has {}", values.len()),
            ));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, len);
        Ok(())
    })
}

/// # Safety
/// `traj` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn da_trajectory_free(traj: *mut DaTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}
