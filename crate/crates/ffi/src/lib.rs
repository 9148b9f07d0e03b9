//! C ABI over `asor_lab`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! style constructors and released with the matching `*_free`. Every fallible
//! call returns an [`AsorStatus`]; on failure a human-readable message is kept
//! per thread and can be fetched with [`asor_last_error_message`]. Strings
//! handed out by this library must be released with [`asor_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use asor_lab::analysis::{accessible_states, certify_family, CertifyOptions};
use asor_lab::lavaworld::{LavaLayout, LavaWorld};
use asor_lab::mdp::{optimal_policy, policy_evaluation, HipMdp, StateId, TabularPolicy};
use asor_lab::train::{
    exact_per_theta, train, EvalMode, TrainOutcome, TrainerConfig, DEFAULT_HORIZON,
};
use asor_lab::Error;

const SOLVER_TOL: f64 = 1e-10;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsorStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad configuration, layout or argument.
    InvalidArgument = 3,
    /// Model, policy or distribution failed validation.
    InvalidModel = 4,
    OutOfRange = 5,
    /// A solver did not converge or hit a singular system.
    Numerical = 6,
    /// A detour certificate does not exist.
    Infeasible = 7,
    Io = 8,
    /// Malformed TOML, JSON or CSV input.
    Parse = 9,
    /// The output buffer is shorter than required.
    BufferTooSmall = 10,
    /// A panic was caught at the boundary.
    Internal = 11,
}

/// A lava-world family: layout, state encoding and the tabular model.
pub struct AsorWorld {
    world: LavaWorld,
    mdp: HipMdp,
}

/// A stochastic tabular policy.
pub struct AsorPolicy {
    inner: TabularPolicy,
}

/// The outcome of one training run.
pub struct AsorTrainResult {
    inner: TrainOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> AsorStatus {
    match e {
        Error::InvalidModel(_)
        | Error::InvalidPolicy(_)
        | Error::InvalidDistribution(_)
        | Error::DegenerateSupport => AsorStatus::InvalidModel,
        Error::InvalidLayout(_)
        | Error::GoalUnreachable { .. }
        | Error::Config(_)
        | Error::EmptyBatch
        | Error::EmptyDatasets
        | Error::UnknownGridState { .. } => AsorStatus::InvalidArgument,
        Error::StateOutOfRange(_) | Error::ThetaOutOfRange(_) => AsorStatus::OutOfRange,
        Error::NotConverged { .. } | Error::Singular(_) => AsorStatus::Numerical,
        Error::InfeasibleCertificate { .. } => AsorStatus::Infeasible,
        Error::Io(_) => AsorStatus::Io,
        Error::Json(_) | Error::Toml(_) | Error::Csv(_) | Error::Format(_) => AsorStatus::Parse,
    }
}

struct Failure(AsorStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, records any failure as the thread's last error and converts
/// panics into [`AsorStatus::Internal`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AsorStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AsorStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal error: {msg}"));
            AsorStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(AsorStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            AsorStatus::InvalidUtf8,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    let c =
        CString::new(s).map_err(|_| Failure(AsorStatus::Internal, "string contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn write_slice<T: Copy>(src: &[T], out: *mut T, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < src.len() {
        return Err(Failure(
            AsorStatus::BufferTooSmall,
            format!("buffer holds {len} entries, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

fn theta_ok(mdp: &HipMdp, theta: usize) -> Result<(), Failure> {
    if theta < mdp.num_thetas() {
        Ok(())
    } else {
        Err(Error::ThetaOutOfRange(theta).into())
    }
}

fn world_from(layout: LavaLayout) -> Result<AsorWorld, Failure> {
    let world = LavaWorld::new(layout)?;
    let mdp = world.build_hipmdp()?;
    Ok(AsorWorld { world, mdp })
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn asor_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy of the calling thread's last error message, or null if the last
/// call succeeded. Release with [`asor_string_free`].
#[no_mangle]
pub extern "C" fn asor_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(ptr::null_mut(), |s| s.clone().into_raw())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn asor_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The built-in six-by-six layout with four hidden parameters.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn asor_world_canonical(out: *mut *mut AsorWorld) -> AsorStatus {
    guard(|| write_out(out, world_from(LavaLayout::canonical())?))
}

/// Builds a world from layout TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_world_from_toml(
    toml: *const c_char,
    out: *mut *mut AsorWorld,
) -> AsorStatus {
    guard(|| {
        let text = read_str(toml, "toml")?;
        write_out(out, world_from(LavaLayout::from_toml_str(text)?)?)
    })
}

/// Builds a world from a layout TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_world_load(
    path: *const c_char,
    out: *mut *mut AsorWorld,
) -> AsorStatus {
    guard(|| {
        let path = read_str(path, "path")?;
        write_out(out, world_from(LavaLayout::load(path)?)?)
    })
}

/// # Safety
/// `world` must come from an `asor_world_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn asor_world_free(world: *mut AsorWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Number of states; zero for a null handle.
///
/// # Safety
/// `world` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn asor_world_num_states(world: *const AsorWorld) -> usize {
    world.as_ref().map_or(0, |w| w.mdp.num_states())
}

/// # Safety
/// `world` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn asor_world_num_actions(world: *const AsorWorld) -> usize {
    world.as_ref().map_or(0, |w| w.mdp.num_actions())
}

/// # Safety
/// `world` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn asor_world_num_thetas(world: *const AsorWorld) -> usize {
    world.as_ref().map_or(0, |w| w.mdp.num_thetas())
}

/// Index of the start state.
///
/// # Safety
/// `world` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_world_start_state(
    world: *const AsorWorld,
    out: *mut usize,
) -> AsorStatus {
    guard(|| {
        let w = borrow(world, "world")?;
        write_slice(&[w.world.start_state().0], out, 1)
    })
}

/// Writes 1 for every globally accessible state and 0 elsewhere.
/// `len` must be at least the number of states.
///
/// # Safety
/// `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn asor_world_accessible_mask(
    world: *const AsorWorld,
    out: *mut u8,
    len: usize,
) -> AsorStatus {
    guard(|| {
        let w = borrow(world, "world")?;
        let mask: Vec<u8> = accessible_states(&w.mdp)
            .mask(w.mdp.num_states())
            .into_iter()
            .map(u8::from)
            .collect();
        write_slice(&mask, out, len)
    })
}

/// Optimal state values under hidden parameter `theta`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn asor_world_optimal_values(
    world: *const AsorWorld,
    theta: usize,
    out: *mut f64,
    len: usize,
) -> AsorStatus {
    guard(|| {
        let w = borrow(world, "world")?;
        theta_ok(&w.mdp, theta)?;
        let (_, values) = optimal_policy(&w.mdp, theta, SOLVER_TOL)?;
        write_slice(&values.v, out, len)
    })
}

/// Detour certificates for every ordered pair of hidden parameters, as JSON.
/// An infeasible family is still reported with status `Ok`; inspect the
/// `feasible` field.
///
/// # Safety
/// `out_json` must be writable; release the result with [`asor_string_free`].
#[no_mangle]
pub unsafe extern "C" fn asor_world_certify_json(
    world: *const AsorWorld,
    m_max: usize,
    out_json: *mut *mut c_char,
) -> AsorStatus {
    guard(|| {
        let w = borrow(world, "world")?;
        if m_max == 0 {
            return Err(Error::Config("m_max must be at least 1".into()).into());
        }
        let cert = certify_family(&w.mdp, &CertifyOptions::with_m_max(m_max))?;
        write_string(out_json, serde_json::to_string(&cert).map_err(Error::from)?)
    })
}

/// Uniform policy over the world's states and actions.
///
/// # Safety
/// `world` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_policy_uniform(
    world: *const AsorWorld,
    out: *mut *mut AsorPolicy,
) -> AsorStatus {
    guard(|| {
        let w = borrow(world, "world")?;
        write_out(
            out,
            AsorPolicy {
                inner: TabularPolicy::uniform(w.mdp.num_states(), w.mdp.num_actions()),
            },
        )
    })
}

/// Deterministic optimal policy under hidden parameter `theta`.
///
/// # Safety
/// `world` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_policy_optimal(
    world: *const AsorWorld,
    theta: usize,
    out: *mut *mut AsorPolicy,
) -> AsorStatus {
    guard(|| {
        let w = borrow(world, "world")?;
        theta_ok(&w.mdp, theta)?;
        let (pi, _) = optimal_policy(&w.mdp, theta, SOLVER_TOL)?;
        write_out(out, AsorPolicy { inner: pi })
    })
}

/// Parses a policy from the JSON written by `train` or [`asor_policy_to_json`].
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_policy_from_json(
    json: *const c_char,
    out: *mut *mut AsorPolicy,
) -> AsorStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let pi: TabularPolicy = serde_json::from_str(text).map_err(Error::from)?;
        pi.validate(&asor_lab::Tolerances::DEFAULT)?;
        write_out(out, AsorPolicy { inner: pi })
    })
}

/// # Safety
/// `policy` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_policy_to_json(
    policy: *const AsorPolicy,
    out_json: *mut *mut c_char,
) -> AsorStatus {
    guard(|| {
        let p = borrow(policy, "policy")?;
        write_string(
            out_json,
            serde_json::to_string(&p.inner).map_err(Error::from)?,
        )
    })
}

/// Probability of `action` in `state`.
///
/// # Safety
/// `policy` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_policy_prob(
    policy: *const AsorPolicy,
    state: usize,
    action: usize,
    out: *mut f64,
) -> AsorStatus {
    guard(|| {
        let p = borrow(policy, "policy")?;
        if state >= p.inner.num_states() || action >= p.inner.num_actions() {
            return Err(Failure(
                AsorStatus::OutOfRange,
                format!("({state}, {action}) is outside the policy table"),
            ));
        }
        write_slice(&[p.inner.row(StateId(state))[action]], out, 1)
    })
}

/// # Safety
/// `policy` must come from an `asor_policy_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn asor_policy_free(policy: *mut AsorPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Discounted value of `policy` from the start state under `theta`.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_policy_start_value(
    world: *const AsorWorld,
    policy: *const AsorPolicy,
    theta: usize,
    out: *mut f64,
) -> AsorStatus {
    guard(|| {
        let w = borrow(world, "world")?;
        let p = borrow(policy, "policy")?;
        theta_ok(&w.mdp, theta)?;
        let v = policy_evaluation(&w.mdp, theta, &p.inner, SOLVER_TOL)?;
        write_slice(&[v.v[w.world.start_state().0]], out, 1)
    })
}

/// Expected undiscounted episode return per hidden parameter, exact.
///
/// # Safety
/// Both handles must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn asor_policy_episode_returns(
    world: *const AsorWorld,
    policy: *const AsorPolicy,
    out: *mut f64,
    len: usize,
) -> AsorStatus {
    guard(|| {
        let w = borrow(world, "world")?;
        let p = borrow(policy, "policy")?;
        let per = exact_per_theta(&w.mdp, &p.inner, DEFAULT_HORIZON, EvalMode::Stochastic)?;
        write_slice(&per, out, len)
    })
}

/// Trains one configuration. `config_json` holds trainer settings as a JSON
/// object; omitted fields take their defaults, and null or `"{}"` means all
/// defaults.
///
/// # Safety
/// `world` must be live; `config_json` must be null or NUL-terminated;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_train(
    world: *const AsorWorld,
    config_json: *const c_char,
    out: *mut *mut AsorTrainResult,
) -> AsorStatus {
    guard(|| {
        let w = borrow(world, "world")?;
        let cfg: TrainerConfig = if config_json.is_null() {
            TrainerConfig::default()
        } else {
            serde_json::from_str(read_str(config_json, "config_json")?).map_err(Error::from)?
        };
        write_out(
            out,
            AsorTrainResult {
                inner: train(&w.mdp, &cfg)?,
            },
        )
    })
}

/// Copy of the trained policy as a separate handle.
///
/// # Safety
/// `result` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_train_result_policy(
    result: *const AsorTrainResult,
    out: *mut *mut AsorPolicy,
) -> AsorStatus {
    guard(|| {
        let r = borrow(result, "result")?;
        write_out(
            out,
            AsorPolicy {
                inner: r.inner.policy.clone(),
            },
        )
    })
}

/// Final mean return across hidden parameters.
///
/// # Safety
/// `result` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_train_result_mean_return(
    result: *const AsorTrainResult,
    out: *mut f64,
) -> AsorStatus {
    guard(|| {
        let r = borrow(result, "result")?;
        write_slice(&[r.inner.report.final_mean_return], out, 1)
    })
}

/// Full training report as JSON.
///
/// # Safety
/// `result` must be live; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asor_train_result_report_json(
    result: *const AsorTrainResult,
    out_json: *mut *mut c_char,
) -> AsorStatus {
    guard(|| {
        let r = borrow(result, "result")?;
        write_string(
            out_json,
            serde_json::to_string(&r.inner.report).map_err(Error::from)?,
        )
    })
}

/// # Safety
/// `result` must come from [`asor_train`] or be null.
#[no_mangle]
pub unsafe extern "C" fn asor_train_result_free(result: *mut AsorTrainResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
