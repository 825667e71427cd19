//! C ABI for the `ctcm` library.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns a [`CtcmStatus`];
//! on failure [`ctcm_last_error_message`] describes the most recent error on
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ctcm::{make_rng, simulate_markov, Error, ModelParams, PerturbationDistribution, State, Trajectory};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtcmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    BufferTooSmall = 4,
    Internal = 5,
}

/// Model parameters with a uniform-box perturbation law.
pub struct CtcmParams(ModelParams);

/// A recorded jump path.
pub struct CtcmTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> CtcmStatus {
    match err {
        Error::IndexOutOfRange { .. } | Error::TimeOutOfRange { .. } => CtcmStatus::OutOfRange,
        Error::DimensionMismatch { .. }
        | Error::LengthMismatch { .. }
        | Error::InvalidParameter(_)
        | Error::InvalidState(_)
        | Error::NotAttached(_)
        | Error::NotDetached(_) => CtcmStatus::InvalidArgument,
        _ => CtcmStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (CtcmStatus, String)>) -> CtcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtcmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CtcmStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (CtcmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (CtcmStatus, String) {
    (CtcmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (CtcmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_slice(out: *mut f64, len: usize, values: &[f64]) -> Result<(), (CtcmStatus, String)> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < values.len() {
        return Err((CtcmStatus::BufferTooSmall, format!("buffer holds {len}, need {}", values.len())));
    }
    slice::from_raw_parts_mut(out, values.len()).copy_from_slice(values);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ctcm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Creates parameters for `n` sites in `dim` dimensions with perturbations
/// uniform on the box `center ± half_width`.
///
/// # Safety
/// `center` and `half_width` must point to `dim` readable doubles and `out`
/// to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ctcm_params_new(
    theta_a: f64,
    theta_d: f64,
    n: usize,
    dim: usize,
    center: *const f64,
    half_width: *const f64,
    out: *mut *mut CtcmParams,
) -> CtcmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let center = read_slice(center, dim, "center")?.to_vec();
        let half_width = read_slice(half_width, dim, "half_width")?.to_vec();
        let eta = PerturbationDistribution::uniform_box(center, half_width).map_err(lib_err)?;
        let params = ModelParams::new(theta_a, theta_d, n, eta).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CtcmParams(params)));
        Ok(())
    })
}

/// # Safety
/// `params` must be NULL or a handle from [`ctcm_params_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctcm_params_free(params: *mut CtcmParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

unsafe fn params_ref<'a>(p: *const CtcmParams) -> Result<&'a ModelParams, (CtcmStatus, String)> {
    p.as_ref().map(|p| &p.0).ok_or_else(|| null("params"))
}

/// Writes the `n + 1` steady-state probabilities of the attached count.
///
/// # Safety
/// `params` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctcm_steady_state(params: *const CtcmParams, out: *mut f64, len: usize) -> CtcmStatus {
    guard(|| {
        let p = params_ref(params)?;
        let sigma = ctcm::steady_state(p.n(), p.theta_a(), p.theta_d()).map_err(lib_err)?;
        write_slice(out, len, sigma.probs())
    })
}

/// Writes the `dim` coordinates of the closed-form mean centroid velocity.
///
/// # Safety
/// `params` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctcm_expected_velocity(params: *const CtcmParams, out: *mut f64, len: usize) -> CtcmStatus {
    guard(|| write_slice(out, len, &ctcm::expected_velocity(params_ref(params)?)))
}

/// Same quantity as [`ctcm_expected_velocity`], summed level by level.
///
/// # Safety
/// `params` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctcm_drift_oracle(params: *const CtcmParams, out: *mut f64, len: usize) -> CtcmStatus {
    guard(|| write_slice(out, len, &ctcm::drift_oracle(params_ref(params)?)))
}

/// Simulates the Markov engine to `horizon` seconds from all sites and the
/// centroid at the origin with the first `attached` sites attached.
///
/// # Safety
/// `params` must be a live handle and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ctcm_simulate_markov(
    params: *const CtcmParams,
    attached: usize,
    horizon: f64,
    seed: u64,
    out: *mut *mut CtcmTrajectory,
) -> CtcmStatus {
    guard(|| {
        let p = params_ref(params)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let initial = State::with_attached(p.n(), attached, &vec![0.0; p.dim()]).map_err(lib_err)?;
        let traj = simulate_markov(p, initial, horizon, make_rng(seed)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CtcmTrajectory(traj)));
        Ok(())
    })
}

/// # Safety
/// `traj` must be NULL or a handle from [`ctcm_simulate_markov`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctcm_trajectory_free(traj: *mut CtcmTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

unsafe fn traj_ref<'a>(t: *const CtcmTrajectory) -> Result<&'a Trajectory, (CtcmStatus, String)> {
    t.as_ref().map(|t| &t.0).ok_or_else(|| null("trajectory"))
}

/// Number of recorded states (jumps + 1); 0 for a NULL handle.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctcm_trajectory_len(traj: *const CtcmTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.len())
}

fn index_check(traj: &Trajectory, k: usize) -> Result<(), (CtcmStatus, String)> {
    if k >= traj.len() {
        return Err(lib_err(Error::IndexOutOfRange { index: k, n: traj.len() }));
    }
    Ok(())
}

/// Time of the jump into state `k` (0 for the initial state).
///
/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctcm_trajectory_time(traj: *const CtcmTrajectory, k: usize, out: *mut f64) -> CtcmStatus {
    guard(|| {
        let t = traj_ref(traj)?;
        index_check(t, k)?;
        write_slice(out, 1, &[t.jump_times()[k]])
    })
}

/// Attached count of state `k`.
///
/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctcm_trajectory_count(traj: *const CtcmTrajectory, k: usize, out: *mut usize) -> CtcmStatus {
    guard(|| {
        let t = traj_ref(traj)?;
        index_check(t, k)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = t.states()[k].attached_count();
        Ok(())
    })
}

/// Centroid at time `time` (right-continuous), `dim` coordinates.
///
/// # Safety
/// `traj` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctcm_trajectory_centroid_at(
    traj: *const CtcmTrajectory,
    time: f64,
    out: *mut f64,
    len: usize,
) -> CtcmStatus {
    guard(|| {
        let t = traj_ref(traj)?;
        let state = t.state_at(time).map_err(lib_err)?;
        write_slice(out, len, state.centroid())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    #[test]
    fn error_message_round_trip() {
        set_error("bad\0thing".into());
        let msg = unsafe { CStr::from_ptr(ctcm_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "bad thing");
    }

    #[test]
    fn panics_become_internal() {
        assert_eq!(guard(|| panic!("boom")), CtcmStatus::Internal);
    }
}
