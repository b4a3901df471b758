//! C ABI over `perimit-core`.
//!
//! Every function returns a [`PerimitStatus`]. On failure the message is kept
//! per thread and can be fetched with [`perimit_last_error_message`]. Arrays
//! of points are flat `x, y, z` triples; keypoint videos are flat
//! `frame-major, keypoint, (x, y)` arrays. Handles are opaque and must be
//! released with their `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use perimit::gp::{ucb, AcquisitionConfig, GpModel};
use perimit::keypoints::{KeypointVideo, Vec2};
use perimit::metrics::{estimate_periods, keypoint_distance, performance, DistanceConfig};
use perimit::rdmp::{fit_from_demo, from_waypoints, rollout, RdmpParams, RdmpState};
use perimit::{Error, Trajectory, Vec3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerimitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    NumericalFailure = 4,
    NoPeriodicity = 5,
    Panic = 6,
}

/// Rhythmic movement primitive.
pub struct PerimitRdmp(RdmpParams);

/// Fitted Gaussian-process surrogate.
pub struct PerimitGp(GpModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> PerimitStatus {
    match err {
        Error::NotPositiveDefinite { .. } => PerimitStatus::NumericalFailure,
        Error::NoPeriodicity { .. } | Error::PeriodTooLong { .. } => PerimitStatus::NoPeriodicity,
        _ => PerimitStatus::InvalidArgument,
    }
}

enum Failure {
    Status(PerimitStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(PerimitStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PerimitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PerimitStatus::Ok
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            PerimitStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn points(flat: &[f64]) -> Vec<Vec3> {
    flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

fn video(flat: &[f64], n_frames: usize, n_keypoints: usize, dt: f64) -> Result<KeypointVideo, Failure> {
    if n_keypoints == 0 {
        return Err(Failure::Status(
            PerimitStatus::InvalidArgument,
            "n_keypoints must be >= 1".into(),
        ));
    }
    let frames = flat
        .chunks_exact(2 * n_keypoints)
        .take(n_frames)
        .map(|f| f.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect())
        .collect();
    Ok(KeypointVideo::new(dt, frames)?)
}

fn checked_len(a: usize, b: usize) -> Result<usize, Failure> {
    a.checked_mul(b)
        .ok_or_else(|| Failure::Status(PerimitStatus::InvalidArgument, "array length overflows".into()))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `capacity`). Returns the full message length without the
/// terminator, or 0 if there is none.
///
/// # Safety
/// `buf` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn perimit_last_error_message(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && capacity > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Fits a primitive to `n_points` positions sampled every `dt` seconds.
///
/// # Safety
/// `xyz` must hold `3 * n_points` doubles; `out_handle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn perimit_rdmp_fit(
    xyz: *const f64,
    n_points: usize,
    dt: f64,
    n_basis: usize,
    period: f64,
    out_handle: *mut *mut PerimitRdmp,
) -> PerimitStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        let flat = input(xyz, checked_len(n_points, 3)?, "xyz")?;
        let demo = Trajectory::new(dt, points(flat))?;
        let params = fit_from_demo(&demo, n_basis, period)?;
        *slot = Box::into_raw(Box::new(PerimitRdmp(params)));
        Ok(())
    })
}

/// Builds a primitive whose period passes through `n_waypoints` waypoints.
///
/// # Safety
/// `xyz` must hold `3 * n_waypoints` doubles; `out_handle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn perimit_rdmp_from_waypoints(
    xyz: *const f64,
    n_waypoints: usize,
    period: f64,
    n_basis: usize,
    out_handle: *mut *mut PerimitRdmp,
) -> PerimitStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        let flat = input(xyz, checked_len(n_waypoints, 3)?, "xyz")?;
        let params = from_waypoints(&points(flat), period, n_basis)?;
        *slot = Box::into_raw(Box::new(PerimitRdmp(params)));
        Ok(())
    })
}

/// # Safety
/// `handle` must be a live primitive; `out_period` must be writable.
#[no_mangle]
pub unsafe extern "C" fn perimit_rdmp_period(handle: *const PerimitRdmp, out_period: *mut f64) -> PerimitStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        *out(out_period, "out_period")? = h.0.period();
        Ok(())
    })
}

/// Integrates `n_periods` periods from the primitive's own start state at
/// step `dt`. Writes `*out_len` points to `out_xyz` when `capacity` (in
/// points) suffices; otherwise returns `BufferTooSmall` with the required
/// length in `*out_len`.
///
/// # Safety
/// `handle` must be a live primitive, `out_xyz` valid for `3 * capacity`
/// doubles (or null when `capacity` is 0), `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn perimit_rdmp_rollout(
    handle: *const PerimitRdmp,
    n_periods: usize,
    dt: f64,
    out_xyz: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> PerimitStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let len_slot = out(out_len, "out_len")?;
        let traj = rollout(&h.0, n_periods, dt, &RdmpState::initial(&h.0))?;
        *len_slot = traj.len();
        if traj.len() > capacity {
            return Err(Failure::Status(
                PerimitStatus::BufferTooSmall,
                format!("rollout has {} points, buffer holds {capacity}", traj.len()),
            ));
        }
        if out_xyz.is_null() {
            return Err(null("out_xyz"));
        }
        let dst = slice::from_raw_parts_mut(out_xyz, 3 * traj.len());
        for (d, p) in dst.chunks_exact_mut(3).zip(traj.points()) {
            d.copy_from_slice(&[p.x, p.y, p.z]);
        }
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a primitive not yet freed.
#[no_mangle]
pub unsafe extern "C" fn perimit_rdmp_free(handle: *mut PerimitRdmp) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Fits a GP to `n` inputs of dimension `dim` (row-major) and targets `y`,
/// maximizing the marginal likelihood when `optimize` is nonzero.
///
/// # Safety
/// `x` must hold `n * dim` doubles, `y` `n` doubles; `out_handle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn perimit_gp_fit(
    x: *const f64,
    n: usize,
    dim: usize,
    y: *const f64,
    optimize: i32,
    out_handle: *mut *mut PerimitGp,
) -> PerimitStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        if dim == 0 {
            return Err(Failure::Status(
                PerimitStatus::InvalidArgument,
                "dim must be >= 1".into(),
            ));
        }
        let xs = input(x, checked_len(n, dim)?, "x")?;
        let ys = input(y, n, "y")?;
        let inputs: Vec<Vec<f64>> = xs.chunks_exact(dim).map(<[f64]>::to_vec).collect();
        let model = GpModel::fit(&inputs, ys, optimize != 0)?;
        *slot = Box::into_raw(Box::new(PerimitGp(model)));
        Ok(())
    })
}

/// Posterior mean and standard deviation at `w`.
///
/// # Safety
/// `handle` must be a live model, `w` hold `dim` doubles, output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn perimit_gp_posterior(
    handle: *const PerimitGp,
    w: *const f64,
    dim: usize,
    out_mean: *mut f64,
    out_std: *mut f64,
) -> PerimitStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let (m, s) = h.0.posterior(input(w, dim, "w")?)?;
        *out(out_mean, "out_mean")? = m;
        *out(out_std, "out_std")? = s;
        Ok(())
    })
}

/// `mean + beta * std` at `w`.
///
/// # Safety
/// As [`perimit_gp_posterior`].
#[no_mangle]
pub unsafe extern "C" fn perimit_gp_ucb(
    handle: *const PerimitGp,
    w: *const f64,
    dim: usize,
    beta: f64,
    out_value: *mut f64,
) -> PerimitStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let acq = AcquisitionConfig::new(beta)?;
        *out(out_value, "out_value")? = ucb(&h.0, input(w, dim, "w")?, &acq)?;
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a model not yet freed.
#[no_mangle]
pub unsafe extern "C" fn perimit_gp_free(handle: *mut PerimitGp) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Mean L1 keypoint distance between two videos, each sub-sampled to
/// `n_subsampled` frames.
///
/// # Safety
/// `a` must hold `2 * n_keypoints * frames_a` doubles, `b` likewise for
/// `frames_b`; the output pointer writable.
#[no_mangle]
pub unsafe extern "C" fn perimit_keypoint_distance(
    a: *const f64,
    frames_a: usize,
    b: *const f64,
    frames_b: usize,
    n_keypoints: usize,
    n_subsampled: usize,
    out_distance: *mut f64,
) -> PerimitStatus {
    guard(|| {
        let slot = out(out_distance, "out_distance")?;
        let per_frame = checked_len(n_keypoints, 2)?;
        let va = video(
            input(a, checked_len(frames_a, per_frame)?, "a")?,
            frames_a,
            n_keypoints,
            1.0,
        )?;
        let vb = video(
            input(b, checked_len(frames_b, per_frame)?, "b")?,
            frames_b,
            n_keypoints,
            1.0,
        )?;
        *slot = keypoint_distance(&va, &vb, &DistanceConfig::new(n_subsampled, n_keypoints)?)?;
        Ok(())
    })
}

/// Number of repetitions and period length (frames) of a keypoint video.
///
/// # Safety
/// `keypoints` must hold `2 * n_keypoints * n_frames` doubles; outputs
/// writable.
#[no_mangle]
pub unsafe extern "C" fn perimit_estimate_periods(
    keypoints: *const f64,
    n_frames: usize,
    n_keypoints: usize,
    out_n_rep: *mut usize,
    out_period_frames: *mut f64,
    out_confidence: *mut f64,
) -> PerimitStatus {
    guard(|| {
        let per_frame = checked_len(n_keypoints, 2)?;
        let v = video(
            input(keypoints, checked_len(n_frames, per_frame)?, "keypoints")?,
            n_frames,
            n_keypoints,
            1.0,
        )?;
        let est = estimate_periods(&v)?;
        *out(out_n_rep, "out_n_rep")? = est.n_rep;
        *out(out_period_frames, "out_period_frames")? = est.period_frames;
        *out(out_confidence, "out_confidence")? = est.confidence;
        Ok(())
    })
}

/// Score in [0, 1] of an executed trajectory against the exemplar, with
/// `max_error` the mean L1 error that maps to 0.
///
/// # Safety
/// `exemplar` must hold `3 * n_exemplar` doubles, `execution`
/// `3 * n_execution`; the output pointer writable.
#[no_mangle]
pub unsafe extern "C" fn perimit_performance(
    exemplar: *const f64,
    n_exemplar: usize,
    execution: *const f64,
    n_execution: usize,
    max_error: f64,
    out_score: *mut f64,
) -> PerimitStatus {
    guard(|| {
        let slot = out(out_score, "out_score")?;
        if max_error.is_nan() || max_error <= 0.0 {
            return Err(Failure::Status(
                PerimitStatus::InvalidArgument,
                "max_error must be positive".into(),
            ));
        }
        let e = Trajectory::new(1.0, points(input(exemplar, checked_len(n_exemplar, 3)?, "exemplar")?))?;
        let r = Trajectory::new(
            1.0,
            points(input(execution, checked_len(n_execution, 3)?, "execution")?),
        )?;
        *slot = performance(&e, &r, max_error);
        Ok(())
    })
}
