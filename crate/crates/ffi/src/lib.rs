//! C ABI for the necessity classifier and the study statistics.
//!
//! Every fallible function returns an [`XnecStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and
//! can be read with [`xnec_last_error`]. Panics never cross the boundary;
//! they surface as [`XnecStatus::Panic`].
//!
//! Pixel buffers are row-major and channel-interleaved, `n_frames` frames
//! back to back. Frames are assumed to be sampled at 10 Hz.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use xnec::media::{Geometry, Video};
use xnec::model::{checkpoint, Decision, ModelError, NecessityModel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XnecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Checkpoint = 4,
    Model = 5,
    Stats = 6,
    Panic = 7,
}

/// Opaque handle to a loaded model.
pub struct XnecModel {
    model: NecessityModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(XnecStatus, String);

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match &e {
            ModelError::Io(_) => XnecStatus::Io,
            ModelError::Checkpoint(_) => XnecStatus::Checkpoint,
            ModelError::Threshold(_) => XnecStatus::InvalidArgument,
            _ => XnecStatus::Model,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(XnecStatus::InvalidArgument, msg.into())
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> XnecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            XnecStatus::Ok
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
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            XnecStatus::Panic
        }
    }
}

fn nonnull<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(XnecStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `n` readable values.
unsafe fn slice<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    nonnull(p, name)?;
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    nonnull(out as *const T, name)?;
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn xnec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn xnec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Loads a model archive. On success `*out` owns a handle that must be
/// released with [`xnec_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn xnec_model_load(path: *const c_char, out: *mut *mut XnecModel) -> XnecStatus {
    guard(|| {
        nonnull(path, "path")?;
        nonnull(out as *const *mut XnecModel, "out")?;
        let path = CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not UTF-8"))?;
        let model = checkpoint::load(PathBuf::from(path))?;
        out.write(Box::into_raw(Box::new(XnecModel { model })));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`xnec_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn xnec_model_free(model: *mut XnecModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Frames per scored window.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn xnec_model_window_len(model: *const XnecModel, out: *mut usize) -> XnecStatus {
    guard(|| {
        nonnull(model, "model")?;
        write(out, (*model).model.config.window_len, "out")
    })
}

/// Decision threshold stored with the model.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn xnec_model_threshold(model: *const XnecModel, out: *mut f64) -> XnecStatus {
    guard(|| {
        nonnull(model, "model")?;
        write(out, (*model).model.config.threshold, "out")
    })
}

/// Necessity score of the window ending at frame `end_frame` of a clip.
/// `gaze` may be null; otherwise it holds `n_frames` single-channel maps of
/// the same size. `speed` holds one sample per frame.
///
/// # Safety
/// Buffers must hold the sizes implied by the arguments; `model` must be a
/// live handle and `out_score` writable.
#[no_mangle]
pub unsafe extern "C" fn xnec_model_score(
    model: *const XnecModel,
    frames: *const u8,
    gaze: *const u8,
    n_frames: usize,
    width: u16,
    height: u16,
    channels: u8,
    speed: *const f64,
    end_frame: usize,
    out_score: *mut f64,
) -> XnecStatus {
    guard(|| {
        nonnull(model, "model")?;
        let model = &(*model).model;
        let geometry = Geometry { width, height, channels };
        let frame_bytes = geometry.frame_bytes();
        if frame_bytes == 0 || !matches!(channels, 1 | 3) {
            return Err(invalid(format!("bad geometry {width}x{height}x{channels}")));
        }
        let total = n_frames.checked_mul(frame_bytes).ok_or_else(|| invalid("frame buffer size overflows"))?;
        let pixels = slice(frames, total, "frames")?;
        let speed = slice(speed, n_frames, "speed")?;
        let to_video = |buf: &[u8], geometry: Geometry| -> Result<Video, Failure> {
            let mut v = Video::new(geometry);
            for (i, chunk) in buf.chunks_exact(geometry.frame_bytes()).enumerate() {
                v.push(i as f64 / 10.0, chunk.to_vec()).map_err(|e| invalid(e.to_string()))?;
            }
            Ok(v)
        };
        let video = to_video(pixels, geometry)?;
        let gaze = if gaze.is_null() {
            None
        } else {
            let g = Geometry { channels: 1, ..geometry };
            Some(to_video(slice(gaze, n_frames * g.frame_bytes(), "gaze")?, g)?)
        };
        let clip = model.prepare_clip("ffi", &video, gaze.as_ref(), speed)?;
        write(out_score, model.score(&clip, end_frame)?, "out_score")
    })
}

/// Writes 1 to `out_explain` when `score >= threshold`, else 0.
///
/// # Safety
/// `out_explain` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xnec_decide(score: f64, threshold: f64, out_explain: *mut c_int) -> XnecStatus {
    guard(|| {
        let d = xnec::model::decide(score, threshold)?;
        write(out_explain, c_int::from(d.decision == Decision::Explain), "out_explain")
    })
}

fn stats_err(e: impl std::fmt::Display) -> Failure {
    Failure(XnecStatus::Stats, e.to_string())
}

/// Pearson correlation of two length-`n` series.
///
/// # Safety
/// `x` and `y` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xnec_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> XnecStatus {
    guard(|| {
        let r = xnec::studystats::pearson(slice(x, n, "x")?, slice(y, n, "y")?).map_err(stats_err)?;
        write(out, r, "out")
    })
}

/// Point-biserial correlation; `b` holds 0 or 1 per observation.
///
/// # Safety
/// `b` and `y` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xnec_point_biserial(b: *const u8, y: *const f64, n: usize, out: *mut f64) -> XnecStatus {
    guard(|| {
        let b = slice(b, n, "b")?;
        if b.iter().any(|&v| v > 1) {
            return Err(invalid("b must contain only 0 and 1"));
        }
        let flags: Vec<bool> = b.iter().map(|&v| v == 1).collect();
        let r = xnec::studystats::point_biserial(&flags, slice(y, n, "y")?).map_err(stats_err)?;
        write(out, r, "out")
    })
}

/// Area under the ROC curve; `labels` holds 0 or 1 per score.
///
/// # Safety
/// `scores` and `labels` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xnec_roc_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> XnecStatus {
    guard(|| {
        let labels = slice(labels, n, "labels")?;
        if labels.iter().any(|&v| v > 1) {
            return Err(invalid("labels must contain only 0 and 1"));
        }
        let auc = xnec::trainer::roc_auc(slice(scores, n, "scores")?, labels).map_err(stats_err)?;
        write(out, auc, "out")
    })
}

/// Mean after dropping one minimum and one maximum.
///
/// # Safety
/// `scores` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xnec_truncated_mean(scores: *const f64, n: usize, out: *mut f64) -> XnecStatus {
    guard(|| {
        let m = xnec::aggregate::truncated_mean(slice(scores, n, "scores")?).map_err(stats_err)?;
        write(out, m, "out")
    })
}
