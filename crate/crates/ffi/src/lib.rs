//! C ABI for the hiertrack engine.
//!
//! Objects cross the boundary as opaque handles created by `ht_*_load` / `ht_track`
//! and released with the matching `ht_*_free`. Every fallible call returns an
//! [`HtStatus`]; on failure a message is available from [`ht_last_error_message`]
//! on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use hiertrack::eval::evaluate;
use hiertrack::features::jersey_vector;
use hiertrack::hierarchy::run_hierarchy;
use hiertrack::ingest::{read_trackset, write_trackset, SequenceBundle, SequencePaths};
use hiertrack::model::{max_temporal_span, CharConfidences, TrackSet, CHAR_LEN, JERSEY_LEN};
use hiertrack::scorer::{load_weights, ScorerWeights};
use hiertrack::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HtStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Internal = 6,
}

/// Loaded detections, features, homographies and configuration.
pub struct HtSequence(SequenceBundle);

/// Trained scorer weights.
pub struct HtWeights(ScorerWeights);

/// A set of tracks, either produced by tracking or read from a MOT file.
pub struct HtTrackSet(TrackSet);

/// Summary metrics, as percentages in [0, 100].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HtMetrics {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut msg = msg.into().into_bytes();
    msg.retain(|&b| b != 0);
    let c = CString::new(msg).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HtStatus {
    match e {
        Error::Io { .. } => HtStatus::Io,
        Error::Parse { .. } | Error::Format { .. } => HtStatus::Parse,
        Error::Invariant(_) => HtStatus::Internal,
        _ => HtStatus::Validation,
    }
}

struct Fail(HtStatus);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        set_error(e.to_string());
        Fail(status_of(&e))
    }
}

fn null(what: &str) -> Fail {
    set_error(format!("{what} is null"));
    Fail(HtStatus::NullArgument)
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HtStatus::Ok,
        Ok(Err(Fail(s))) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            HtStatus::Internal
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    opt_path_arg(p, what)?.ok_or_else(|| null(what))
}

unsafe fn opt_path_arg(p: *const c_char, what: &str) -> Result<Option<PathBuf>, Fail> {
    if p.is_null() {
        return Ok(None);
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(Some(PathBuf::from(s))),
        Err(_) => {
            set_error(format!("{what} is not valid UTF-8"));
            Err(Fail(HtStatus::InvalidUtf8))
        }
    }
}

unsafe fn out_arg<'a, T>(out: *mut *mut T, what: &str) -> Result<&'a mut *mut T, Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = ptr::null_mut();
    Ok(&mut *out)
}

unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, Fail> {
    h.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null if none failed yet.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ht_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frames covered by one window of a hierarchy with `levels` levels.
#[no_mangle]
pub extern "C" fn ht_max_temporal_span(levels: u32) -> u32 {
    max_temporal_span(levels)
}

/// Loads a sequence. `detections` and `features` are required; the other paths may
/// be null. Without a config file the default configuration is used.
///
/// # Safety
/// Non-null path arguments must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_sequence_load(
    detections: *const c_char,
    features: *const c_char,
    homographies: *const c_char,
    gt: *const c_char,
    config: *const c_char,
    seqinfo: *const c_char,
    out: *mut *mut HtSequence,
) -> HtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let paths = SequencePaths {
            detections: path_arg(detections, "detections")?,
            features: path_arg(features, "features")?,
            homographies: opt_path_arg(homographies, "homographies")?,
            gt: opt_path_arg(gt, "gt")?,
            config: opt_path_arg(config, "config")?,
            seqinfo: opt_path_arg(seqinfo, "seqinfo")?,
        };
        let seq = SequenceBundle::load(&paths)?;
        *out = Box::into_raw(Box::new(HtSequence(seq)));
        Ok(())
    })
}

/// Number of detections in a loaded sequence; 0 for a null handle.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ht_sequence_num_detections(seq: *const HtSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.detections.len())
}

/// # Safety
/// `seq` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ht_sequence_free(seq: *mut HtSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_weights_load(path: *const c_char, out: *mut *mut HtWeights) -> HtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let w = load_weights(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(HtWeights(w)));
        Ok(())
    })
}

/// # Safety
/// `weights` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ht_weights_free(weights: *mut HtWeights) {
    if !weights.is_null() {
        drop(Box::from_raw(weights));
    }
}

/// Tracks a sequence with the given weights.
///
/// # Safety
/// `seq` and `weights` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_track(
    seq: *const HtSequence,
    weights: *const HtWeights,
    out: *mut *mut HtTrackSet,
) -> HtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let seq = handle(seq, "seq")?;
        let w = handle(weights, "weights")?;
        let tracks = run_hierarchy(&seq.0, &w.0)?;
        *out = Box::into_raw(Box::new(HtTrackSet(tracks)));
        Ok(())
    })
}

/// Reads tracks from a MOT-format file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_trackset_read_mot(path: *const c_char, out: *mut *mut HtTrackSet) -> HtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = read_trackset(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(HtTrackSet(t)));
        Ok(())
    })
}

/// # Safety
/// `tracks` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ht_trackset_write_mot(tracks: *const HtTrackSet, path: *const c_char) -> HtStatus {
    guard(|| {
        let t = handle(tracks, "tracks")?;
        write_trackset(&path_arg(path, "path")?, &t.0)?;
        Ok(())
    })
}

/// Number of tracks; 0 for a null handle.
///
/// # Safety
/// `tracks` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ht_trackset_num_tracks(tracks: *const HtTrackSet) -> usize {
    tracks.as_ref().map_or(0, |t| t.0.tracks.len())
}

/// Number of track points over all tracks; 0 for a null handle.
///
/// # Safety
/// `tracks` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ht_trackset_len(tracks: *const HtTrackSet) -> usize {
    tracks.as_ref().map_or(0, |t| t.0.num_points())
}

/// # Safety
/// `tracks` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ht_trackset_free(tracks: *mut HtTrackSet) {
    if !tracks.is_null() {
        drop(Box::from_raw(tracks));
    }
}

/// Scores `pred` against `gt`.
///
/// # Safety
/// `pred` and `gt` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_evaluate(
    pred: *const HtTrackSet,
    gt: *const HtTrackSet,
    out: *mut HtMetrics,
) -> HtStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = handle(pred, "pred")?;
        let g = handle(gt, "gt")?;
        let m = evaluate(&p.0, &g.0)?;
        *out = HtMetrics {
            hota: m.hota,
            deta: m.deta,
            assa: m.assa,
        };
        Ok(())
    })
}

/// Jersey number vector from two character-confidence arrays of 11 entries each
/// (EOL first, then digits 0-9). Writes 100 values to `out` and the legibility flag.
///
/// # Safety
/// `c1` and `c2` must point to 11 floats, `out` to room for 100, `legible` to a bool.
#[no_mangle]
pub unsafe extern "C" fn ht_jersey_vector(
    c1: *const f32,
    c2: *const f32,
    out: *mut f32,
    legible: *mut bool,
) -> HtStatus {
    guard(|| {
        if c1.is_null() || c2.is_null() || out.is_null() || legible.is_null() {
            return Err(null("jersey argument"));
        }
        let mut cc = CharConfidences {
            c1: [0.0; CHAR_LEN],
            c2: [0.0; CHAR_LEN],
        };
        cc.c1.copy_from_slice(std::slice::from_raw_parts(c1, CHAR_LEN));
        cc.c2.copy_from_slice(std::slice::from_raw_parts(c2, CHAR_LEN));
        cc.validate()?;
        let (v, l) = jersey_vector(&cc);
        std::slice::from_raw_parts_mut(out, JERSEY_LEN).copy_from_slice(&v);
        *legible = l;
        Ok(())
    })
}
