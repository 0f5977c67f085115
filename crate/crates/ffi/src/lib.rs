//! C ABI over the `beds` scheduler.
//!
//! Conventions:
//! - The ledger lives behind an opaque `BedsState*` from `beds_state_new`
//!   (or `beds_state_from_json`), released with `beds_state_free`.
//! - Every fallible call returns a `BedsStatus`. On failure,
//!   `beds_last_error()` describes it; the pointer stays valid until the
//!   next call on the same thread.
//! - Strings are NUL-terminated UTF-8. Strings returned by the library are
//!   released with `beds_string_free`.
//! - A handle may be shared between threads only if the caller serializes
//!   access.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chrono::{Datelike, Utc};

use beds::engine::{self, EngineError, Thresholds};
use beds::ingest;
use beds::model::{CaseRequest, DateWindow, Day, Hours, LedgerSnapshot, ScheduleState};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BedsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoFeasibleDay = 3,
    DayNotFeasible = 4,
    InsufficientHours = 5,
    Internal = 99,
}

/// Calendar date.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BedsDate {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

/// A surgery request. Both windows are inclusive.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BedsRequest {
    pub patient_id: *const c_char,
    pub surgeon_id: *const c_char,
    pub duration_hours: f64,
    pub clinical_start: BedsDate,
    pub clinical_end: BedsDate,
    pub patient_start: BedsDate,
    pub patient_end: BedsDate,
    pub post_op_unit: *const c_char,
}

/// Opaque ledger handle.
pub struct BedsState {
    inner: ScheduleState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(BedsStatus, String);

type Res<T> = Result<T, Failure>;

fn fail<T>(status: BedsStatus, msg: impl Into<String>) -> Res<T> {
    Err(Failure(status, msg.into()))
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let status = match e {
            EngineError::NoFeasibleDay(_) => BedsStatus::NoFeasibleDay,
            EngineError::DayNotFeasible { .. } => BedsStatus::DayNotFeasible,
            EngineError::InsufficientHours(_) => BedsStatus::InsufficientHours,
            EngineError::Validation(_) => BedsStatus::InvalidArgument,
            EngineError::Model(_) => BedsStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, recording any failure or panic for `beds_last_error`.
fn guard(f: impl FnOnce() -> Res<()>) -> BedsStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BedsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BedsStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Res<&'a str> {
    if p.is_null() {
        return fail(BedsStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(BedsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn state_ref<'a>(p: *const BedsState) -> Res<&'a BedsState> {
    p.as_ref().map_or_else(|| fail(BedsStatus::NullPointer, "state is null"), Ok)
}

unsafe fn state_mut<'a>(p: *mut BedsState) -> Res<&'a mut BedsState> {
    p.as_mut().map_or_else(|| fail(BedsStatus::NullPointer, "state is null"), Ok)
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Res<&'a mut T> {
    p.as_mut().map_or_else(|| fail(BedsStatus::NullPointer, format!("{what} is null")), Ok)
}

fn day(d: BedsDate) -> Res<Day> {
    Day::from_ymd(d.year, d.month, d.day).or_else(|e| fail(BedsStatus::InvalidArgument, e.to_string()))
}

fn date(d: Day) -> BedsDate {
    let n = d.date();
    BedsDate {
        year: n.year(),
        month: n.month(),
        day: n.day(),
    }
}

fn hours(h: f64) -> Res<Hours> {
    Hours::from_f64(h).or_else(|e| fail(BedsStatus::InvalidArgument, e.to_string()))
}

fn window(start: BedsDate, end: BedsDate) -> Res<DateWindow> {
    DateWindow::new(day(start)?, day(end)?).or_else(|e| fail(BedsStatus::InvalidArgument, e.to_string()))
}

unsafe fn request(p: *const BedsRequest) -> Res<CaseRequest> {
    let r = p.as_ref().map_or_else(|| fail(BedsStatus::NullPointer, "request is null"), Ok)?;
    Ok(CaseRequest {
        patient_id: text(r.patient_id, "patient_id")?.into(),
        surgeon_id: text(r.surgeon_id, "surgeon_id")?.into(),
        duration_hours: hours(r.duration_hours)?,
        clinical_window: window(r.clinical_start, r.clinical_end)?,
        patient_window: window(r.patient_start, r.patient_end)?,
        post_op_unit: text(r.post_op_unit, "post_op_unit")?.into(),
        extras: Default::default(),
    })
}

/// Message for the last failed call on this thread; empty after success.
#[no_mangle]
pub extern "C" fn beds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn beds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// A new, empty ledger. Never returns null.
#[no_mangle]
pub extern "C" fn beds_state_new() -> *mut BedsState {
    Box::into_raw(Box::new(BedsState {
        inner: ScheduleState::new(),
    }))
}

/// Releases a ledger. Null is ignored.
///
/// # Safety
/// `state` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn beds_state_free(state: *mut BedsState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Ledger from a snapshot JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn beds_state_from_json(json: *const c_char, out_state: *mut *mut BedsState) -> BedsStatus {
    guard(|| {
        let slot = out(out_state, "out_state")?;
        *slot = ptr::null_mut();
        let snap: LedgerSnapshot =
            serde_json::from_str(text(json, "json")?).or_else(|e| fail(BedsStatus::InvalidArgument, e.to_string()))?;
        *slot = Box::into_raw(Box::new(BedsState {
            inner: ScheduleState::from_snapshot(snap),
        }));
        Ok(())
    })
}

/// Snapshot JSON of the ledger. Free the result with `beds_string_free`.
///
/// # Safety
/// `state` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn beds_state_to_json(state: *const BedsState, out_json: *mut *mut c_char) -> BedsStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        *slot = ptr::null_mut();
        let s = state_ref(state)?;
        let json = serde_json::to_string(&s.inner.to_snapshot()).or_else(|e| fail(BedsStatus::Internal, e.to_string()))?;
        *slot = CString::new(json).or_else(|e| fail(BedsStatus::Internal, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn beds_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Sets a surgeon's available hours on a day, replacing any previous value.
///
/// # Safety
/// `state` must be a live handle; `surgeon` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn beds_state_set_hours(
    state: *mut BedsState,
    on: BedsDate,
    surgeon: *const c_char,
    available_hours: f64,
) -> BedsStatus {
    guard(|| {
        let s = state_mut(state)?;
        let (d, surgeon, h) = (day(on)?, text(surgeon, "surgeon")?, hours(available_hours)?);
        s.inner.seed_hours(d, surgeon.into(), h);
        Ok(())
    })
}

/// Records an existing admission to `unit` on a day.
///
/// # Safety
/// `state` must be a live handle; `unit` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn beds_state_add_admission(state: *mut BedsState, on: BedsDate, unit: *const c_char) -> BedsStatus {
    guard(|| {
        let s = state_mut(state)?;
        let (d, unit) = (day(on)?, text(unit, "unit")?);
        s.inner.seed_admission(d, None, &unit.into(), Hours::ZERO);
        Ok(())
    })
}

/// # Safety
/// `state` must be a live handle; `surgeon` a NUL-terminated string;
/// `out_hours` writable.
#[no_mangle]
pub unsafe extern "C" fn beds_state_hours(
    state: *const BedsState,
    on: BedsDate,
    surgeon: *const c_char,
    out_hours: *mut f64,
) -> BedsStatus {
    guard(|| {
        let s = state_ref(state)?;
        let slot = out(out_hours, "out_hours")?;
        *slot = s.inner.hours(day(on)?, &text(surgeon, "surgeon")?.into()).as_f64();
        Ok(())
    })
}

/// # Safety
/// `state` must be a live handle; `unit` a NUL-terminated string;
/// `out_count` writable.
#[no_mangle]
pub unsafe extern "C" fn beds_state_admissions(
    state: *const BedsState,
    on: BedsDate,
    unit: *const c_char,
    out_count: *mut u32,
) -> BedsStatus {
    guard(|| {
        let s = state_ref(state)?;
        let slot = out(out_count, "out_count")?;
        *slot = s.inner.admissions(day(on)?, &text(unit, "unit")?.into());
        Ok(())
    })
}

/// Sequence number of the latest booking, 0 for none.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn beds_state_version(state: *const BedsState) -> u64 {
    state.as_ref().map_or(0, |s| s.inner.last_sequence())
}

/// The feasible day with the fewest admissions to the post-op unit, earliest
/// on ties.
///
/// # Safety
/// `state` must be a live handle; `req` a valid request; `out_day` writable.
#[no_mangle]
pub unsafe extern "C" fn beds_recommend(
    state: *const BedsState,
    req: *const BedsRequest,
    out_day: *mut BedsDate,
) -> BedsStatus {
    guard(|| {
        let s = state_ref(state)?;
        let slot = out(out_day, "out_day")?;
        let r = request(req)?;
        r.validate().or_else(|e| fail(BedsStatus::InvalidArgument, e))?;
        *slot = date(engine::recommend_greedy(&s.inner, &r)?);
        Ok(())
    })
}

/// Up to `capacity` feasible days ranked by the named policy
/// (`fewest-admissions`, `earliest`, `weighted-wait`). `out_len` receives the
/// number written.
///
/// # Safety
/// `state` must be a live handle; `req` a valid request; `policy` a
/// NUL-terminated string; `out_days` must hold `capacity` dates.
#[no_mangle]
pub unsafe extern "C" fn beds_recommend_ranked(
    state: *const BedsState,
    req: *const BedsRequest,
    policy: *const c_char,
    out_days: *mut BedsDate,
    capacity: usize,
    out_len: *mut usize,
) -> BedsStatus {
    guard(|| {
        let s = state_ref(state)?;
        let len = out(out_len, "out_len")?;
        *len = 0;
        if out_days.is_null() {
            return fail(BedsStatus::NullPointer, "out_days is null");
        }
        let name = text(policy, "policy")?;
        let policy = engine::policy_by_name(name)
            .map_or_else(|| fail(BedsStatus::InvalidArgument, format!("unknown policy {name}")), Ok)?;
        let r = request(req)?;
        let rec = engine::recommend_topn(&s.inner, &r, policy.as_ref(), capacity, &Thresholds::default())?;
        let days = std::slice::from_raw_parts_mut(out_days, capacity);
        for (slot, d) in days.iter_mut().zip(&rec.ranked_days) {
            *slot = date(*d);
        }
        *len = rec.ranked_days.len();
        Ok(())
    })
}

/// Books the request on `on` after re-checking the window and the surgeon's
/// hours. `out_sequence` (may be null) receives the booking's sequence number.
///
/// # Safety
/// `state` must be a live handle; `req` a valid request.
#[no_mangle]
pub unsafe extern "C" fn beds_book(
    state: *mut BedsState,
    req: *const BedsRequest,
    on: BedsDate,
    out_sequence: *mut u64,
) -> BedsStatus {
    guard(|| {
        let s = state_mut(state)?;
        let r = request(req)?;
        let booking = engine::book_request(&mut s.inner, &r, day(on)?, Utc::now())?;
        if let Some(seq) = out_sequence.as_mut() {
            *seq = booking.sequence_number;
        }
        Ok(())
    })
}

/// Reschedulable window for a case that arrived on `arrival`, had surgery on
/// `surgery` and was admitted on `admission`, scaled by `alpha`.
///
/// # Safety
/// `out_start` and `out_end` must be writable.
#[no_mangle]
pub unsafe extern "C" fn beds_available_window(
    arrival: BedsDate,
    surgery: BedsDate,
    admission: BedsDate,
    alpha: f64,
    out_start: *mut BedsDate,
    out_end: *mut BedsDate,
) -> BedsStatus {
    guard(|| {
        let (start, end) = (out(out_start, "out_start")?, out(out_end, "out_end")?);
        let w = ingest::available_window(day(arrival)?, day(surgery)?, day(admission)?, alpha)
            .or_else(|e| fail(BedsStatus::InvalidArgument, e.to_string()))?;
        *start = date(w.start());
        *end = date(w.end());
        Ok(())
    })
}

/// Human-readable name of a status code. Static; do not free.
#[no_mangle]
pub extern "C" fn beds_status_name(status: BedsStatus) -> *const c_char {
    let s: &'static str = match status {
        BedsStatus::Ok => "OK\0",
        BedsStatus::NullPointer => "NULL_POINTER\0",
        BedsStatus::InvalidArgument => "INVALID_ARGUMENT\0",
        BedsStatus::NoFeasibleDay => "NO_FEASIBLE_DAY\0",
        BedsStatus::DayNotFeasible => "DAY_NOT_FEASIBLE\0",
        BedsStatus::InsufficientHours => "INSUFFICIENT_HOURS\0",
        BedsStatus::Internal => "INTERNAL\0",
    };
    s.as_ptr().cast()
}
