//! Shared scheduling vocabulary: calendar days, windows, exact hours,
//! identifiers, case requests and the booking ledger.

mod day;
mod hours;
mod ids;
mod state;
mod window;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use day::Day;
pub use hours::Hours;
pub use ids::{PatientId, SurgeonId, UnitId};
pub use state::{
    read_journal, write_journal, write_journal_line, AdmissionEntry, Booking, HoursEntry,
    LedgerSnapshot, ScheduleState,
};
pub use window::{window_intersect, DateWindow};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid date: {0}")]
    InvalidDate(String),
    #[error("invalid hours value: {0}")]
    InvalidHours(String),
    #[error("window start {start} is after end {end}")]
    InvalidWindow { start: Day, end: Day },
    #[error("surgeon {surgeon} has {available} h on {day}, {requested} h requested")]
    InsufficientHours {
        day: Day,
        surgeon: SurgeonId,
        available: Hours,
        requested: Hours,
    },
    #[error("booking sequence {got} does not follow {last}")]
    SequenceNotIncreasing { last: u64, got: u64 },
    #[error("journal line {line}: {message}")]
    JournalLine { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One patient's request for a surgery day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRequest {
    pub patient_id: PatientId,
    pub surgeon_id: SurgeonId,
    pub duration_hours: Hours,
    /// Clinically acceptable days for the procedure.
    pub clinical_window: DateWindow,
    /// Days the patient can attend.
    pub patient_window: DateWindow,
    pub post_op_unit: UnitId,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, String>,
}

impl CaseRequest {
    /// A request where the same inferred window serves as both windows.
    pub fn with_window(
        patient_id: PatientId,
        surgeon_id: SurgeonId,
        duration_hours: Hours,
        window: DateWindow,
        post_op_unit: UnitId,
    ) -> Self {
        CaseRequest {
            patient_id,
            surgeon_id,
            duration_hours,
            clinical_window: window,
            patient_window: window,
            post_op_unit,
            extras: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.duration_hours.is_zero() {
            return Err("duration_hours must be positive".into());
        }
        if self.surgeon_id.as_str().is_empty() {
            return Err("surgeon_id must not be empty".into());
        }
        if self.post_op_unit.as_str().is_empty() {
            return Err("post_op_unit must not be empty".into());
        }
        Ok(())
    }

    /// Days allowed by both windows.
    pub fn search_window(&self) -> Option<DateWindow> {
        self.clinical_window.intersect(&self.patient_window)
    }
}
