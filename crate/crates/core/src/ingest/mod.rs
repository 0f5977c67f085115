//! Input tables and preprocessing.
//!
//! Reads the midnight census, procedure record and (optional) surgeon
//! availability CSVs, applies the cleaning rules, and rebuilds one
//! [`PatientProfile`] per visit.

mod profile;
mod tables;

use std::collections::BTreeSet;
use std::fmt;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DateWindow, Day, UnitId};

pub use profile::{
    build_profiles, classify_elective, infer_surgeon_availability, initial_state, read_profiles, write_profiles,
    CleaningReport, PatientClass, PatientProfile,
};
pub use tables::{
    parse_availability, parse_census, parse_procedures, parse_tables, write_availability, write_census,
    write_procedures, CensusRow, ProcedureRow, Reject, SurgeonAvailabilityRow, Tables, AVAILABILITY_HEADER,
    CENSUS_HEADER, PROCEDURE_HEADER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    Census,
    Procedure,
    Availability,
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Table::Census => "census",
            Table::Procedure => "procedure",
            Table::Availability => "availability",
        })
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{table} table is missing column \"{column}\"")]
    MalformedHeader { table: Table, column: String },
    #[error("{table} table line {line}: cannot parse {column} value \"{value}\"")]
    UnparseableTimestamp {
        table: Table,
        line: u64,
        column: String,
        value: String,
    },
    #[error("profile line {line}: {message}")]
    ProfileLine { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum WindowError {
    #[error("admission day {admission} precedes arrival day {arrival}")]
    NegativeLead { arrival: Day, admission: Day },
    #[error("surgery day {surgery} precedes arrival day {arrival}")]
    SurgeryBeforeArrival { arrival: Day, surgery: Day },
    #[error("no schedulable day after arrival {arrival}")]
    Empty { arrival: Day },
}

const DATETIME_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

fn parse_full_year(s: &str) -> Option<NaiveDateTime> {
    DATETIME_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}

/// Accepts ISO-8601 (`2019-03-11T12:51:00`, `2019-03-11 12:51`) and the short
/// `YY-M-D H:MM:SS` form, where a two-digit year means 20YY.
pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let s = raw.trim();
    let (year, rest) = s.split_once('-')?;
    if year.is_empty() || !year.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if year.len() <= 2 {
        parse_full_year(&format!("20{year:0>2}-{rest}"))
    } else {
        parse_full_year(s)
    }
}

/// Preprocessing options.
#[derive(Debug, Clone)]
pub struct IngestConfig {
    /// First simulated day; the warm-up starts `warmup_days` earlier.
    pub sim_start: Option<Day>,
    /// Explicit warm-up start, overriding `sim_start - warmup_days`.
    pub warmup_start: Option<Day>,
    pub warmup_days: i64,
    pub scope_units: BTreeSet<UnitId>,
    pub alpha: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            sim_start: None,
            warmup_start: None,
            warmup_days: 365,
            scope_units: default_scope_units(),
            alpha: 1.0,
        }
    }
}

impl IngestConfig {
    pub fn effective_warmup_start(&self) -> Option<Day> {
        self.warmup_start.or_else(|| self.sim_start.map(|d| d - self.warmup_days))
    }
}

pub fn default_scope_units() -> BTreeSet<UnitId> {
    ["PICUs", "PCUs", "MAIN OR"].into_iter().map(UnitId::from).collect()
}

/// The days a patient could have had surgery:
/// `[max(arrival + 1, surgery - a), surgery + a]` with `a = floor(alpha * lead)`
/// and `lead = admission - arrival` in whole days.
pub fn available_window(arrival: Day, surgery: Day, admission: Day, alpha: f64) -> Result<DateWindow, WindowError> {
    if admission < arrival {
        return Err(WindowError::NegativeLead { arrival, admission });
    }
    if surgery < arrival {
        return Err(WindowError::SurgeryBeforeArrival { arrival, surgery });
    }
    let lead = admission - arrival;
    let half = (alpha.max(0.0) * lead as f64).floor() as i64;
    let start = (arrival + 1).max(surgery - half);
    let end = surgery + half;
    DateWindow::new(start, end).map_err(|_| WindowError::Empty { arrival })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> Day {
        s.parse().unwrap()
    }

    #[test]
    fn short_and_iso_timestamps_agree() {
        let a = parse_timestamp("15-1-1 23:59:00").unwrap();
        let b = parse_timestamp("2015-01-01T23:59:00").unwrap();
        assert_eq!(a, b);
        assert_eq!(parse_timestamp("58-1-1 13:00:00").unwrap().to_string(), "2058-01-01 13:00:00");
        assert_eq!(parse_timestamp("3018-02-22 12:51").unwrap().to_string(), "3018-02-22 12:51:00");
        assert_eq!(parse_timestamp("2001-01-01").unwrap().to_string(), "2001-01-01 00:00:00");
        assert!(parse_timestamp("15/1/1 0:00").is_none());
        assert!(parse_timestamp("").is_none());
    }

    #[test]
    fn window_matches_first_example_patient() {
        let w = available_window(d("2019-03-11"), d("2019-03-27"), d("2019-03-27"), 1.0).unwrap();
        assert_eq!((w.start(), w.end()), (d("2019-03-12"), d("2019-04-12")));
    }

    #[test]
    fn window_matches_second_example_patient() {
        let w = available_window(d("2019-06-28"), d("2019-07-10"), d("2019-07-10"), 1.0).unwrap();
        assert_eq!((w.start(), w.end()), (d("2019-06-29"), d("2019-07-22")));
    }

    #[test]
    fn zero_alpha_collapses_to_surgery_day() {
        let w = available_window(d("2019-06-28"), d("2019-07-10"), d("2019-07-10"), 0.0).unwrap();
        assert_eq!(w, DateWindow::single(d("2019-07-10")));
    }

    #[test]
    fn negative_lead_is_an_error() {
        assert!(matches!(
            available_window(d("2019-06-28"), d("2019-07-10"), d("2019-06-20"), 1.0),
            Err(WindowError::NegativeLead { .. })
        ));
    }

    #[test]
    fn same_day_surgery_has_no_window() {
        assert!(matches!(
            available_window(d("2019-06-28"), d("2019-06-28"), d("2019-06-28"), 1.0),
            Err(WindowError::Empty { .. })
        ));
    }

    proptest! {
        #[test]
        fn window_starts_after_arrival_and_holds_surgery(
            lead in 0i64..120, extra in 0i64..10, alpha in 0.0f64..3.0
        ) {
            let arrival = d("2019-01-01");
            let admission = arrival + lead;
            let surgery = admission + extra;
            if let Ok(w) = available_window(arrival, surgery, admission, alpha) {
                prop_assert!(w.start() > arrival);
                if alpha >= 1.0 && surgery > arrival {
                    prop_assert!(w.contains(surgery));
                }
            } else {
                // only a collapsed window may fail here
                let half = (alpha * lead as f64).floor() as i64;
                prop_assert!(surgery <= arrival || surgery + half < arrival + 1);
            }
        }
    }
}
