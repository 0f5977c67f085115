use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::tables::{CensusRow, ProcedureRow, SurgeonAvailabilityRow, Tables};
use super::{available_window, IngestConfig, IngestError, Table};
use crate::model::{DateWindow, Day, Hours, PatientId, ScheduleState, SurgeonId, UnitId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatientClass {
    SurgicalOutpatient,
    SurgicalAdmit,
    SurgicalInpatient,
    MedicalInpatient,
}

impl PatientClass {
    /// Maps the procedure table's free-text class. Unknown strings on a
    /// surgical visit become `SurgicalInpatient`.
    pub fn from_procedure_class(raw: Option<&str>) -> PatientClass {
        let norm = raw.map(|s| s.trim().to_ascii_lowercase()).unwrap_or_default();
        match norm.as_str() {
            "outpatient surgery" | "surgical outpatient" | "outpatient" => PatientClass::SurgicalOutpatient,
            "surgery admit" | "surgical admit" | "surgery admission" => PatientClass::SurgicalAdmit,
            _ => PatientClass::SurgicalInpatient,
        }
    }
}

/// One visit's reconstructed trajectory.
///
/// `unit_list[k]` is occupied for `los_list[k]` seconds; stage 0 starts at
/// `admission_time` and each later stage starts when the previous one ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub primary_csn: PatientId,
    pub patient_class: PatientClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_class_raw: Option<String>,
    pub arrival_time: NaiveDateTime,
    pub admission_time: NaiveDateTime,
    /// Absent when no reschedulable window exists (no surgery, or the window
    /// collapses because surgery happened on the arrival day).
    pub available_window: Option<DateWindow>,
    pub unit_list: Vec<UnitId>,
    /// Length of stay per unit, in seconds.
    pub los_list: Vec<i64>,
    pub in_or_times: Vec<NaiveDateTime>,
    pub primary_surgeon_id: Option<SurgeonId>,
    /// In-room duration of the first surgery.
    pub first_surgery_hours: Option<Hours>,
    /// Stage index of the first surgery in `unit_list`.
    pub surgery_stage: Option<usize>,
    /// First unit after the first surgery; `NONE` when the case needs no bed.
    pub post_op_unit: UnitId,
}

impl PatientProfile {
    pub fn arrival_day(&self) -> Day {
        Day::from(self.arrival_time.date())
    }

    pub fn admission_day(&self) -> Day {
        Day::from(self.admission_time.date())
    }

    pub fn has_surgery(&self) -> bool {
        !self.in_or_times.is_empty()
    }

    /// The day the patient was scheduled to: first surgery day, or the
    /// admission day for visits without surgery.
    pub fn original_day(&self) -> Day {
        self.in_or_times
            .first()
            .map(|t| Day::from(t.date()))
            .unwrap_or_else(|| self.admission_day())
    }

    /// Whole days between arrival and admission.
    pub fn lead_days(&self) -> i64 {
        self.admission_day() - self.arrival_day()
    }

    pub fn total_los_seconds(&self) -> i64 {
        self.los_list.iter().sum()
    }

    /// Recomputes the availability window with another scaling factor.
    pub fn window_with_alpha(&self, alpha: f64) -> Option<DateWindow> {
        if !self.has_surgery() {
            return None;
        }
        available_window(self.arrival_day(), self.original_day(), self.admission_day(), alpha).ok()
    }
}

/// True for surgical outpatients, surgical admits, and anyone whose lead time
/// is at least one day.
pub fn classify_elective(profile: &PatientProfile) -> bool {
    matches!(
        profile.patient_class,
        PatientClass::SurgicalOutpatient | PatientClass::SurgicalAdmit
    ) || profile.lead_days() >= 1
}

/// Exclusion tallies. Each excluded patient is counted once, under the first
/// rule it fails, so `input_patients == profiles + excluded()`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_patients: usize,
    pub profiles: usize,
    pub rejected_census_rows: usize,
    pub rejected_procedure_rows: usize,
    pub missing_or_times: usize,
    pub malformed_census: usize,
    pub duplicates: usize,
    pub inconsecutive: usize,
    pub overnight: usize,
    pub out_of_scope: usize,
    pub inconsistent_times: usize,
    pub before_warmup: usize,
}

impl CleaningReport {
    pub fn excluded(&self) -> usize {
        self.missing_or_times
            + self.malformed_census
            + self.duplicates
            + self.inconsecutive
            + self.overnight
            + self.out_of_scope
            + self.inconsistent_times
            + self.before_warmup
    }
}

enum Exclusion {
    Duplicate,
    Inconsecutive,
    Overnight,
    OutOfScope,
    InconsistentTimes,
}

#[derive(Debug)]
enum Item<'a> {
    Surgery(&'a ProcedureRow),
    Midnight(&'a CensusRow),
}

impl Item<'_> {
    fn key(&self) -> (NaiveDateTime, u8) {
        match self {
            Item::Surgery(p) => (p.patient_in_room, 0),
            Item::Midnight(c) => (c.effective_datetime, 1),
        }
    }
}

enum Segment<'a> {
    Surgery(&'a ProcedureRow),
    Stay { unit: UnitId, nights: i64 },
}

fn reconstruct(
    csn: &PatientId,
    census: &mut [&CensusRow],
    procs: &mut [&ProcedureRow],
    cfg: &IngestConfig,
) -> Result<PatientProfile, Exclusion> {
    census.sort_by_key(|c| c.effective_datetime);
    procs.sort_by_key(|p| p.patient_in_room);

    for pair in census.windows(2) {
        let (a, b) = (pair[0].effective_datetime.date(), pair[1].effective_datetime.date());
        if a == b {
            return Err(Exclusion::Duplicate);
        }
    }
    for pair in census.windows(2) {
        let gap = (pair[1].effective_datetime.date() - pair[0].effective_datetime.date()).num_days();
        if gap != 1 {
            return Err(Exclusion::Inconsecutive);
        }
    }
    if procs
        .iter()
        .any(|p| p.patient_in_room.date() != p.patient_out_of_room.date())
    {
        return Err(Exclusion::Overnight);
    }
    if census.iter().any(|c| !cfg.scope_units.contains(&c.dept)) {
        return Err(Exclusion::OutOfScope);
    }

    let mut items: Vec<Item> = procs
        .iter()
        .map(|p| Item::Surgery(p))
        .chain(census.iter().map(|c| Item::Midnight(c)))
        .collect();
    items.sort_by_key(Item::key);

    let mut segments: Vec<Segment> = Vec::new();
    for item in &items {
        match item {
            Item::Surgery(p) => segments.push(Segment::Surgery(p)),
            Item::Midnight(c) => match segments.last_mut() {
                Some(Segment::Stay { unit, nights }) if *unit == c.dept => *nights += 1,
                _ => segments.push(Segment::Stay {
                    unit: c.dept.clone(),
                    nights: 1,
                }),
            },
        }
    }

    let admission_time = match segments.first() {
        Some(Segment::Surgery(p)) => p.patient_in_room,
        Some(Segment::Stay { .. }) => {
            let first = census.first().ok_or(Exclusion::InconsistentTimes)?;
            if first.admission_datetime > first.effective_datetime {
                return Err(Exclusion::InconsistentTimes);
            }
            first.admission_datetime
        }
        None => return Err(Exclusion::InconsistentTimes),
    };

    let mut unit_list = Vec::with_capacity(segments.len());
    let mut los_list = Vec::with_capacity(segments.len());
    let mut entry = admission_time;
    for (k, seg) in segments.iter().enumerate() {
        let next_surgery = match segments.get(k + 1) {
            Some(Segment::Surgery(p)) => Some(p.patient_in_room),
            _ => None,
        };
        let (unit, los) = match (seg, next_surgery) {
            (Segment::Surgery(p), None) => (p.location.clone(), p.patient_out_of_room - p.patient_in_room),
            (Segment::Stay { unit, nights }, None) => (unit.clone(), Duration::days(*nights)),
            (Segment::Surgery(p), Some(next)) => (p.location.clone(), next - entry),
            (Segment::Stay { unit, .. }, Some(next)) => (unit.clone(), next - entry),
        };
        if los < Duration::zero() {
            return Err(Exclusion::InconsistentTimes);
        }
        unit_list.push(unit);
        los_list.push(los.num_seconds());
        entry += los;
    }

    let first_proc = procs.first();
    let surgery_stage = segments.iter().position(|s| matches!(s, Segment::Surgery(_)));
    let post_op_unit = surgery_stage
        .and_then(|k| {
            segments[k + 1..].iter().find_map(|s| match s {
                Segment::Stay { unit, .. } => Some(unit.clone()),
                Segment::Surgery(_) => None,
            })
        })
        .unwrap_or_else(UnitId::none);

    let (patient_class, patient_class_raw) = match first_proc {
        None => (PatientClass::MedicalInpatient, None),
        Some(p) => (
            PatientClass::from_procedure_class(p.patient_class.as_deref()),
            p.patient_class.clone(),
        ),
    };
    let arrival_time = first_proc
        .map(|p| p.scheduled_on.min(admission_time))
        .unwrap_or(admission_time);

    let mut profile = PatientProfile {
        primary_csn: csn.clone(),
        patient_class,
        patient_class_raw,
        arrival_time,
        admission_time,
        available_window: None,
        unit_list,
        los_list,
        in_or_times: procs.iter().map(|p| p.patient_in_room).collect(),
        primary_surgeon_id: first_proc.map(|p| p.primary_surgeon_id.clone()),
        first_surgery_hours: first_proc.map(|p| Hours::from_minutes(p.in_room_minutes())),
        surgery_stage,
        post_op_unit,
    };
    profile.available_window = profile.window_with_alpha(cfg.alpha);
    Ok(profile)
}

/// Joins census and procedure rows per visit, applies the cleaning rules and
/// reconstructs each remaining visit's trajectory. Output is ordered by
/// `(arrival_time, primary_csn)`.
pub fn build_profiles(tables: &Tables, cfg: &IngestConfig) -> (Vec<PatientProfile>, CleaningReport) {
    let mut report = CleaningReport::default();
    let mut census_by: BTreeMap<&PatientId, Vec<&CensusRow>> = BTreeMap::new();
    let mut procs_by: BTreeMap<&PatientId, Vec<&ProcedureRow>> = BTreeMap::new();
    for c in &tables.census {
        census_by.entry(&c.primary_csn).or_default().push(c);
    }
    for p in &tables.procedures {
        procs_by.entry(&p.primary_csn).or_default().push(p);
    }
    let mut rejected_proc: BTreeSet<&PatientId> = BTreeSet::new();
    let mut rejected_census: BTreeSet<&PatientId> = BTreeSet::new();
    for r in &tables.rejects {
        match r.table {
            Table::Census => report.rejected_census_rows += 1,
            Table::Procedure => report.rejected_procedure_rows += 1,
            Table::Availability => {}
        }
        if let Some(csn) = &r.primary_csn {
            match r.table {
                Table::Procedure => {
                    rejected_proc.insert(csn);
                }
                Table::Census => {
                    rejected_census.insert(csn);
                }
                Table::Availability => {}
            }
        }
    }

    let all: BTreeSet<&PatientId> = census_by
        .keys()
        .chain(procs_by.keys())
        .chain(rejected_proc.iter())
        .chain(rejected_census.iter())
        .copied()
        .collect();
    report.input_patients = all.len();

    let warmup_start = cfg.effective_warmup_start();
    let mut profiles = Vec::new();
    for csn in all {
        if rejected_proc.contains(csn) {
            report.missing_or_times += 1;
            continue;
        }
        if rejected_census.contains(csn) {
            report.malformed_census += 1;
            continue;
        }
        let mut census = census_by.get(csn).cloned().unwrap_or_default();
        let mut procs = procs_by.get(csn).cloned().unwrap_or_default();
        match reconstruct(csn, &mut census, &mut procs, cfg) {
            Err(Exclusion::Duplicate) => report.duplicates += 1,
            Err(Exclusion::Inconsecutive) => report.inconsecutive += 1,
            Err(Exclusion::Overnight) => report.overnight += 1,
            Err(Exclusion::OutOfScope) => report.out_of_scope += 1,
            Err(Exclusion::InconsistentTimes) => report.inconsistent_times += 1,
            Ok(p) => {
                if warmup_start.is_some_and(|w| p.arrival_day() < w) {
                    report.before_warmup += 1;
                } else {
                    profiles.push(p);
                }
            }
        }
    }
    profiles.sort_by(|a, b| (a.arrival_time, &a.primary_csn).cmp(&(b.arrival_time, &b.primary_csn)));
    report.profiles = profiles.len();
    (profiles, report)
}

/// Surgeon availability inferred from case load: a surgeon whose summed
/// in-room time on a day strictly exceeds `threshold` is given a full block of
/// `block` hours that day.
pub fn infer_surgeon_availability(
    procedures: &[ProcedureRow],
    threshold: Hours,
    block: Hours,
) -> Vec<SurgeonAvailabilityRow> {
    let mut load: BTreeMap<(Day, &SurgeonId), (i64, Option<&str>)> = BTreeMap::new();
    for p in procedures {
        let key = (Day::from(p.patient_in_room.date()), &p.primary_surgeon_id);
        let entry = load.entry(key).or_insert((0, None));
        entry.0 += p.in_room_minutes();
        if let Some(s) = p.service.as_deref() {
            entry.1 = Some(entry.1.map_or(s, |cur| cur.min(s)));
        }
    }
    load.into_iter()
        .filter(|(_, (minutes, _))| Hours::from_minutes(*minutes) > threshold)
        .map(|((date, surgeon), (_, service))| SurgeonAvailabilityRow {
            date,
            primary_surgeon_id: surgeon.clone(),
            service: service.unwrap_or_default().to_string(),
            available_hours: block,
        })
        .collect()
}

/// Ledger for live use: surgeon hours from `availability`, minus each
/// surgical profile's first case, which also counts one admission to its
/// post-op unit on its surgery day.
pub fn initial_state(profiles: &[PatientProfile], availability: &[SurgeonAvailabilityRow]) -> ScheduleState {
    let mut state = ScheduleState::new();
    for row in availability {
        state.add_hours(row.date, row.primary_surgeon_id.clone(), row.available_hours);
    }
    for p in profiles.iter().filter(|p| p.has_surgery()) {
        state.seed_admission(
            p.original_day(),
            p.primary_surgeon_id.as_ref(),
            &p.post_op_unit,
            p.first_surgery_hours.unwrap_or_default(),
        );
    }
    state
}

pub fn write_profiles<W: Write>(mut out: W, profiles: &[PatientProfile]) -> Result<(), IngestError> {
    for p in profiles {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_profiles<R: BufRead>(input: R) -> Result<Vec<PatientProfile>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| IngestError::ProfileLine {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
