//! Discrete-event simulation of patient flow.
//!
//! Every profile enters as an ARRIVAL at its scheduling-request time. The
//! scheduler decides the surgery day at that moment: historical mode keeps the
//! recorded day, BEDS mode asks the greedy engine for a day inside the
//! patient's availability window. The whole trajectory then moves by the
//! resulting whole-day shift and plays out as TRANSFER_IN / READY_TO_TRANSFER
//! pairs per unit, ending in DISCHARGE.

mod event;

use std::collections::BTreeSet;
use std::io::Write;

use chrono::{Duration, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{book_request, recommend_greedy};
use crate::ingest::{classify_elective, PatientProfile, SurgeonAvailabilityRow};
use crate::model::{CaseRequest, DateWindow, Day, PatientId, ScheduleState, UnitId};

pub use event::{EventKind, EventQueue, SimEvent};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerMode {
    Historical,
    Beds,
}

/// Optional noise on lengths of stay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosPerturbation {
    Off,
    /// Multiplies each LOS by a factor drawn uniformly from `[1 - f, 1 + f]`.
    BoundedUniform(f64),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub mode: SchedulerMode,
    /// BEDS only schedules patients arriving on or after this day.
    pub beds_start_date: Day,
    pub beds_units: BTreeSet<UnitId>,
    pub alpha: f64,
    pub rng_seed: u64,
    pub los_perturbation: LosPerturbation,
    /// Whether patients kept on their recorded day also use up surgeon hours.
    pub consume_historical_hours: bool,
}

impl SimConfig {
    pub fn historical() -> Self {
        SimConfig {
            mode: SchedulerMode::Historical,
            beds_start_date: Day::from_ymd(1970, 1, 1).expect("valid date"),
            beds_units: BTreeSet::new(),
            alpha: 1.0,
            rng_seed: 0,
            los_perturbation: LosPerturbation::Off,
            consume_historical_hours: true,
        }
    }

    pub fn beds(start: Day, units: impl IntoIterator<Item = UnitId>) -> Self {
        SimConfig {
            mode: SchedulerMode::Beds,
            beds_start_date: start,
            beds_units: units.into_iter().collect(),
            ..Self::historical()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.mode == SchedulerMode::Beds && self.beds_units.is_empty() {
            return Err(SimError::Config("BEDS mode needs at least one unit".into()));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(SimError::Config(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if let LosPerturbation::BoundedUniform(f) = self.los_perturbation {
            if !(0.0..1.0).contains(&f) {
                return Err(SimError::Config(format!("LOS perturbation must be in [0, 1), got {f}")));
            }
        }
        Ok(())
    }
}

/// Realized stay in one unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub unit: UnitId,
    pub entered: NaiveDateTime,
    pub left: NaiveDateTime,
}

/// Per-patient outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub primary_csn: PatientId,
    /// Day the patient was originally scheduled to (first surgery day).
    pub original_day: Day,
    /// Day the simulated first surgery / admission actually happened.
    pub simulated_day: Day,
    pub delta_days: i64,
    /// Post-op unit (`NONE` for cases without one).
    pub unit: UnitId,
    pub elective: bool,
    /// True when BEDS chose the day.
    pub rescheduled: bool,
    pub window: Option<DateWindow>,
    /// Index of the first surgery in `trajectory`.
    pub surgery_stage: Option<usize>,
    pub trajectory: Vec<StageRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub patients: usize,
    pub beds_scheduled: usize,
    pub moved: usize,
    pub fallbacks: usize,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub events: Vec<SimEvent>,
    pub records: Vec<SimRecord>,
    pub stats: SimStats,
}

/// LOS source for READY_TO_TRANSFER times.
pub struct LosModel {
    perturbation: LosPerturbation,
    rng: ChaCha8Rng,
}

impl LosModel {
    pub fn new(perturbation: LosPerturbation, seed: u64) -> Self {
        LosModel {
            perturbation,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn exact() -> Self {
        Self::new(LosPerturbation::Off, 0)
    }

    pub fn sample(&mut self, los_seconds: i64) -> i64 {
        match self.perturbation {
            LosPerturbation::Off => los_seconds,
            LosPerturbation::BoundedUniform(f) if f > 0.0 => {
                let factor = self.rng.gen_range(1.0 - f..=1.0 + f);
                (los_seconds as f64 * factor).round() as i64
            }
            LosPerturbation::BoundedUniform(_) => los_seconds,
        }
    }
}

/// Successor events of `current` for `profile`, whose trajectory is shifted
/// by `delta_days`.
pub fn next_events(current: &SimEvent, profile: &PatientProfile, delta_days: i64, los: &mut LosModel) -> Vec<SimEvent> {
    let id = || profile.primary_csn.clone();
    match current.kind {
        EventKind::Arrival => match profile.unit_list.first() {
            Some(unit) => vec![SimEvent::new(
                EventKind::TransferIn,
                profile.admission_time + Duration::days(delta_days),
                id(),
                Some(unit.clone()),
                0,
            )],
            None => vec![SimEvent::new(EventKind::Discharge, current.time, id(), None, 0)],
        },
        EventKind::TransferIn => {
            let k = current.stage;
            let stay = los.sample(profile.los_list.get(k).copied().unwrap_or(0));
            vec![SimEvent::new(
                EventKind::ReadyToTransfer,
                current.time + Duration::seconds(stay),
                id(),
                current.unit_id.clone(),
                k,
            )]
        }
        EventKind::ReadyToTransfer => {
            let k = current.stage + 1;
            match profile.unit_list.get(k) {
                Some(unit) => vec![SimEvent::new(EventKind::TransferIn, current.time, id(), Some(unit.clone()), k)],
                None => vec![SimEvent::new(EventKind::Discharge, current.time, id(), None, current.stage)],
            }
        }
        EventKind::Discharge => Vec::new(),
    }
}

struct Scheduled {
    delta: i64,
    rescheduled: bool,
}

fn schedule(
    profile: &PatientProfile,
    state: &mut ScheduleState,
    cfg: &SimConfig,
    stats: &mut SimStats,
) -> Scheduled {
    let original = profile.original_day();
    let keep = Scheduled {
        delta: 0,
        rescheduled: false,
    };
    if !profile.has_surgery() {
        return keep;
    }
    let duration = profile.first_surgery_hours.unwrap_or_default();
    let eligible = cfg.mode == SchedulerMode::Beds
        && classify_elective(profile)
        && cfg.beds_units.contains(&profile.post_op_unit)
        && profile.arrival_day() >= cfg.beds_start_date;

    if eligible {
        let request = match (profile.window_with_alpha(cfg.alpha), &profile.primary_surgeon_id) {
            (Some(window), Some(surgeon)) if !duration.is_zero() => Some(CaseRequest::with_window(
                profile.primary_csn.clone(),
                surgeon.clone(),
                duration,
                window,
                profile.post_op_unit.clone(),
            )),
            _ => None,
        };
        if let Some(request) = request {
            let booked = recommend_greedy(state, &request)
                .ok()
                .and_then(|day| book_request(state, &request, day, profile.arrival_time.and_utc()).ok());
            if let Some(b) = booked {
                stats.beds_scheduled += 1;
                let delta = b.day - original;
                if delta != 0 {
                    stats.moved += 1;
                }
                return Scheduled {
                    delta,
                    rescheduled: true,
                };
            }
        }
        stats.fallbacks += 1;
    }

    let surgeon = cfg
        .consume_historical_hours
        .then_some(profile.primary_surgeon_id.as_ref())
        .flatten();
    state.seed_admission(original, surgeon, &profile.post_op_unit, duration);
    keep
}

/// Runs one simulation. Profiles are processed in `(arrival_time, csn)` order
/// and records come back in that order.
pub fn run(
    profiles: &[PatientProfile],
    availability: &[SurgeonAvailabilityRow],
    cfg: &SimConfig,
) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let mut order: Vec<&PatientProfile> = profiles.iter().collect();
    order.sort_by(|a, b| (a.arrival_time, &a.primary_csn).cmp(&(b.arrival_time, &b.primary_csn)));

    let mut state = ScheduleState::new();
    for row in availability {
        state.add_hours(row.date, row.primary_surgeon_id.clone(), row.available_hours);
    }

    let mut los = LosModel::new(cfg.los_perturbation, cfg.rng_seed);
    let mut stats = SimStats {
        patients: order.len(),
        ..Default::default()
    };
    let mut deltas = vec![0i64; order.len()];
    let mut rescheduled = vec![false; order.len()];
    let mut trajectories: Vec<Vec<StageRecord>> = order.iter().map(|p| Vec::with_capacity(p.unit_list.len())).collect();
    let mut simulated_day: Vec<Option<Day>> = vec![None; order.len()];

    let mut queue = EventQueue::new();
    for (i, p) in order.iter().enumerate() {
        queue.push(SimEvent::new(EventKind::Arrival, p.arrival_time, p.primary_csn.clone(), None, 0), i);
    }

    let mut events = Vec::new();
    while let Some((ev, i)) = queue.pop() {
        let profile = order[i];
        match ev.kind {
            EventKind::Arrival => {
                let s = schedule(profile, &mut state, cfg, &mut stats);
                deltas[i] = s.delta;
                rescheduled[i] = s.rescheduled;
            }
            EventKind::TransferIn => {
                let anchor = profile.surgery_stage.unwrap_or(0);
                if ev.stage == anchor {
                    simulated_day[i] = Some(Day::from(ev.time.date()));
                }
                trajectories[i].push(StageRecord {
                    unit: ev.unit_id.clone().unwrap_or_else(UnitId::none),
                    entered: ev.time,
                    left: ev.time,
                });
            }
            EventKind::ReadyToTransfer => {
                if let Some(last) = trajectories[i].last_mut() {
                    last.left = ev.time;
                }
            }
            EventKind::Discharge => {}
        }
        for next in next_events(&ev, profile, deltas[i], &mut los) {
            queue.push(next, i);
        }
        events.push(ev);
    }

    let records = order
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let original_day = p.original_day();
            SimRecord {
                primary_csn: p.primary_csn.clone(),
                original_day,
                simulated_day: simulated_day[i].unwrap_or(original_day + deltas[i]),
                delta_days: deltas[i],
                unit: p.post_op_unit.clone(),
                elective: classify_elective(p),
                rescheduled: rescheduled[i],
                window: p.window_with_alpha(cfg.alpha),
                surgery_stage: p.surgery_stage,
                trajectory: std::mem::take(&mut trajectories[i]),
            }
        })
        .collect();

    Ok(SimOutput { events, records, stats })
}

pub fn write_event_log<W: Write>(mut out: W, events: &[SimEvent]) -> Result<(), SimError> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub const RECORD_HEADER: [&str; 5] = ["primary_csn", "original_day", "simulated_day", "delta_days", "unit"];

pub fn write_records_csv<W: Write>(out: W, records: &[SimRecord]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.primary_csn.to_string(),
            r.original_day.to_string(),
            r.simulated_day.to_string(),
            r.delta_days.to_string(),
            r.unit.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A row of the records CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordRow {
    pub primary_csn: PatientId,
    pub original_day: Day,
    pub simulated_day: Day,
    pub delta_days: i64,
    pub unit: UnitId,
}

pub fn read_records_csv<R: std::io::Read>(input: R) -> Result<Vec<RecordRow>, SimError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
