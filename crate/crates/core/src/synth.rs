//! Seeded synthetic census / procedure / availability tables.
//!
//! Elective cases arrive as a Poisson stream per post-op unit, wait a
//! geometric number of days, and historically land on their surgeon's next
//! block day. Because blocks are concentrated on a few weekdays the recorded
//! admissions are spiky, while surgeons are available on every weekday, which
//! leaves room for leveling.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDateTime, NaiveTime, Timelike, Weekday};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Geometric, LogNormal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CensusRow, ProcedureRow, SurgeonAvailabilityRow};
use crate::model::{Day, Hours, PatientId, SurgeonId, UnitId};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),
}

/// Elective stream feeding one post-op unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitStream {
    pub unit: UnitId,
    /// Poisson mean of elective arrivals per calendar day.
    pub daily_rate: f64,
    /// Median post-op nights; log-normal around it.
    pub los_median_nights: f64,
    pub los_sigma: f64,
    /// Chance of continuing in `step_down_unit` after this one.
    pub step_down_prob: f64,
    pub step_down_unit: Option<UnitId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub start: Day,
    pub horizon_days: i64,
    pub streams: Vec<UnitStream>,
    /// Mean lead days; lead is `1 + Geometric`.
    pub lead_mean_days: f64,
    pub surgeons: usize,
    /// Weekdays per surgeon on which elective cases are historically booked.
    pub block_days_per_surgeon: usize,
    /// Relative popularity of Monday..Friday as block days.
    pub block_weekday_weights: [f64; 5],
    /// Hours a surgeon is available on each weekday.
    pub daily_hours: f64,
    pub case_minutes: (i64, i64),
    /// Same-day add-on cases per day (not elective).
    pub urgent_rate: f64,
    /// Ambulatory cases per day, no post-op bed.
    pub outpatient_rate: f64,
    /// Medical admissions per day per stream unit.
    pub medical_rate: f64,
    pub or_unit: UnitId,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let stream = |unit: &str, los: f64, step: f64, down: Option<&str>| UnitStream {
            unit: unit.into(),
            daily_rate: 2.5,
            los_median_nights: los,
            los_sigma: 0.6,
            step_down_prob: step,
            step_down_unit: down.map(UnitId::from),
        };
        SynthConfig {
            seed: 1,
            start: Day::from_ymd(2019, 1, 1).expect("valid date"),
            horizon_days: 730,
            streams: vec![stream("PICUs", 2.0, 0.4, Some("PCUs")), stream("PCUs", 3.0, 0.0, None)],
            lead_mean_days: 14.0,
            surgeons: 12,
            block_days_per_surgeon: 2,
            block_weekday_weights: [4.0, 3.0, 2.0, 1.0, 1.0],
            daily_hours: 7.0,
            case_minutes: (60, 240),
            urgent_rate: 0.3,
            outpatient_rate: 1.5,
            medical_rate: 0.5,
            or_unit: "MAIN OR".into(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        let rates = self
            .streams
            .iter()
            .flat_map(|s| [s.daily_rate, s.los_median_nights, s.los_sigma, s.step_down_prob])
            .chain([self.lead_mean_days, self.daily_hours, self.urgent_rate, self.outpatient_rate, self.medical_rate])
            .chain(self.block_weekday_weights);
        if rates.into_iter().any(|r| !(r.is_finite() && r >= 0.0)) {
            return bad("rates and parameters must be finite and >= 0".into());
        }
        if self.horizon_days < 1 {
            return bad("horizon must be at least one day".into());
        }
        if self.surgeons == 0 {
            return bad("need at least one surgeon".into());
        }
        if !(1..=5).contains(&self.block_days_per_surgeon) {
            return bad("block days per surgeon must be 1..=5".into());
        }
        if self.block_weekday_weights.iter().filter(|w| **w > 0.0).count() < self.block_days_per_surgeon {
            return bad("not enough weekdays with positive weight".into());
        }
        let (lo, hi) = self.case_minutes;
        if lo < 15 || hi < lo || hi > 8 * 60 {
            return bad("case minutes must satisfy 15 <= lo <= hi <= 480".into());
        }
        if self.lead_mean_days < 1.0 {
            return bad("mean lead must be at least one day".into());
        }
        if self.streams.iter().any(|s| s.step_down_prob > 1.0) {
            return bad("step-down probability must be <= 1".into());
        }
        Ok(())
    }

    pub fn end(&self) -> Day {
        self.start + (self.horizon_days - 1)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SynthData {
    pub census: Vec<CensusRow>,
    pub procedures: Vec<ProcedureRow>,
    pub availability: Vec<SurgeonAvailabilityRow>,
}

impl SynthData {
    /// Available surgeon hours over booked case hours.
    pub fn slack(&self) -> f64 {
        let avail: f64 = self.availability.iter().map(|a| a.available_hours.as_f64()).sum();
        let used: f64 = self.procedures.iter().map(|p| p.in_room_minutes() as f64 / 60.0).sum();
        if used == 0.0 {
            f64::INFINITY
        } else {
            avail / used
        }
    }
}

struct Gen<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    blocks: Vec<Vec<Weekday>>,
    next_csn: u64,
    out: SynthData,
}

const WEEKDAYS: [Weekday; 5] = [Weekday::Mon, Weekday::Tue, Weekday::Wed, Weekday::Thu, Weekday::Fri];
const CENSUS_TIME: (u32, u32) = (23, 59);

fn at(day: Day, h: u32, m: u32) -> NaiveDateTime {
    day.date().and_time(NaiveTime::from_hms_opt(h, m, 0).expect("valid time"))
}

fn surgeon_id(k: usize) -> SurgeonId {
    SurgeonId::new(format!("S{:03}", k + 1))
}

impl<'a> Gen<'a> {
    fn new(cfg: &'a SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut blocks = Vec::with_capacity(cfg.surgeons);
        for _ in 0..cfg.surgeons {
            let mut weights = cfg.block_weekday_weights;
            let mut days = Vec::new();
            while days.len() < cfg.block_days_per_surgeon {
                let pick = WeightedIndex::new(weights).expect("validated weights").sample(&mut rng);
                weights[pick] = 0.0;
                days.push(WEEKDAYS[pick]);
            }
            days.sort_by_key(|w| w.num_days_from_monday());
            blocks.push(days);
        }
        Gen {
            cfg,
            rng,
            blocks,
            next_csn: 100_000,
            out: SynthData::default(),
        }
    }

    fn csn(&mut self) -> PatientId {
        self.next_csn += 1;
        PatientId::new(self.next_csn.to_string())
    }

    fn next_block_day(&self, surgeon: usize, from: Day) -> Day {
        let mut d = from;
        while !self.blocks[surgeon].contains(&d.weekday()) {
            d = d.succ();
        }
        d
    }

    fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        Poisson::new(mean).expect("positive mean").sample(&mut self.rng) as u64
    }

    fn nights(&mut self, median: f64, sigma: f64) -> i64 {
        if median <= 0.0 {
            return 1;
        }
        let draw = if sigma > 0.0 {
            LogNormal::new(median.ln(), sigma).expect("valid log-normal").sample(&mut self.rng)
        } else {
            median
        };
        (draw.round() as i64).clamp(1, 60)
    }

    fn lead(&mut self) -> i64 {
        let p = 1.0 / self.cfg.lead_mean_days;
        if p >= 1.0 {
            return 1;
        }
        1 + Geometric::new(p).expect("valid p").sample(&mut self.rng) as i64
    }

    fn request_time(&mut self, day: Day) -> NaiveDateTime {
        let minute = self.rng.gen_range(8 * 60..17 * 60);
        at(day, minute / 60, minute % 60)
    }

    /// In-room / out-of-room pair on `day`, never crossing midnight.
    fn case_times(&mut self, day: Day, not_before: Option<NaiveDateTime>) -> (NaiveDateTime, NaiveDateTime) {
        let (lo, hi) = self.cfg.case_minutes;
        let len = self.rng.gen_range(lo / 15..=hi / 15) * 15;
        let latest = 23 * 60 + 45 - len;
        let earliest = match not_before {
            Some(t) => ((t.hour() * 60 + t.minute()) as i64 + 14) / 15 * 15,
            None => 7 * 60 + 30,
        }
        .min(latest);
        let last_start = latest.min(earliest + 6 * 60);
        let start = self.rng.gen_range(earliest / 15..=last_start / 15) * 15;
        let t_in = at(day, (start / 60) as u32, (start % 60) as u32);
        (t_in, t_in + Duration::minutes(len))
    }

    fn push_case(
        &mut self,
        csn: &PatientId,
        surgeon: usize,
        scheduled_on: NaiveDateTime,
        times: (NaiveDateTime, NaiveDateTime),
        class: &str,
    ) {
        let service = format!("Service {}", surgeon % 4 + 1);
        self.out.procedures.push(ProcedureRow {
            primary_csn: csn.clone(),
            primary_surgeon_id: surgeon_id(surgeon),
            location: self.cfg.or_unit.clone(),
            scheduled_on,
            scheduled_for: times.0,
            patient_in_room: times.0,
            patient_out_of_room: times.1,
            patient_class: Some(class.to_string()),
            service: Some(service),
            procedure_id: Some(format!("P{}", self.rng.gen_range(1000..2000))),
        });
    }

    /// Midnight census rows for consecutive stays starting the night of `first`.
    fn push_stays(&mut self, csn: &PatientId, admitted: NaiveDateTime, first: Day, stays: &[(UnitId, i64)], admit_type: &str) {
        let total: i64 = stays.iter().map(|(_, n)| n).sum();
        let discharge = at(first + total, 11, 0);
        let mut night = first;
        for (unit, n) in stays {
            for _ in 0..*n {
                self.out.census.push(CensusRow {
                    primary_csn: csn.clone(),
                    dept: unit.clone(),
                    effective_datetime: at(night, CENSUS_TIME.0, CENSUS_TIME.1),
                    admission_datetime: admitted,
                    discharge_datetime: Some(discharge),
                    service: Some("Pediatrics".into()),
                    admit_type: Some(admit_type.into()),
                    admit_source: Some("Home".into()),
                });
                night = night.succ();
            }
        }
    }

    fn post_op_stays(&mut self, stream: &UnitStream) -> Vec<(UnitId, i64)> {
        let mut stays = vec![(stream.unit.clone(), self.nights(stream.los_median_nights, stream.los_sigma))];
        if let Some(down) = &stream.step_down_unit {
            if stream.step_down_prob > 0.0 && self.rng.gen_bool(stream.step_down_prob) {
                let n = self.nights(stream.los_median_nights, stream.los_sigma);
                stays.push((down.clone(), n));
            }
        }
        stays
    }

    fn elective(&mut self, day: Day, stream: &UnitStream) {
        let csn = self.csn();
        let surgeon = self.rng.gen_range(0..self.cfg.surgeons);
        let requested = self.request_time(day);
        let lead = self.lead();
        let surgery_day = self.next_block_day(surgeon, day + lead);
        let times = self.case_times(surgery_day, None);
        self.push_case(&csn, surgeon, requested, times, "Surgery Admit");
        let stays = self.post_op_stays(stream);
        self.push_stays(&csn, times.0 - Duration::hours(1), surgery_day, &stays, "Elective");
    }

    fn outpatient(&mut self, day: Day) {
        let csn = self.csn();
        let surgeon = self.rng.gen_range(0..self.cfg.surgeons);
        let requested = self.request_time(day);
        let lead = self.lead();
        let surgery_day = self.next_block_day(surgeon, day + lead);
        let times = self.case_times(surgery_day, None);
        self.push_case(&csn, surgeon, requested, times, "Outpatient Surgery");
    }

    fn urgent(&mut self, day: Day, stream: &UnitStream) {
        let csn = self.csn();
        let surgeon = self.rng.gen_range(0..self.cfg.surgeons);
        let requested = self.request_time(day);
        let times = self.case_times(day, Some(requested));
        self.push_case(&csn, surgeon, requested, times, "Surgical Inpatient");
        let stays = self.post_op_stays(stream);
        self.push_stays(&csn, requested, day, &stays, "Urgent");
    }

    fn medical(&mut self, day: Day, stream: &UnitStream) {
        let csn = self.csn();
        let admitted = self.request_time(day);
        let stays = vec![(stream.unit.clone(), self.nights(stream.los_median_nights, stream.los_sigma))];
        self.push_stays(&csn, admitted, day, &stays, "Emergency");
    }

    fn run(mut self) -> SynthData {
        let cfg = self.cfg;
        for offset in 0..cfg.horizon_days {
            let day = cfg.start + offset;
            for stream in &cfg.streams {
                for _ in 0..self.poisson(stream.daily_rate) {
                    self.elective(day, stream);
                }
            }
            for _ in 0..self.poisson(cfg.outpatient_rate) {
                self.outpatient(day);
            }
            if !cfg.streams.is_empty() {
                for _ in 0..self.poisson(cfg.urgent_rate) {
                    let k = self.rng.gen_range(0..cfg.streams.len());
                    self.urgent(day, &cfg.streams[k]);
                }
                for stream in &cfg.streams {
                    for _ in 0..self.poisson(cfg.medical_rate) {
                        self.medical(day, stream);
                    }
                }
            }
        }

        // availability covers every weekday a case could land on
        let last_case = self.out.procedures.iter().map(|p| Day::from(p.patient_in_room.date())).max();
        let end = last_case.unwrap_or(cfg.end()).max(cfg.end()) + 2 * (cfg.lead_mean_days.ceil() as i64) + 7;
        let hours = Hours::from_f64(cfg.daily_hours).expect("validated hours");
        let mut availability = BTreeMap::new();
        for day in cfg.start.iter_to(end).filter(|d| !d.is_weekend()) {
            for k in 0..cfg.surgeons {
                availability.insert((day, k), hours);
            }
        }
        self.out.availability = availability
            .into_iter()
            .map(|((date, k), available_hours)| SurgeonAvailabilityRow {
                date,
                primary_surgeon_id: surgeon_id(k),
                service: format!("Service {}", k % 4 + 1),
                available_hours,
            })
            .collect();
        self.out
    }
}

/// Generates a population. Same config, same tables.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData, SynthError> {
    cfg.validate()?;
    Ok(Gen::new(cfg).run())
}

/// Weekdays on which each surgeon historically operates, for reporting.
pub fn block_pattern(cfg: &SynthConfig) -> Vec<(SurgeonId, Vec<Weekday>)> {
    Gen::new(cfg)
        .blocks
        .into_iter()
        .enumerate()
        .map(|(k, days)| (surgeon_id(k), days))
        .collect()
}
