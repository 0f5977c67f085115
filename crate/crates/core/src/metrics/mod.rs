//! Evaluation statistics over daily admission counts.

mod report;

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDateTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{classify_elective, PatientProfile};
use crate::model::{DateWindow, Day, PatientId, UnitId};
use crate::simulator::SimRecord;

pub use report::{
    build_report, svg_histogram, svg_time_series, write_report_csv, BootstrapRow, BootstrapParams, Period, Report, ReportRow,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("series is empty")]
    EmptySeries,
    #[error("median of the {0} series is zero")]
    ZeroMedian(&'static str),
    #[error("series has {len} values, need more than {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// One entry of a patient into a unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissionRecord {
    pub patient: PatientId,
    pub day: Day,
    pub unit: UnitId,
    pub elective: bool,
    /// Entry right after the patient's first surgery.
    pub post_op: bool,
}

fn entries_to_records(
    patient: &PatientId,
    elective: bool,
    surgery_stage: Option<usize>,
    entries: impl Iterator<Item = (UnitId, NaiveDateTime)>,
    out: &mut Vec<AdmissionRecord>,
) {
    let post_op_stage = surgery_stage.map(|s| s + 1);
    for (k, (unit, t)) in entries.enumerate() {
        out.push(AdmissionRecord {
            patient: patient.clone(),
            day: Day::from(t.date()),
            unit,
            elective,
            post_op: Some(k) == post_op_stage,
        });
    }
}

/// Unit entries as recorded, from cumulated LOS.
pub fn admissions_from_profiles(profiles: &[PatientProfile]) -> Vec<AdmissionRecord> {
    let mut out = Vec::new();
    for p in profiles {
        let mut t = p.admission_time;
        let entries = p.unit_list.iter().zip(&p.los_list).map(|(u, los)| {
            let entry = (u.clone(), t);
            t += Duration::seconds(*los);
            entry
        });
        entries_to_records(&p.primary_csn, classify_elective(p), p.surgery_stage, entries, &mut out);
    }
    out
}

/// Unit entries as simulated.
pub fn admissions_from_sim(records: &[SimRecord]) -> Vec<AdmissionRecord> {
    let mut out = Vec::new();
    for r in records {
        let entries = r.trajectory.iter().map(|s| (s.unit.clone(), s.entered));
        entries_to_records(&r.primary_csn, r.elective, r.surgery_stage, entries, &mut out);
    }
    out
}

/// Day-indexed counts for one unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailySeries {
    pub unit: UnitId,
    pub filter: String,
    pub counts: BTreeMap<Day, u32>,
}

impl DailySeries {
    /// Consecutive days from `start`.
    pub fn from_counts(start: Day, counts: &[u32]) -> Self {
        DailySeries {
            unit: UnitId::none(),
            filter: String::new(),
            counts: counts.iter().enumerate().map(|(i, c)| (start + i as i64, *c)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn values(&self) -> Vec<u32> {
        self.counts.values().copied().collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|c| *c as u64).sum()
    }

    pub fn restrict(&self, range: DateWindow) -> DailySeries {
        DailySeries {
            unit: self.unit.clone(),
            filter: self.filter.clone(),
            counts: self.counts.range(range.start()..=range.end()).map(|(d, c)| (*d, *c)).collect(),
        }
    }

    pub fn weekdays_only(&self) -> DailySeries {
        DailySeries {
            unit: self.unit.clone(),
            filter: self.filter.clone(),
            counts: self.counts.iter().filter(|(d, _)| !d.is_weekend()).map(|(d, c)| (*d, *c)).collect(),
        }
    }
}

/// Zero-filled daily count of entries into `unit` over `range`. With
/// `elective_only`, only post-op entries of elective patients are counted.
pub fn daily_admissions(records: &[AdmissionRecord], unit: &UnitId, elective_only: bool, range: DateWindow) -> DailySeries {
    let mut counts: BTreeMap<Day, u32> = range.days().map(|d| (d, 0)).collect();
    for r in records {
        if r.unit != *unit || (elective_only && !(r.elective && r.post_op)) {
            continue;
        }
        if let Some(c) = counts.get_mut(&r.day) {
            *c += 1;
        }
    }
    DailySeries {
        unit: unit.clone(),
        filter: if elective_only { "elective post-op".into() } else { "all".into() },
        counts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deviation {
    #[default]
    Population,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub cov: f64,
    pub median: f64,
    pub q90: f64,
    /// Absent when the median is zero.
    pub qmra: Option<f64>,
    pub n_days: usize,
}

/// Interpolated order statistic at index `pct/100 * (n-1)`, returned as
/// hundredths so integer inputs stay exact.
fn quantile_centi(sorted: &[u32], pct: u64) -> u64 {
    let n = sorted.len() as u64;
    let h = pct * (n - 1);
    let (i, r) = ((h / 100) as usize, h % 100);
    let lo = sorted[i] as u64;
    if r == 0 {
        return lo * 100;
    }
    let hi = sorted[i + 1] as u64;
    lo * 100 + (hi - lo) * r
}

/// Linear-interpolation quantile for `pct` in 0..=100.
pub fn quantile(values: &[u32], pct: u32) -> Option<f64> {
    if values.is_empty() || pct > 100 {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    Some(quantile_centi(&v, pct as u64) as f64 / 100.0)
}

/// q90 / median on sorted counts; `None` for a zero median.
fn qmra_sorted(sorted: &[u32]) -> Option<f64> {
    let med = quantile_centi(sorted, 50);
    (med > 0).then(|| quantile_centi(sorted, 90) as f64 / med as f64)
}

pub fn qmra(values: &[u32]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    qmra_sorted(&v)
}

pub fn summarize(series: &DailySeries) -> Result<SummaryStats, MetricsError> {
    summarize_values(&series.values(), Deviation::Population)
}

/// Summary of raw counts. An all-zero series gets CoV 0.
pub fn summarize_values(values: &[u32], deviation: Deviation) -> Result<SummaryStats, MetricsError> {
    let n = values.len();
    if n == 0 {
        return Err(MetricsError::EmptySeries);
    }
    let mean = values.iter().map(|&c| c as f64).sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|&c| (c as f64 - mean).powi(2)).sum();
    let denom = match deviation {
        Deviation::Population => n as f64,
        Deviation::Sample if n > 1 => (n - 1) as f64,
        Deviation::Sample => 1.0,
    };
    let sd = (ss / denom).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    Ok(SummaryStats {
        mean,
        cov: if mean > 0.0 { sd / mean } else { 0.0 },
        median: quantile_centi(&sorted, 50) as f64 / 100.0,
        q90: quantile_centi(&sorted, 90) as f64 / 100.0,
        qmra: qmra_sorted(&sorted),
        n_days: n,
    })
}

/// Days with fewer than `lo` or more than `hi` admissions.
pub fn count_outlier_days(series: &DailySeries, lo: u32, hi: u32) -> usize {
    series.counts.values().filter(|&&c| c < lo || c > hi).count()
}

pub const WEEKDAYS: [Weekday; 5] = [Weekday::Mon, Weekday::Tue, Weekday::Wed, Weekday::Thu, Weekday::Fri];

/// Monday through Friday sub-series; weekends dropped.
pub fn weekday_split(series: &DailySeries) -> BTreeMap<u32, DailySeries> {
    let mut out: BTreeMap<u32, DailySeries> = WEEKDAYS
        .iter()
        .map(|w| {
            (
                w.num_days_from_monday(),
                DailySeries {
                    unit: series.unit.clone(),
                    filter: format!("{} {}", series.filter, w),
                    counts: BTreeMap::new(),
                },
            )
        })
        .collect();
    for (d, c) in &series.counts {
        if let Some(s) = out.get_mut(&d.weekday().num_days_from_monday()) {
            s.counts.insert(*d, *c);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeScale {
    /// `(after - before) / before`
    #[default]
    Relative,
    /// `after - before`
    Absolute,
}

impl ChangeScale {
    fn change(self, before: f64, after: f64) -> f64 {
        match self {
            ChangeScale::Relative => (after - before) / before,
            ChangeScale::Absolute => after - before,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub observed_change: f64,
    pub scale: ChangeScale,
    pub p_value: f64,
    pub m: usize,
    pub delta: f64,
    pub seed: u64,
}

pub const DEFAULT_BOOTSTRAP_SAMPLES: usize = 100_000;

/// One-sided test of whether the QMRA dropped by more than `delta`.
/// `p` is the share of resampled changes that are `>= -delta`.
pub fn bootstrap_test(
    before: &DailySeries,
    after: &DailySeries,
    delta: f64,
    m: usize,
    seed: u64,
) -> Result<BootstrapResult, MetricsError> {
    bootstrap_test_with(before, after, delta, m, seed, ChangeScale::Relative)
}

pub fn bootstrap_test_with(
    before: &DailySeries,
    after: &DailySeries,
    delta: f64,
    m: usize,
    seed: u64,
    scale: ChangeScale,
) -> Result<BootstrapResult, MetricsError> {
    if before.is_empty() || after.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(MetricsError::Invalid(format!("delta must be >= 0, got {delta}")));
    }
    if m == 0 {
        return Err(MetricsError::Invalid("m must be at least 1".into()));
    }
    let b = before.values();
    let a = after.values();
    let qb = qmra(&b).ok_or(MetricsError::ZeroMedian("before"))?;
    let qa = qmra(&a).ok_or(MetricsError::ZeroMedian("after"))?;
    let threshold = -delta;

    let hits: usize = (0..m as u64)
        .into_par_iter()
        .map_init(
            || (vec![0u32; b.len()], vec![0u32; a.len()]),
            |(rb, ra), rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(rep);
                resample(&b, rb, &mut rng);
                resample(&a, ra, &mut rng);
                match (qmra_sorted(rb), qmra_sorted(ra)) {
                    (Some(x), Some(y)) => (scale.change(x, y) >= threshold) as usize,
                    // a degenerate resample cannot show a drop
                    _ => 1,
                }
            },
        )
        .sum();

    Ok(BootstrapResult {
        observed_change: scale.change(qb, qa),
        scale,
        p_value: hits as f64 / m as f64,
        m,
        delta,
        seed,
    })
}

fn resample(src: &[u32], dst: &mut [u32], rng: &mut ChaCha8Rng) {
    for slot in dst.iter_mut() {
        *slot = src[rng.gen_range(0..src.len())];
    }
    dst.sort_unstable();
}

/// Lagged Pearson correlation at lags `1..=max_lag` over the weekday values.
/// A lag whose two segments have no spread yields NaN.
pub fn autocorrelation(series: &DailySeries, max_lag: usize) -> Result<Vec<f64>, MetricsError> {
    let x: Vec<f64> = series.weekdays_only().counts.values().map(|&c| c as f64).collect();
    if x.len() <= max_lag + 1 {
        return Err(MetricsError::SeriesTooShort {
            len: x.len(),
            needed: max_lag + 1,
        });
    }
    if x.iter().all(|v| *v == x[0]) {
        return Err(MetricsError::ZeroVariance);
    }
    Ok((1..=max_lag).map(|k| pearson(&x[..x.len() - k], &x[k..])).collect())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: i64,
    /// Bin lower edge to count.
    pub bins: BTreeMap<i64, u32>,
}

/// Binned reschedule deltas of BEDS-scheduled patients, plus the untouched
/// ones when `include_unrescheduled` is set.
pub fn reschedule_histogram(records: &[SimRecord], bin_width_days: i64, include_unrescheduled: bool) -> Histogram {
    let width = bin_width_days.max(1);
    let mut bins = BTreeMap::new();
    for r in records.iter().filter(|r| r.rescheduled || include_unrescheduled) {
        *bins.entry(r.delta_days.div_euclid(width) * width).or_insert(0) += 1;
    }
    Histogram { bin_width: width, bins }
}
