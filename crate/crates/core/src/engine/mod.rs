//! Day recommendation for one case at a time.
//!
//! Candidate days are the days inside both of the request's windows on which
//! the surgeon still has at least the case duration free. The greedy rule
//! returns the candidate with the fewest admissions already scheduled to the
//! request's post-op unit, earliest day first on ties. The same filter feeds
//! any [`RankingPolicy`], whose top `n` days form a [`Recommendation`].

mod heatmap;
mod policy;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Booking, CaseRequest, Day, ModelError, ScheduleState};

pub use heatmap::{heatmap, HeatmapCell, Thresholds};
pub use policy::{policy_by_name, EarliestFeasible, FewestAdmissions, RankingPolicy, WeightedWait};

/// Upper bound on the number of days scanned per request.
pub const DEFAULT_HORIZON_CAP_DAYS: i64 = 365;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no feasible day for patient {0}")]
    NoFeasibleDay(String),
    #[error("{day} is not a feasible day for patient {patient}")]
    DayNotFeasible { patient: String, day: Day },
    #[error(transparent)]
    InsufficientHours(ModelError),
    #[error("invalid request: {0}")]
    Validation(String),
    #[error(transparent)]
    Model(ModelError),
}

impl From<ModelError> for EngineError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InsufficientHours { .. } => EngineError::InsufficientHours(e),
            other => EngineError::Model(other),
        }
    }
}

/// Candidate enumeration limits.
#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    pub horizon_cap_days: i64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            horizon_cap_days: DEFAULT_HORIZON_CAP_DAYS,
        }
    }
}

/// Ascending feasible days for `request`.
pub fn candidate_days(state: &ScheduleState, request: &CaseRequest) -> Vec<Day> {
    candidate_days_with(state, request, EngineConfig::default())
}

pub fn candidate_days_with(state: &ScheduleState, request: &CaseRequest, cfg: EngineConfig) -> Vec<Day> {
    let Some(window) = request.search_window() else {
        return Vec::new();
    };
    let last = window.end().min(window.start() + (cfg.horizon_cap_days.max(1) - 1));
    window
        .start()
        .iter_to(last)
        .filter(|d| state.hours(*d, &request.surgeon_id) >= request.duration_hours)
        .collect()
}

/// The earliest candidate among those with the fewest scheduled admissions
/// to the request's post-op unit.
pub fn recommend_greedy(state: &ScheduleState, request: &CaseRequest) -> Result<Day, EngineError> {
    candidate_days(state, request)
        .into_iter()
        .min_by_key(|d| (state.admissions(*d, &request.post_op_unit), *d))
        .ok_or_else(|| EngineError::NoFeasibleDay(request.patient_id.to_string()))
}

/// Ranked days with the ledger values they were ranked on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub policy: String,
    pub ranked_days: Vec<Day>,
    pub annotations: Vec<HeatmapCell>,
}

pub fn recommend_topn(
    state: &ScheduleState,
    request: &CaseRequest,
    policy: &dyn RankingPolicy,
    n: usize,
    thresholds: &Thresholds,
) -> Result<Recommendation, EngineError> {
    recommend_topn_with(state, request, policy, n, thresholds, EngineConfig::default())
}

pub fn recommend_topn_with(
    state: &ScheduleState,
    request: &CaseRequest,
    policy: &dyn RankingPolicy,
    n: usize,
    thresholds: &Thresholds,
    cfg: EngineConfig,
) -> Result<Recommendation, EngineError> {
    if n == 0 {
        return Err(EngineError::Validation("n must be at least 1".into()));
    }
    let candidates = candidate_days_with(state, request, cfg);
    if candidates.is_empty() {
        return Err(EngineError::NoFeasibleDay(request.patient_id.to_string()));
    }
    let mut ranked = policy.rank(state, request, &candidates);
    ranked.truncate(n);
    let annotations = ranked
        .iter()
        .map(|d| HeatmapCell::at(state, *d, &request.post_op_unit, &request.surgeon_id, thresholds))
        .collect();
    Ok(Recommendation {
        policy: policy.name().to_string(),
        ranked_days: ranked,
        annotations,
    })
}

/// Books `request` on `day` after re-checking feasibility against `state`.
pub fn book_request(
    state: &mut ScheduleState,
    request: &CaseRequest,
    day: Day,
    recorded_at: DateTime<Utc>,
) -> Result<Booking, EngineError> {
    let booking = prepare_booking(state, request, day, recorded_at)?;
    state.apply_booking(booking.clone())?;
    Ok(booking)
}

/// Runs every check `book_request` does and returns the booking it would
/// apply, leaving the state untouched.
pub fn prepare_booking(
    state: &ScheduleState,
    request: &CaseRequest,
    day: Day,
    recorded_at: DateTime<Utc>,
) -> Result<Booking, EngineError> {
    request.validate().map_err(EngineError::Validation)?;
    let in_window = request.search_window().is_some_and(|w| w.contains(day));
    if !in_window {
        return Err(EngineError::DayNotFeasible {
            patient: request.patient_id.to_string(),
            day,
        });
    }
    let available = state.hours(day, &request.surgeon_id);
    if available < request.duration_hours {
        return Err(EngineError::InsufficientHours(ModelError::InsufficientHours {
            day,
            surgeon: request.surgeon_id.clone(),
            available,
            requested: request.duration_hours,
        }));
    }
    Ok(Booking {
        patient_id: request.patient_id.clone(),
        surgeon_id: request.surgeon_id.clone(),
        unit_id: request.post_op_unit.clone(),
        day,
        duration_hours: request.duration_hours,
        sequence_number: state.next_sequence(),
        timestamp: recorded_at,
    })
}

/// Remaining hours check used by callers that want to distinguish a day that
/// left the window from one whose hours ran out.
pub fn has_hours(state: &ScheduleState, request: &CaseRequest, day: Day) -> bool {
    state.hours(day, &request.surgeon_id) >= request.duration_hours
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DateWindow, Hours, PatientId, UnitId};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn day(s: &str) -> Day {
        s.parse().unwrap()
    }

    fn request(start: &str, end: &str, centi: i64) -> CaseRequest {
        CaseRequest::with_window(
            PatientId::new("p"),
            "s1".into(),
            Hours::from_centi(centi),
            DateWindow::new(day(start), day(end)).unwrap(),
            "PICUs".into(),
        )
    }

    fn now() -> DateTime<Utc> {
        DateTime::from_timestamp(1_700_000_000, 0).unwrap()
    }

    // 2024-01-01 is a Monday.
    #[test]
    fn candidates_filter_on_hours() {
        let mut s = ScheduleState::new();
        s.seed_hours(day("2024-01-01"), "s1".into(), Hours::from_centi(500));
        s.seed_hours(day("2024-01-03"), "s1".into(), Hours::from_centi(500));
        s.seed_hours(day("2024-01-04"), "s1".into(), Hours::from_centi(200));
        let got = candidate_days(&s, &request("2024-01-01", "2024-01-05", 250));
        assert_eq!(got, vec![day("2024-01-01"), day("2024-01-03")]);
    }

    #[test]
    fn oversized_case_has_no_candidates() {
        let mut s = ScheduleState::new();
        s.seed_hours(day("2024-01-01"), "s1".into(), Hours::from_centi(500));
        assert!(candidate_days(&s, &request("2024-01-01", "2024-01-05", 900)).is_empty());
        assert!(matches!(
            recommend_greedy(&s, &request("2024-01-01", "2024-01-05", 900)),
            Err(EngineError::NoFeasibleDay(_))
        ));
    }

    #[test]
    fn disjoint_windows_have_no_candidates() {
        let mut s = ScheduleState::new();
        s.seed_hours(day("2024-01-01"), "s1".into(), Hours::from_centi(500));
        let mut r = request("2024-01-01", "2024-01-05", 100);
        r.patient_window = DateWindow::new(day("2024-02-01"), day("2024-02-05")).unwrap();
        assert!(candidate_days(&s, &r).is_empty());
    }

    #[test]
    fn greedy_breaks_ties_by_earliest_day() {
        let mut s = ScheduleState::new();
        let unit: UnitId = "PICUs".into();
        let counts = [3, 1, 1];
        for (k, c) in counts.iter().enumerate() {
            let d = day("2024-01-01") + k as i64;
            s.seed_hours(d, "s1".into(), Hours::from_centi(700));
            for _ in 0..*c {
                s.seed_admission(d, None, &unit, Hours::ZERO);
            }
        }
        assert_eq!(recommend_greedy(&s, &request("2024-01-01", "2024-01-03", 100)).unwrap(), day("2024-01-02"));
    }

    #[test]
    fn singleton_candidate_is_returned() {
        let mut s = ScheduleState::new();
        s.seed_hours(day("2024-01-04"), "s1".into(), Hours::from_centi(700));
        assert_eq!(recommend_greedy(&s, &request("2024-01-01", "2024-01-09", 100)).unwrap(), day("2024-01-04"));
    }

    #[test]
    fn candidate_scan_respects_horizon_cap() {
        let mut s = ScheduleState::new();
        for k in 0..20 {
            s.seed_hours(day("2024-01-01") + k, "s1".into(), Hours::from_centi(700));
        }
        let r = request("2024-01-01", "2024-01-20", 100);
        let got = candidate_days_with(&s, &r, EngineConfig { horizon_cap_days: 5 });
        assert_eq!(got.len(), 5);
        assert_eq!(*got.last().unwrap(), day("2024-01-05"));
    }

    #[test]
    fn topn_truncates_and_covers_all_when_n_is_large() {
        let mut s = ScheduleState::new();
        for k in 0..4 {
            s.seed_hours(day("2024-01-01") + k, "s1".into(), Hours::from_centi(700));
        }
        let r = request("2024-01-01", "2024-01-10", 100);
        let th = Thresholds::default();
        let rec = recommend_topn(&s, &r, &FewestAdmissions, 10, &th).unwrap();
        assert_eq!(rec.ranked_days.len(), 4);
        let rec1 = recommend_topn(&s, &r, &FewestAdmissions, 1, &th).unwrap();
        assert_eq!(rec1.ranked_days, vec![recommend_greedy(&s, &r).unwrap()]);
        assert!(recommend_topn(&s, &r, &FewestAdmissions, 0, &th).is_err());
    }

    #[test]
    fn booking_is_visible_to_the_next_request() {
        let mut s = ScheduleState::new();
        for k in 0..3 {
            s.seed_hours(day("2024-01-01") + k, "s1".into(), Hours::from_centi(700));
        }
        let r = request("2024-01-01", "2024-01-03", 300);
        let d = recommend_greedy(&s, &r).unwrap();
        book_request(&mut s, &r, d, now()).unwrap();
        let rec = recommend_topn(&s, &r, &FewestAdmissions, 3, &Thresholds::default()).unwrap();
        let cell = rec.annotations.iter().find(|c| c.day == d).unwrap();
        assert_eq!(cell.admissions, 1);
        assert_eq!(rec.ranked_days[2], d);
    }

    #[test]
    fn exhausted_day_leaves_candidates() {
        let mut s = ScheduleState::new();
        s.seed_hours(day("2024-01-01"), "s1".into(), Hours::from_centi(300));
        s.seed_hours(day("2024-01-02"), "s1".into(), Hours::from_centi(700));
        let r = request("2024-01-01", "2024-01-02", 300);
        book_request(&mut s, &r, day("2024-01-01"), now()).unwrap();
        assert_eq!(candidate_days(&s, &r), vec![day("2024-01-02")]);
    }

    #[test]
    fn booking_outside_window_is_rejected() {
        let mut s = ScheduleState::new();
        s.seed_hours(day("2024-01-09"), "s1".into(), Hours::from_centi(700));
        let r = request("2024-01-01", "2024-01-02", 300);
        let before = s.clone();
        assert!(matches!(
            book_request(&mut s, &r, day("2024-01-09"), now()),
            Err(EngineError::DayNotFeasible { .. })
        ));
        assert_eq!(s, before);
    }

    #[test]
    fn booking_without_hours_reports_insufficient_hours() {
        let mut s = ScheduleState::new();
        s.seed_hours(day("2024-01-01"), "s1".into(), Hours::from_centi(200));
        let r = request("2024-01-01", "2024-01-02", 300);
        assert!(matches!(
            book_request(&mut s, &r, day("2024-01-01"), now()),
            Err(EngineError::InsufficientHours(_))
        ));
    }

    // Exhaustive search over every assignment sequence of k identical cases to
    // three days: the smallest achievable maximum count.
    fn brute_force_min_max(k: usize, days: usize) -> u32 {
        fn go(left: usize, counts: &mut Vec<u32>) -> u32 {
            if left == 0 {
                return *counts.iter().max().unwrap();
            }
            let mut best = u32::MAX;
            for i in 0..counts.len() {
                counts[i] += 1;
                best = best.min(go(left - 1, counts));
                counts[i] -= 1;
            }
            best
        }
        go(k, &mut vec![0; days])
    }

    #[test]
    fn sequential_greedy_levels_a_symmetric_window() {
        for k in 1..=8usize {
            let mut s = ScheduleState::new();
            for d in 0..3 {
                s.seed_hours(day("2024-01-01") + d, "s1".into(), Hours::from_centi(10_000));
            }
            let r = request("2024-01-01", "2024-01-03", 100);
            for _ in 0..k {
                let d = recommend_greedy(&s, &r).unwrap();
                book_request(&mut s, &r, d, now()).unwrap();
            }
            let max = (0..3)
                .map(|d| s.admissions(day("2024-01-01") + d, &"PICUs".into()))
                .max()
                .unwrap();
            let optimum = brute_force_min_max(k, 3);
            assert_eq!(optimum as usize, k.div_ceil(3));
            assert_eq!(max, optimum, "k = {k}");
        }
    }

    #[test]
    fn booking_never_lowers_counts_or_raises_hours() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = ScheduleState::new();
        for d in 0..10 {
            s.seed_hours(day("2024-01-01") + d, "s1".into(), Hours::from_centi(rng.gen_range(0..800)));
        }
        for _ in 0..30 {
            let r = request("2024-01-01", "2024-01-10", rng.gen_range(50..300));
            let before = s.clone();
            if let Ok(d) = recommend_greedy(&s, &r) {
                book_request(&mut s, &r, d, now()).unwrap();
            }
            for k in 0..10 {
                let d = day("2024-01-01") + k;
                assert!(s.admissions(d, &"PICUs".into()) >= before.admissions(d, &"PICUs".into()));
                assert!(s.hours(d, &"s1".into()) <= before.hours(d, &"s1".into()));
            }
        }
    }
}
