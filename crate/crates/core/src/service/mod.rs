//! Live scheduling service: one ledger, many readers, one writer.

mod http;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Mutex, RwLock};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    heatmap, prepare_booking, recommend_topn_with, EngineConfig, EngineError, FewestAdmissions, HeatmapCell,
    Recommendation, Thresholds, DEFAULT_HORIZON_CAP_DAYS,
};
use crate::model::{AdmissionEntry, Booking, CaseRequest, DateWindow, Day, HoursEntry, ScheduleState, SurgeonId, UnitId};

pub use http::{router, serve, BookBody, BookResponse, HeatmapQuery, HeatmapResponse, RecommendBody, RecommendResponse};
pub use store::{read_snapshot, recover, write_snapshot, Store};

pub const DEFAULT_SNAPSHOT_EVERY: u64 = 1000;
/// Longest heatmap range served in one request.
pub const MAX_HEATMAP_DAYS: i64 = 731;
/// Default heatmap span around a reference day.
pub const HEATMAP_DAYS_BEFORE: i64 = 14;
pub const HEATMAP_DAYS_AFTER: i64 = 30;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("corrupt ledger files: {0}")]
    Corrupt(String),
    #[error("invalid service config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub journal_path: PathBuf,
    pub snapshot_path: PathBuf,
    pub thresholds: Thresholds,
    pub default_top_n: usize,
    pub horizon_cap_days: i64,
    pub snapshot_every: u64,
}

impl ServiceConfig {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        ServiceConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            journal_path: dir.join("journal.ndjson"),
            snapshot_path: dir.join("snapshot.json"),
            thresholds: Thresholds::default(),
            default_top_n: 5,
            horizon_cap_days: DEFAULT_HORIZON_CAP_DAYS,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.default_top_n == 0 {
            return Err(ServiceError::Config("default top-n must be at least 1".into()));
        }
        if self.horizon_cap_days < 1 {
            return Err(ServiceError::Config("horizon cap must be at least 1 day".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ApiCode {
    NoFeasibleDay,
    DayNotFeasible,
    InsufficientHours,
    Validation,
    Conflict,
    /// Storage failure; the booking was not acknowledged.
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("{code:?}: {message}")]
pub struct ApiError {
    pub code: ApiCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ApiCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ApiCode::Validation, message)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::NoFeasibleDay(_) => ApiCode::NoFeasibleDay,
            EngineError::DayNotFeasible { .. } => ApiCode::DayNotFeasible,
            EngineError::InsufficientHours(_) => ApiCode::InsufficientHours,
            EngineError::Validation(_) | EngineError::Model(_) => ApiCode::Validation,
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError::new(ApiCode::Internal, e.to_string())
    }
}

/// Booking receipt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Receipt {
    pub version: u64,
    pub booking: Booking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub version: u64,
    pub total_admissions: u64,
    pub unit_admissions: Vec<AdmissionEntry>,
    pub surgeon_hours: Vec<HoursEntry>,
}

impl StateSummary {
    pub fn of(state: &ScheduleState) -> Self {
        let snap = state.to_snapshot();
        StateSummary {
            version: state.last_sequence(),
            total_admissions: snap.unit_admissions.iter().map(|a| a.count as u64).sum(),
            unit_admissions: snap.unit_admissions,
            surgeon_hours: snap.surgeon_hours,
        }
    }
}

pub struct SchedulingService {
    state: RwLock<ScheduleState>,
    store: Mutex<Store>,
    thresholds: Thresholds,
    default_top_n: usize,
    engine: EngineConfig,
}

impl SchedulingService {
    /// Recovers from the configured files. `base` is only used on first start.
    pub fn open(cfg: &ServiceConfig, base: ScheduleState) -> Result<Self, ServiceError> {
        cfg.validate()?;
        for p in [&cfg.journal_path, &cfg.snapshot_path] {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
        }
        let (store, state) = Store::open(&cfg.journal_path, &cfg.snapshot_path, base, cfg.snapshot_every)?;
        Ok(SchedulingService {
            state: RwLock::new(state),
            store: Mutex::new(store),
            thresholds: cfg.thresholds.clone(),
            default_top_n: cfg.default_top_n,
            engine: EngineConfig {
                horizon_cap_days: cfg.horizon_cap_days,
            },
        })
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, ScheduleState> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn version(&self) -> u64 {
        self.read().last_sequence()
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    /// Copy of the ledger, for inspection.
    pub fn ledger(&self) -> ScheduleState {
        self.read().clone()
    }

    pub fn heatmap(&self, unit: &UnitId, surgeon: &SurgeonId, range: DateWindow) -> Result<(u64, Vec<HeatmapCell>), ApiError> {
        if range.len_days() > MAX_HEATMAP_DAYS {
            return Err(ApiError::validation(format!("range longer than {MAX_HEATMAP_DAYS} days")));
        }
        let st = self.read();
        Ok((st.last_sequence(), heatmap(&st, unit, surgeon, range, &self.thresholds)))
    }

    pub fn recommend(&self, request: &CaseRequest, n: Option<usize>) -> Result<(u64, Recommendation), ApiError> {
        let n = n.unwrap_or(self.default_top_n);
        let st = self.read();
        let rec = recommend_topn_with(&st, request, &FewestAdmissions, n, &self.thresholds, self.engine)?;
        Ok((st.last_sequence(), rec))
    }

    /// Applies a booking after it is durably journaled. With
    /// `expected_version` set and stale, a booking that no longer fits is
    /// reported as CONFLICT so the caller knows to re-recommend.
    pub fn book(&self, request: &CaseRequest, day: Day, expected_version: Option<u64>) -> Result<Receipt, ApiError> {
        let mut st = self.state.write().unwrap_or_else(|e| e.into_inner());
        let booking = match prepare_booking(&st, request, day, Utc::now()) {
            Ok(b) => b,
            Err(e) => {
                let err = ApiError::from(e);
                let stale = expected_version.is_some_and(|v| v != st.last_sequence());
                let changed = matches!(err.code, ApiCode::DayNotFeasible | ApiCode::InsufficientHours);
                return Err(if stale && changed {
                    ApiError::new(
                        ApiCode::Conflict,
                        format!("ledger moved from version {} to {}: {}", expected_version.unwrap_or_default(), st.last_sequence(), err.message),
                    )
                } else {
                    err
                });
            }
        };
        let mut store = self.store.lock().unwrap_or_else(|e| e.into_inner());
        store.append(&booking)?;
        st.apply_booking(booking.clone())
            .map_err(|e| ApiError::new(ApiCode::Internal, e.to_string()))?;
        if store.snapshot_due() {
            store.snapshot(&st)?;
            st.clear_journal();
        }
        Ok(Receipt {
            version: st.last_sequence(),
            booking,
        })
    }

    pub fn summary(&self) -> StateSummary {
        StateSummary::of(&self.read())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Hours;
    use std::sync::Arc;

    fn d(s: &str) -> Day {
        s.parse().unwrap()
    }

    fn base() -> ScheduleState {
        let mut s = ScheduleState::new();
        for k in 0..10 {
            s.seed_hours(d("2020-03-02") + k, "s1".into(), Hours::from_centi(700));
        }
        s
    }

    fn request(id: &str, hours: i64) -> CaseRequest {
        CaseRequest::with_window(
            id.into(),
            "s1".into(),
            Hours::from_centi(hours),
            DateWindow::new(d("2020-03-02"), d("2020-03-11")).unwrap(),
            "PICUs".into(),
        )
    }

    #[test]
    fn booking_bumps_version_and_journal() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ServiceConfig::in_dir(dir.path());
        let svc = SchedulingService::open(&cfg, base()).unwrap();
        let (v, rec) = svc.recommend(&request("a", 200), Some(1)).unwrap();
        assert_eq!(v, 0);
        let receipt = svc.book(&request("a", 200), rec.ranked_days[0], Some(v)).unwrap();
        assert_eq!(receipt.version, 1);
        assert_eq!(receipt.booking.sequence_number, 1);
        let lines = std::fs::read_to_string(&cfg.journal_path).unwrap().lines().count();
        assert_eq!(lines, 1);
        assert_eq!(svc.summary().total_admissions, 1);
    }

    #[test]
    fn stale_infeasible_booking_is_a_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let svc = SchedulingService::open(&ServiceConfig::in_dir(dir.path()), base()).unwrap();
        let day = d("2020-03-02");
        svc.book(&request("a", 450), day, Some(0)).unwrap();
        let err = svc.book(&request("b", 450), day, Some(0)).unwrap_err();
        assert_eq!(err.code, ApiCode::Conflict);
        let err = svc.book(&request("b", 450), day, None).unwrap_err();
        assert_eq!(err.code, ApiCode::InsufficientHours);
        let err = svc.book(&request("b", 100), d("2021-01-01"), None).unwrap_err();
        assert_eq!(err.code, ApiCode::DayNotFeasible);
    }

    #[test]
    fn concurrent_race_for_last_slot_has_one_winner() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = ScheduleState::new();
        b.seed_hours(d("2020-03-02"), "s1".into(), Hours::from_centi(250));
        let svc = Arc::new(SchedulingService::open(&ServiceConfig::in_dir(dir.path()), b).unwrap());
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let svc = svc.clone();
                std::thread::spawn(move || svc.book(&request(&format!("p{i}"), 250), d("2020-03-02"), Some(0)))
            })
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
        assert!(results
            .iter()
            .filter_map(|r| r.as_ref().err())
            .all(|e| e.code == ApiCode::Conflict));
    }

    #[test]
    fn snapshots_truncate_journal_and_survive_restart() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ServiceConfig::in_dir(dir.path());
        cfg.snapshot_every = 3;
        let expected = {
            let svc = SchedulingService::open(&cfg, base()).unwrap();
            for i in 0..7 {
                svc.book(&request(&format!("p{i}"), 100), d("2020-03-02") + (i % 4), None).unwrap();
            }
            assert_eq!(std::fs::read_to_string(&cfg.journal_path).unwrap().lines().count(), 1);
            svc.ledger()
        };
        let again = SchedulingService::open(&cfg, ScheduleState::new()).unwrap();
        assert!(again.ledger().same_ledger(&expected));
        assert_eq!(again.version(), 7);
    }

    #[test]
    fn read_paths_do_not_touch_the_journal() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ServiceConfig::in_dir(dir.path());
        let svc = SchedulingService::open(&cfg, base()).unwrap();
        let range = DateWindow::new(d("2020-03-02"), d("2020-03-08")).unwrap();
        let (_, cells) = svc.heatmap(&"PICUs".into(), &"s1".into(), range).unwrap();
        assert_eq!(cells.len(), 7);
        assert!(cells.iter().all(|c| c.bucket == 0));
        let a = svc.recommend(&request("a", 100), Some(3)).unwrap();
        let b = svc.recommend(&request("a", 100), Some(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(std::fs::metadata(&cfg.journal_path).unwrap().len(), 0);
    }
}
