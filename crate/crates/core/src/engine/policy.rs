use crate::model::{CaseRequest, Day, ScheduleState};

/// Orders feasible days best-first.
///
/// Implementations must return a permutation of a subset of `candidates` and
/// be deterministic for fixed inputs. Remaining ties go to the earliest day.
pub trait RankingPolicy: Send + Sync {
    fn name(&self) -> &str;

    fn rank(&self, state: &ScheduleState, request: &CaseRequest, candidates: &[Day]) -> Vec<Day>;
}

/// Fewest admissions to the post-op unit, then earliest. With `n = 1` this is
/// the greedy recommendation.
#[derive(Debug, Clone, Copy, Default)]
pub struct FewestAdmissions;

impl RankingPolicy for FewestAdmissions {
    fn name(&self) -> &str {
        "fewest-admissions"
    }

    fn rank(&self, state: &ScheduleState, request: &CaseRequest, candidates: &[Day]) -> Vec<Day> {
        let mut days = candidates.to_vec();
        days.sort_by_key(|d| (state.admissions(*d, &request.post_op_unit), *d));
        days.dedup();
        days
    }
}

/// First feasible day; the no-level-loading baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct EarliestFeasible;

impl RankingPolicy for EarliestFeasible {
    fn name(&self) -> &str {
        "earliest"
    }

    fn rank(&self, _state: &ScheduleState, _request: &CaseRequest, candidates: &[Day]) -> Vec<Day> {
        let mut days = candidates.to_vec();
        days.sort();
        days.dedup();
        days
    }
}

/// Scores `admissions + wait_weight * days_from_window_start` (lower is better).
#[derive(Debug, Clone, Copy)]
pub struct WeightedWait {
    pub wait_weight: f64,
}

impl RankingPolicy for WeightedWait {
    fn name(&self) -> &str {
        "weighted-wait"
    }

    fn rank(&self, state: &ScheduleState, request: &CaseRequest, candidates: &[Day]) -> Vec<Day> {
        let origin = request
            .search_window()
            .map(|w| w.start())
            .or_else(|| candidates.iter().min().copied());
        let mut scored: Vec<(f64, Day)> = candidates
            .iter()
            .map(|d| {
                let wait = origin.map(|o| (*d - o) as f64).unwrap_or(0.0);
                let n = f64::from(state.admissions(*d, &request.post_op_unit));
                (n + self.wait_weight * wait, *d)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut days: Vec<Day> = scored.into_iter().map(|(_, d)| d).collect();
        days.dedup();
        days
    }
}

/// Looks up a shipped policy by its name.
pub fn policy_by_name(name: &str) -> Option<Box<dyn RankingPolicy>> {
    match name {
        "fewest-admissions" | "greedy" => Some(Box::new(FewestAdmissions)),
        "earliest" => Some(Box::new(EarliestFeasible)),
        "weighted-wait" => Some(Box::new(WeightedWait { wait_weight: 0.1 })),
        _ => None,
    }
}
