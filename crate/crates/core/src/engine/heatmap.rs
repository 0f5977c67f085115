use serde::{Deserialize, Serialize};

use crate::model::{DateWindow, Day, Hours, ScheduleState, SurgeonId, UnitId};

/// Strictly increasing admission counts at which the color bucket steps up.
/// A day's bucket is the number of thresholds at or below its count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Thresholds(Vec<u32>);

impl Thresholds {
    pub fn new(values: Vec<u32>) -> Result<Self, String> {
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("thresholds must be strictly increasing: {values:?}"));
        }
        Ok(Thresholds(values))
    }

    pub fn values(&self) -> &[u32] {
        &self.0
    }

    pub fn bucket(&self, admissions: u32) -> usize {
        self.0.iter().take_while(|t| **t <= admissions).count()
    }

    /// Index of the top (worst) bucket.
    pub fn max_bucket(&self) -> usize {
        self.0.len()
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds(vec![2, 4, 6])
    }
}

impl TryFrom<Vec<u32>> for Thresholds {
    type Error = String;

    fn try_from(v: Vec<u32>) -> Result<Self, Self::Error> {
        Thresholds::new(v)
    }
}

impl From<Thresholds> for Vec<u32> {
    fn from(t: Thresholds) -> Self {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub day: Day,
    pub admissions: u32,
    pub remaining_hours: Hours,
    pub bucket: usize,
}

impl HeatmapCell {
    pub fn at(state: &ScheduleState, day: Day, unit: &UnitId, surgeon: &SurgeonId, thresholds: &Thresholds) -> Self {
        let admissions = state.admissions(day, unit);
        HeatmapCell {
            day,
            admissions,
            remaining_hours: state.hours(day, surgeon),
            bucket: thresholds.bucket(admissions),
        }
    }
}

/// One cell per day of `range`.
pub fn heatmap(
    state: &ScheduleState,
    unit: &UnitId,
    surgeon: &SurgeonId,
    range: DateWindow,
    thresholds: &Thresholds,
) -> Vec<HeatmapCell> {
    range
        .days()
        .map(|d| HeatmapCell::at(state, d, unit, surgeon, thresholds))
        .collect()
}
