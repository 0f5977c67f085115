use serde::{Deserialize, Serialize};

use super::{Day, ModelError};

/// An inclusive day range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct DateWindow {
    start: Day,
    end: Day,
}

impl DateWindow {
    pub fn new(start: Day, end: Day) -> Result<Self, ModelError> {
        if start > end {
            return Err(ModelError::InvalidWindow { start, end });
        }
        Ok(DateWindow { start, end })
    }

    pub fn single(day: Day) -> Self {
        DateWindow { start: day, end: day }
    }

    pub fn start(&self) -> Day {
        self.start
    }

    pub fn end(&self) -> Day {
        self.end
    }

    pub fn contains(&self, day: Day) -> bool {
        self.start <= day && day <= self.end
    }

    /// Number of days covered, both endpoints included.
    pub fn len_days(&self) -> i64 {
        self.end - self.start + 1
    }

    pub fn days(&self) -> impl Iterator<Item = Day> {
        self.start.iter_to(self.end)
    }

    pub fn intersect(&self, other: &DateWindow) -> Option<DateWindow> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start <= end).then_some(DateWindow { start, end })
    }
}

impl<'de> Deserialize<'de> for DateWindow {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            start: Day,
            end: Day,
        }
        let raw = Raw::deserialize(deserializer)?;
        DateWindow::new(raw.start, raw.end).map_err(serde::de::Error::custom)
    }
}

/// Intersection of two windows; `None` when they are disjoint.
pub fn window_intersect(a: &DateWindow, b: &DateWindow) -> Option<DateWindow> {
    a.intersect(b)
}
