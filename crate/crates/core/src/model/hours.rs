use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// Non-negative decimal hours stored as an integer count of hundredths.
///
/// All comparisons are exact, so `remaining >= duration` ties resolve the same
/// way on every platform. JSON carries hours as plain decimal numbers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hours(i64);

impl Hours {
    pub const ZERO: Hours = Hours(0);

    pub const fn from_centi(centi: i64) -> Hours {
        Hours(centi)
    }

    pub fn centi(self) -> i64 {
        self.0
    }

    /// Rounds to the nearest hundredth of an hour.
    pub fn from_f64(h: f64) -> Result<Hours, ModelError> {
        if !h.is_finite() || h < 0.0 {
            return Err(ModelError::InvalidHours(h.to_string()));
        }
        Ok(Hours((h * 100.0).round() as i64))
    }

    /// Minutes converted to hours, rounded half-up to the nearest hundredth.
    pub fn from_minutes(minutes: i64) -> Hours {
        let minutes = minutes.max(0);
        // centi = minutes * 100 / 60, rounded half-up
        Hours((minutes * 100 * 2 + 60) / 120)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_sub(self, rhs: Hours) -> Option<Hours> {
        (self.0 >= rhs.0).then(|| Hours(self.0 - rhs.0))
    }

    pub fn saturating_sub(self, rhs: Hours) -> Hours {
        Hours((self.0 - rhs.0).max(0))
    }
}

impl Add for Hours {
    type Output = Hours;

    fn add(self, rhs: Hours) -> Hours {
        Hours(self.0 + rhs.0)
    }
}

impl Sub for Hours {
    type Output = Hours;

    fn sub(self, rhs: Hours) -> Hours {
        self.saturating_sub(rhs)
    }
}

impl Sum for Hours {
    fn sum<I: Iterator<Item = Hours>>(iter: I) -> Hours {
        iter.fold(Hours::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Hours {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl FromStr for Hours {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || ModelError::InvalidHours(s.to_string());
        let (whole, frac) = match t.split_once('.') {
            Some((w, f)) => (w, f),
            None => (t, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let w: i64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| bad())? };
        let mut digits = frac.bytes().map(|b| (b - b'0') as i64);
        let d1 = digits.next().unwrap_or(0);
        let d2 = digits.next().unwrap_or(0);
        let d3 = digits.next().unwrap_or(0);
        let round_up = i64::from(d3 >= 5);
        Ok(Hours(w * 100 + d1 * 10 + d2 + round_up))
    }
}

impl Serialize for Hours {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Hours {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Hours::from_f64(v).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
