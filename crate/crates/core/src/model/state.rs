use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Day, Hours, ModelError, PatientId, SurgeonId, UnitId};

/// One accepted booking. Journal lines carry exactly these fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Booking {
    pub patient_id: PatientId,
    pub surgeon_id: SurgeonId,
    pub unit_id: UnitId,
    pub day: Day,
    pub duration_hours: Hours,
    pub sequence_number: u64,
    pub timestamp: DateTime<Utc>,
}

/// The live scheduling ledger.
///
/// `surgeon_hours` holds hours still free per (day, surgeon) and
/// `unit_admissions` the admissions already scheduled per (day, unit). Absent
/// keys read as zero. Every validated mutation goes through
/// [`ScheduleState::apply_booking`] and is appended to `journal`; entries added
/// with the `seed_*` methods form the base ledger the journal is replayed on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScheduleState {
    surgeon_hours: BTreeMap<(Day, SurgeonId), Hours>,
    unit_admissions: BTreeMap<(Day, UnitId), u32>,
    day_attributes: BTreeMap<Day, BTreeMap<String, String>>,
    journal: Vec<Booking>,
    last_sequence: u64,
}

impl ScheduleState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hours(&self, day: Day, surgeon: &SurgeonId) -> Hours {
        self.surgeon_hours.get(&(day, surgeon.clone())).copied().unwrap_or(Hours::ZERO)
    }

    pub fn admissions(&self, day: Day, unit: &UnitId) -> u32 {
        self.unit_admissions.get(&(day, unit.clone())).copied().unwrap_or(0)
    }

    pub fn day_attributes(&self, day: Day) -> Option<&BTreeMap<String, String>> {
        self.day_attributes.get(&day)
    }

    pub fn surgeon_hours(&self) -> impl Iterator<Item = (Day, &SurgeonId, Hours)> {
        self.surgeon_hours.iter().map(|((d, s), h)| (*d, s, *h))
    }

    pub fn unit_admissions(&self) -> impl Iterator<Item = (Day, &UnitId, u32)> {
        self.unit_admissions.iter().map(|((d, u), n)| (*d, u, *n))
    }

    pub fn journal(&self) -> &[Booking] {
        &self.journal
    }

    /// Sequence number of the latest applied booking (0 when none).
    pub fn last_sequence(&self) -> u64 {
        self.last_sequence
    }

    pub fn next_sequence(&self) -> u64 {
        self.last_sequence + 1
    }

    /// Sets a surgeon's free hours on a day, replacing any previous value.
    pub fn seed_hours(&mut self, day: Day, surgeon: SurgeonId, hours: Hours) {
        if hours.is_zero() {
            self.surgeon_hours.remove(&(day, surgeon));
        } else {
            self.surgeon_hours.insert((day, surgeon), hours);
        }
    }

    /// Adds a surgeon's free hours on a day.
    pub fn add_hours(&mut self, day: Day, surgeon: SurgeonId, hours: Hours) {
        let cur = self.hours(day, &surgeon);
        self.seed_hours(day, surgeon, cur + hours);
    }

    pub fn set_day_attribute(&mut self, day: Day, key: impl Into<String>, value: impl Into<String>) {
        self.day_attributes.entry(day).or_default().insert(key.into(), value.into());
    }

    /// Records load that did not pass booking validation (replayed history,
    /// preloaded profiles). Hours floor at zero; nothing is journaled.
    pub fn seed_admission(&mut self, day: Day, surgeon: Option<&SurgeonId>, unit: &UnitId, duration: Hours) {
        if let Some(s) = surgeon {
            let left = self.hours(day, s).saturating_sub(duration);
            self.seed_hours(day, s.clone(), left);
        }
        *self.unit_admissions.entry((day, unit.clone())).or_insert(0) += 1;
    }

    /// Applies a validated booking. On error the state is left untouched.
    pub fn apply_booking(&mut self, booking: Booking) -> Result<(), ModelError> {
        if booking.sequence_number <= self.last_sequence {
            return Err(ModelError::SequenceNotIncreasing {
                last: self.last_sequence,
                got: booking.sequence_number,
            });
        }
        let available = self.hours(booking.day, &booking.surgeon_id);
        let left = available.checked_sub(booking.duration_hours).ok_or_else(|| {
            ModelError::InsufficientHours {
                day: booking.day,
                surgeon: booking.surgeon_id.clone(),
                available,
                requested: booking.duration_hours,
            }
        })?;
        self.seed_hours(booking.day, booking.surgeon_id.clone(), left);
        *self.unit_admissions.entry((booking.day, booking.unit_id.clone())).or_insert(0) += 1;
        self.last_sequence = booking.sequence_number;
        self.journal.push(booking);
        Ok(())
    }

    /// Rebuilds a ledger by applying `bookings` in order on top of `base`.
    pub fn replay<I>(base: ScheduleState, bookings: I) -> Result<ScheduleState, ModelError>
    where
        I: IntoIterator<Item = Booking>,
    {
        let mut state = base;
        for b in bookings {
            state.apply_booking(b)?;
        }
        Ok(state)
    }

    /// True when the two states hold the same hours, counts, attributes and
    /// sequence position, regardless of how much journal each keeps in memory.
    pub fn same_ledger(&self, other: &ScheduleState) -> bool {
        self.surgeon_hours == other.surgeon_hours
            && self.unit_admissions == other.unit_admissions
            && self.day_attributes == other.day_attributes
            && self.last_sequence == other.last_sequence
    }

    /// Drops the in-memory journal (after it has been folded into a snapshot).
    pub fn clear_journal(&mut self) {
        self.journal.clear();
    }

    pub fn to_snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            last_sequence: self.last_sequence,
            surgeon_hours: self
                .surgeon_hours
                .iter()
                .map(|((day, surgeon_id), hours)| HoursEntry {
                    day: *day,
                    surgeon_id: surgeon_id.clone(),
                    hours: *hours,
                })
                .collect(),
            unit_admissions: self
                .unit_admissions
                .iter()
                .map(|((day, unit_id), count)| AdmissionEntry {
                    day: *day,
                    unit_id: unit_id.clone(),
                    count: *count,
                })
                .collect(),
            day_attributes: self.day_attributes.clone(),
        }
    }

    pub fn from_snapshot(snap: LedgerSnapshot) -> ScheduleState {
        let mut state = ScheduleState {
            last_sequence: snap.last_sequence,
            day_attributes: snap.day_attributes,
            ..Default::default()
        };
        for e in snap.surgeon_hours {
            state.seed_hours(e.day, e.surgeon_id, e.hours);
        }
        for e in snap.unit_admissions {
            if e.count > 0 {
                state.unit_admissions.insert((e.day, e.unit_id), e.count);
            }
        }
        state
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoursEntry {
    pub day: Day,
    pub surgeon_id: SurgeonId,
    pub hours: Hours,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionEntry {
    pub day: Day,
    pub unit_id: UnitId,
    pub count: u32,
}

/// Serializable form of a ledger, without its journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub last_sequence: u64,
    pub surgeon_hours: Vec<HoursEntry>,
    pub unit_admissions: Vec<AdmissionEntry>,
    #[serde(default)]
    pub day_attributes: BTreeMap<Day, BTreeMap<String, String>>,
}

/// Writes one booking per line.
pub fn write_journal<W: Write>(mut out: W, bookings: &[Booking]) -> Result<(), ModelError> {
    for b in bookings {
        write_journal_line(&mut out, b)?;
    }
    Ok(())
}

pub fn write_journal_line<W: Write>(out: &mut W, booking: &Booking) -> Result<(), ModelError> {
    serde_json::to_writer(&mut *out, booking)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Reads a newline-delimited booking journal. Blank lines (including a
/// trailing newline) are skipped.
pub fn read_journal<R: BufRead>(input: R) -> Result<Vec<Booking>, ModelError> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let b = serde_json::from_str(&line).map_err(|e| ModelError::JournalLine {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(b);
    }
    Ok(out)
}
