use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::model::{PatientId, UnitId};

/// Event kinds in the order they pop at equal timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Arrival,
    TransferIn,
    ReadyToTransfer,
    Discharge,
}

/// One simulated patient-flow event. Serialized form is the event log line
/// `{kind, time, patient, unit}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub kind: EventKind,
    pub time: NaiveDateTime,
    #[serde(rename = "patient")]
    pub patient_id: PatientId,
    #[serde(rename = "unit")]
    pub unit_id: Option<UnitId>,
    /// Position in the patient's unit list for TRANSFER_IN/READY_TO_TRANSFER.
    #[serde(skip)]
    pub stage: usize,
    /// Insertion order, assigned by the queue.
    #[serde(skip)]
    pub seq: u64,
}

impl SimEvent {
    pub fn new(kind: EventKind, time: NaiveDateTime, patient_id: PatientId, unit_id: Option<UnitId>, stage: usize) -> Self {
        SimEvent {
            kind,
            time,
            patient_id,
            unit_id,
            stage,
            seq: 0,
        }
    }
}

struct Queued {
    event: SimEvent,
    owner: usize,
}

impl Queued {
    fn key(&self) -> (NaiveDateTime, EventKind, u64) {
        (self.event.time, self.event.kind, self.event.seq)
    }
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Min-queue on `(time, kind, insertion order)`.
///
/// Each entry carries an owner index (the patient it belongs to) so the
/// simulator can find the profile without a lookup table.
#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Queued>>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, mut event: SimEvent, owner: usize) {
        event.seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Queued { event, owner }));
    }

    pub fn pop(&mut self) -> Option<(SimEvent, usize)> {
        self.heap.pop().map(|Reverse(q)| (q.event, q.owner))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
