use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::model::{write_journal_line, Booking, LedgerSnapshot, ScheduleState};

use super::ServiceError;

/// Append-only booking journal plus periodic snapshots.
///
/// A booking is acknowledged only after its journal line is synced. Every
/// `snapshot_every` bookings the ledger is written to a temp file, synced and
/// renamed over the snapshot, and only then is the journal emptied.
pub struct Store {
    journal_path: PathBuf,
    snapshot_path: PathBuf,
    journal: File,
    since_snapshot: u64,
    snapshot_every: u64,
}

/// Journal entries plus the byte length of the intact prefix.
fn read_entries(path: &Path) -> Result<(Vec<Booking>, u64), ServiceError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut entries = Vec::new();
    let mut good = 0u64;
    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        // read_line only returns an unterminated line at EOF; such a tail was
        // never acknowledged
        if !line.ends_with('\n') {
            break;
        }
        if !line.trim().is_empty() {
            let b = serde_json::from_str::<Booking>(line.trim_end())
                .map_err(|e| ServiceError::Corrupt(format!("{} line {line_no}: {e}", path.display())))?;
            entries.push(b);
        }
        good += n as u64;
    }
    Ok((entries, good))
}

pub fn read_snapshot(path: &Path) -> Result<Option<LedgerSnapshot>, ServiceError> {
    match File::open(path) {
        Ok(mut f) => {
            let mut text = String::new();
            f.read_to_string(&mut text)?;
            Ok(Some(serde_json::from_str(&text)?))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn sync_dir(path: &Path) {
    // directory fsync is best effort; some filesystems refuse it
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
}

pub fn write_snapshot(path: &Path, snap: &LedgerSnapshot) -> Result<(), ServiceError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = File::create(&tmp)?;
        serde_json::to_writer(&mut f, snap)?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    sync_dir(path);
    Ok(())
}

/// Ledger rebuilt from whatever is on disk: the snapshot (or `base` when there
/// is none) plus journal entries newer than it.
pub fn recover(journal: &Path, snapshot: &Path, base: ScheduleState) -> Result<ScheduleState, ServiceError> {
    let mut state = match read_snapshot(snapshot)? {
        Some(s) => ScheduleState::from_snapshot(s),
        None => base,
    };
    let (entries, _) = read_entries(journal)?;
    let covered = state.last_sequence();
    for b in entries.into_iter().filter(|b| b.sequence_number > covered) {
        state
            .apply_booking(b)
            .map_err(|e| ServiceError::Corrupt(format!("journal replay: {e}")))?;
    }
    Ok(state)
}

impl Store {
    /// Opens or creates the files. `base` seeds the ledger only when no
    /// snapshot exists yet; it is then written as the first snapshot.
    pub fn open(
        journal_path: &Path,
        snapshot_path: &Path,
        base: ScheduleState,
        snapshot_every: u64,
    ) -> Result<(Store, ScheduleState), ServiceError> {
        if read_snapshot(snapshot_path)?.is_none() {
            write_snapshot(snapshot_path, &base.to_snapshot())?;
        }
        let mut state = recover(journal_path, snapshot_path, ScheduleState::new())?;
        let pending = state.journal().len() as u64;
        state.clear_journal();
        let (_, good) = read_entries(journal_path)?;

        let journal = OpenOptions::new().create(true).append(true).open(journal_path)?;
        if journal.metadata()?.len() > good {
            journal.set_len(good)?;
            journal.sync_all()?;
        }
        Ok((
            Store {
                journal_path: journal_path.to_path_buf(),
                snapshot_path: snapshot_path.to_path_buf(),
                journal,
                since_snapshot: pending,
                snapshot_every: snapshot_every.max(1),
            },
            state,
        ))
    }

    pub fn append(&mut self, booking: &Booking) -> Result<(), ServiceError> {
        let mut line = Vec::with_capacity(256);
        write_journal_line(&mut line, booking)?;
        self.journal.write_all(&line)?;
        self.journal.sync_data()?;
        self.since_snapshot += 1;
        Ok(())
    }

    pub fn snapshot_due(&self) -> bool {
        self.since_snapshot >= self.snapshot_every
    }

    pub fn snapshot(&mut self, state: &ScheduleState) -> Result<(), ServiceError> {
        write_snapshot(&self.snapshot_path, &state.to_snapshot())?;
        self.journal.set_len(0)?;
        self.journal.sync_all()?;
        self.since_snapshot = 0;
        Ok(())
    }

    pub fn journal_path(&self) -> &Path {
        &self.journal_path
    }

    pub fn snapshot_path(&self) -> &Path {
        &self.snapshot_path
    }
}
