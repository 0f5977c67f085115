use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{parse_timestamp, IngestError, Table};
use crate::model::{Day, Hours, PatientId, SurgeonId, UnitId};

pub const CENSUS_CSN: &str = "Primary CSN";
pub const CENSUS_DEPT: &str = "Dept Abbrev";
pub const CENSUS_EFFECTIVE: &str = "Effective Date/Time";
pub const CENSUS_ADMISSION: &str = "Hospital Admission Dt/Tm";
pub const CENSUS_DISCHARGE: &str = "Hospital Discharge Dt/Tm";
pub const CENSUS_SERVICE: &str = "Service";
pub const CENSUS_ADMIT_TYPE: &str = "Admit Type";
pub const CENSUS_ADMIT_SOURCE: &str = "Admit Source";

pub const PROC_CSN: &str = "Primary CSN";
pub const PROC_SURGEON: &str = "Primary Surgeon ID";
pub const PROC_LOCATION: &str = "Location";
pub const PROC_SCHEDULED_ON: &str = "Originally Scheduled On";
pub const PROC_SCHEDULED_FOR: &str = "Originally Scheduled For";
pub const PROC_IN_ROOM: &str = "Patient in Room";
pub const PROC_OUT_ROOM: &str = "Patient out of Room";
pub const PROC_CLASS: &str = "Patient Class";
pub const PROC_SERVICE: &str = "Service";
pub const PROC_PROCEDURE_ID: &str = "Primary Procedure ID";

pub const AVAIL_DATE: &str = "Date";
pub const AVAIL_SURGEON: &str = "Primary Surgeon ID";
pub const AVAIL_SERVICE: &str = "Service";
pub const AVAIL_HOURS: &str = "Available Hours";

pub const CENSUS_HEADER: [&str; 8] = [
    CENSUS_CSN,
    CENSUS_DEPT,
    CENSUS_EFFECTIVE,
    CENSUS_ADMISSION,
    CENSUS_DISCHARGE,
    CENSUS_SERVICE,
    CENSUS_ADMIT_TYPE,
    CENSUS_ADMIT_SOURCE,
];

pub const PROCEDURE_HEADER: [&str; 10] = [
    PROC_CSN,
    PROC_SURGEON,
    PROC_LOCATION,
    PROC_SCHEDULED_ON,
    PROC_SCHEDULED_FOR,
    PROC_IN_ROOM,
    PROC_OUT_ROOM,
    PROC_CLASS,
    PROC_SERVICE,
    PROC_PROCEDURE_ID,
];

pub const AVAILABILITY_HEADER: [&str; 4] = [AVAIL_DATE, AVAIL_SURGEON, AVAIL_SERVICE, AVAIL_HOURS];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub primary_csn: PatientId,
    pub dept: UnitId,
    pub effective_datetime: NaiveDateTime,
    pub admission_datetime: NaiveDateTime,
    pub discharge_datetime: Option<NaiveDateTime>,
    pub service: Option<String>,
    pub admit_type: Option<String>,
    pub admit_source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureRow {
    pub primary_csn: PatientId,
    pub primary_surgeon_id: SurgeonId,
    pub location: UnitId,
    pub scheduled_on: NaiveDateTime,
    pub scheduled_for: NaiveDateTime,
    pub patient_in_room: NaiveDateTime,
    pub patient_out_of_room: NaiveDateTime,
    pub patient_class: Option<String>,
    pub service: Option<String>,
    pub procedure_id: Option<String>,
}

impl ProcedureRow {
    pub fn in_room_minutes(&self) -> i64 {
        (self.patient_out_of_room - self.patient_in_room).num_minutes()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeonAvailabilityRow {
    pub date: Day,
    pub primary_surgeon_id: SurgeonId,
    pub service: String,
    pub available_hours: Hours,
}

/// A data row that could not be used, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub table: Table,
    pub line: u64,
    pub primary_csn: Option<PatientId>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Tables {
    pub census: Vec<CensusRow>,
    pub procedures: Vec<ProcedureRow>,
    pub availability: Option<Vec<SurgeonAvailabilityRow>>,
    pub rejects: Vec<Reject>,
}

struct Columns {
    table: Table,
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(table: Table, headers: &csv::StringRecord, required: &[&str]) -> Result<Self, IngestError> {
        let index: HashMap<String, usize> = headers.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
        if let Some(missing) = required.iter().find(|c| !index.contains_key(**c)) {
            return Err(IngestError::MalformedHeader {
                table,
                column: missing.to_string(),
            });
        }
        Ok(Columns { table, index })
    }

    fn get<'r>(&self, rec: &'r csv::StringRecord, col: &str) -> Option<&'r str> {
        self.index
            .get(col)
            .and_then(|i| rec.get(*i))
            .map(str::trim)
            .filter(|s| !s.is_empty())
    }

    fn timestamp(&self, rec: &csv::StringRecord, col: &str, line: u64) -> Result<Option<NaiveDateTime>, IngestError> {
        match self.get(rec, col) {
            None => Ok(None),
            Some(raw) => parse_timestamp(raw).map(Some).ok_or_else(|| IngestError::UnparseableTimestamp {
                table: self.table,
                line,
                column: col.to_string(),
                value: raw.to_string(),
            }),
        }
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn first_missing<'a>(cols: &Columns, rec: &csv::StringRecord, required: &[&'a str]) -> Option<&'a str> {
    required.iter().copied().find(|c| cols.get(rec, c).is_none())
}

const CENSUS_REQUIRED: [&str; 4] = [CENSUS_CSN, CENSUS_DEPT, CENSUS_EFFECTIVE, CENSUS_ADMISSION];
const PROC_REQUIRED: [&str; 7] = [
    PROC_CSN,
    PROC_SURGEON,
    PROC_LOCATION,
    PROC_SCHEDULED_ON,
    PROC_SCHEDULED_FOR,
    PROC_IN_ROOM,
    PROC_OUT_ROOM,
];

pub fn parse_census<R: Read>(input: R, rejects: &mut Vec<Reject>) -> Result<Vec<CensusRow>, IngestError> {
    let mut rdr = reader(input);
    let cols = Columns::new(Table::Census, rdr.headers()?, &CENSUS_REQUIRED)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if let Some(col) = first_missing(&cols, &rec, &CENSUS_REQUIRED) {
            rejects.push(Reject {
                table: Table::Census,
                line,
                primary_csn: cols.get(&rec, CENSUS_CSN).map(PatientId::from),
                reason: format!("missing {col}"),
            });
            continue;
        }
        let text = |c: &str| cols.get(&rec, c).map(str::to_string);
        rows.push(CensusRow {
            primary_csn: PatientId::from(cols.get(&rec, CENSUS_CSN).unwrap_or_default()),
            dept: UnitId::from(cols.get(&rec, CENSUS_DEPT).unwrap_or_default()),
            effective_datetime: cols.timestamp(&rec, CENSUS_EFFECTIVE, line)?.unwrap_or_default(),
            admission_datetime: cols.timestamp(&rec, CENSUS_ADMISSION, line)?.unwrap_or_default(),
            discharge_datetime: cols.timestamp(&rec, CENSUS_DISCHARGE, line)?,
            service: text(CENSUS_SERVICE),
            admit_type: text(CENSUS_ADMIT_TYPE),
            admit_source: text(CENSUS_ADMIT_SOURCE),
        });
    }
    Ok(rows)
}

pub fn parse_procedures<R: Read>(input: R, rejects: &mut Vec<Reject>) -> Result<Vec<ProcedureRow>, IngestError> {
    let mut rdr = reader(input);
    let cols = Columns::new(Table::Procedure, rdr.headers()?, &PROC_REQUIRED)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let csn = cols.get(&rec, PROC_CSN).map(PatientId::from);
        if let Some(col) = first_missing(&cols, &rec, &PROC_REQUIRED) {
            rejects.push(Reject {
                table: Table::Procedure,
                line,
                primary_csn: csn,
                reason: format!("missing {col}"),
            });
            continue;
        }
        let ts = |c: &str| -> Result<NaiveDateTime, IngestError> { Ok(cols.timestamp(&rec, c, line)?.unwrap_or_default()) };
        let text = |c: &str| cols.get(&rec, c).map(str::to_string);
        let row = ProcedureRow {
            primary_csn: csn.unwrap_or_else(|| PatientId::new("")),
            primary_surgeon_id: SurgeonId::from(cols.get(&rec, PROC_SURGEON).unwrap_or_default()),
            location: UnitId::from(cols.get(&rec, PROC_LOCATION).unwrap_or_default()),
            scheduled_on: ts(PROC_SCHEDULED_ON)?,
            scheduled_for: ts(PROC_SCHEDULED_FOR)?,
            patient_in_room: ts(PROC_IN_ROOM)?,
            patient_out_of_room: ts(PROC_OUT_ROOM)?,
            patient_class: text(PROC_CLASS),
            service: text(PROC_SERVICE),
            procedure_id: text(PROC_PROCEDURE_ID),
        };
        if row.patient_in_room > row.patient_out_of_room {
            rejects.push(Reject {
                table: Table::Procedure,
                line,
                primary_csn: Some(row.primary_csn),
                reason: format!("{PROC_IN_ROOM} is after {PROC_OUT_ROOM}"),
            });
            continue;
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_availability<R: Read>(
    input: R,
    rejects: &mut Vec<Reject>,
) -> Result<Vec<SurgeonAvailabilityRow>, IngestError> {
    let mut rdr = reader(input);
    let cols = Columns::new(Table::Availability, rdr.headers()?, &AVAILABILITY_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let mut reject = |reason: String| {
            rejects.push(Reject {
                table: Table::Availability,
                line,
                primary_csn: None,
                reason,
            })
        };
        if let Some(col) = first_missing(&cols, &rec, &[AVAIL_DATE, AVAIL_SURGEON, AVAIL_HOURS]) {
            reject(format!("missing {col}"));
            continue;
        }
        let raw_date = cols.get(&rec, AVAIL_DATE).unwrap_or_default();
        let date = match parse_timestamp(raw_date) {
            Some(ts) => Day::from(ts.date()),
            None => {
                return Err(IngestError::UnparseableTimestamp {
                    table: Table::Availability,
                    line,
                    column: AVAIL_DATE.to_string(),
                    value: raw_date.to_string(),
                })
            }
        };
        let raw_hours = cols.get(&rec, AVAIL_HOURS).unwrap_or_default();
        let Ok(hours) = raw_hours.parse::<Hours>() else {
            reject(format!("invalid {AVAIL_HOURS}: {raw_hours}"));
            continue;
        };
        rows.push(SurgeonAvailabilityRow {
            date,
            primary_surgeon_id: SurgeonId::from(cols.get(&rec, AVAIL_SURGEON).unwrap_or_default()),
            service: cols.get(&rec, AVAIL_SERVICE).unwrap_or_default().to_string(),
            available_hours: hours,
        });
    }
    Ok(rows)
}

/// Parses the census and procedure tables and, when given, surgeon availability.
pub fn parse_tables<C: Read, P: Read, A: Read>(
    census: C,
    procedures: P,
    availability: Option<A>,
) -> Result<Tables, IngestError> {
    let mut rejects = Vec::new();
    let census = parse_census(census, &mut rejects)?;
    let procedures = parse_procedures(procedures, &mut rejects)?;
    let availability = availability.map(|a| parse_availability(a, &mut rejects)).transpose()?;
    Ok(Tables {
        census,
        procedures,
        availability,
        rejects,
    })
}

fn fmt_ts(ts: &NaiveDateTime) -> String {
    ts.format("%Y-%m-%d %H:%M:%S").to_string()
}

fn opt_ts(ts: &Option<NaiveDateTime>) -> String {
    ts.as_ref().map(fmt_ts).unwrap_or_default()
}

pub fn write_census<W: Write>(out: W, rows: &[CensusRow]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CENSUS_HEADER)?;
    for r in rows {
        w.write_record([
            r.primary_csn.as_str(),
            r.dept.as_str(),
            &fmt_ts(&r.effective_datetime),
            &fmt_ts(&r.admission_datetime),
            &opt_ts(&r.discharge_datetime),
            r.service.as_deref().unwrap_or(""),
            r.admit_type.as_deref().unwrap_or(""),
            r.admit_source.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_procedures<W: Write>(out: W, rows: &[ProcedureRow]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROCEDURE_HEADER)?;
    for r in rows {
        w.write_record([
            r.primary_csn.as_str(),
            r.primary_surgeon_id.as_str(),
            r.location.as_str(),
            &fmt_ts(&r.scheduled_on),
            &fmt_ts(&r.scheduled_for),
            &fmt_ts(&r.patient_in_room),
            &fmt_ts(&r.patient_out_of_room),
            r.patient_class.as_deref().unwrap_or(""),
            r.service.as_deref().unwrap_or(""),
            r.procedure_id.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_availability<W: Write>(out: W, rows: &[SurgeonAvailabilityRow]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AVAILABILITY_HEADER)?;
    for r in rows {
        w.write_record([
            r.date.to_string(),
            r.primary_surgeon_id.to_string(),
            r.service.clone(),
            r.available_hours.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
