//! `beds` command line.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::engine::Thresholds;
use crate::ingest::{
    build_profiles, initial_state, infer_surgeon_availability, parse_availability, parse_tables, read_profiles,
    write_availability, write_census, write_procedures, write_profiles, IngestConfig, IngestError, PatientProfile,
    SurgeonAvailabilityRow,
};
use crate::metrics::{
    admissions_from_sim, build_report, reschedule_histogram, svg_histogram, svg_time_series, write_report_csv,
    daily_admissions, AdmissionRecord, BootstrapParams, ChangeScale, Period, Report,
};
use crate::model::{DateWindow, Day, Hours, ScheduleState, UnitId};
use crate::service::{ServiceConfig, SchedulingService, ServiceError};
use crate::simulator::{
    read_records_csv, run, write_event_log, write_records_csv, LosPerturbation, SchedulerMode, SimConfig, SimError,
    SimRecord,
};
use crate::synth::{generate, SynthConfig, SynthError, UnitStream};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Ingest(IngestError::MalformedHeader { .. }) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "beds", version, about = "Level-loading surgical admission scheduler")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean census/procedure tables into patient profiles.
    Ingest(IngestArgs),
    /// Replay profiles through the patient-flow simulation.
    Simulate(SimulateArgs),
    /// Summary statistics, tests and plots for simulated admissions.
    Report(ReportArgs),
    /// Generate a synthetic census/procedure/availability triple.
    Synth(SynthArgs),
    /// Run the scheduling HTTP service.
    Serve(ServeArgs),
}

fn parse_unit(s: &str) -> std::result::Result<UnitId, String> {
    let s = s.trim();
    if s.is_empty() {
        Err("empty unit name".into())
    } else {
        Ok(UnitId::from(s))
    }
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> std::result::Result<(T, T), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated values")?;
    let p = |x: &str| x.trim().parse::<T>().map_err(|_| format!("cannot parse \"{x}\""));
    Ok((p(a)?, p(b)?))
}

fn parse_keyed<T: std::str::FromStr>(s: &str) -> std::result::Result<(String, T), String> {
    let (k, v) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let v = v.trim().parse::<T>().map_err(|_| format!("cannot parse \"{v}\""))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub census: PathBuf,
    #[arg(long)]
    pub procedures: PathBuf,
    /// Surgeon availability table; inferred from case load when absent.
    #[arg(long)]
    pub availability: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// First simulated day; visits arriving before the warm-up are dropped.
    #[arg(long)]
    pub sim_start: Option<Day>,
    #[arg(long, default_value_t = 365)]
    pub warmup_days: i64,
    /// Explicit warm-up start, overriding sim-start minus warm-up days.
    #[arg(long)]
    pub warmup_start: Option<Day>,
    /// Units kept in scope.
    #[arg(long, value_parser = parse_unit, value_delimiter = ',', default_value = "PICUs,PCUs,MAIN OR")]
    pub units: Vec<UnitId>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Inferred availability: minimum daily case hours (exclusive).
    #[arg(long, default_value = "2")]
    pub infer_threshold: Hours,
    /// Inferred availability: hours granted on such days.
    #[arg(long, default_value = "7")]
    pub infer_block: Hours,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Historical,
    Beds,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long)]
    pub availability: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Historical)]
    pub mode: ModeArg,
    /// BEDS schedules arrivals on or after this day.
    #[arg(long)]
    pub beds_start: Option<Day>,
    #[arg(long, value_parser = parse_unit, value_delimiter = ',', default_value = "PICUs,PCUs")]
    pub units: Vec<UnitId>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiply each LOS by a uniform factor in [1-f, 1+f].
    #[arg(long)]
    pub los_perturbation: Option<f64>,
    /// Do not charge surgeon hours for patients kept on their recorded day.
    #[arg(long)]
    pub no_historical_hours: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Simulation records, `NAME=PATH` (records.ndjson or records.csv). Repeatable.
    #[arg(long = "records", value_parser = parse_keyed::<PathBuf>, required = true)]
    pub records: Vec<(String, PathBuf)>,
    /// Profiles supplying elective flags for CSV records.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long, value_parser = parse_unit, value_delimiter = ',', default_value = "PICUs,PCUs")]
    pub unit: Vec<UnitId>,
    /// `NAME=START..END`. Repeatable; defaults to the span of the records.
    #[arg(long = "period", value_parser = parse_period)]
    pub periods: Vec<(String, DateWindow)>,
    /// Include Monday..Friday rows.
    #[arg(long)]
    pub weekdays: bool,
    /// `DELTA,M,SEED`
    #[arg(long, value_parser = parse_bootstrap)]
    pub bootstrap: Option<(f64, usize, u64)>,
    /// Test absolute instead of relative change in QMRA.
    #[arg(long)]
    pub absolute: bool,
    /// `LO,HI`
    #[arg(long, value_parser = parse_pair::<u32>, default_value = "2,5")]
    pub outliers: (u32, u32),
    /// Count every admission, not just elective post-op ones.
    #[arg(long)]
    pub all_admissions: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    pub plots: bool,
}

fn parse_period(s: &str) -> std::result::Result<(String, DateWindow), String> {
    let (name, range) = s.split_once('=').ok_or("expected NAME=START..END")?;
    let (a, b) = range.split_once("..").ok_or("expected START..END")?;
    let day = |x: &str| x.trim().parse::<Day>().map_err(|e| e.to_string());
    let w = DateWindow::new(day(a)?, day(b)?).map_err(|e| e.to_string())?;
    Ok((name.trim().to_string(), w))
}

fn parse_bootstrap(s: &str) -> std::result::Result<(f64, usize, u64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [d, m, seed] = parts[..] else {
        return Err("expected DELTA,M,SEED".into());
    };
    Ok((
        d.parse().map_err(|_| format!("bad delta \"{d}\""))?,
        m.parse().map_err(|_| format!("bad sample count \"{m}\""))?,
        seed.parse().map_err(|_| format!("bad seed \"{seed}\""))?,
    ))
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "2019-01-01")]
    pub start: Day,
    #[arg(long, default_value_t = 730)]
    pub days: i64,
    /// Elective arrivals per day for a post-op unit, `UNIT=RATE`. Repeatable;
    /// any use replaces the default PICUs/PCUs streams.
    #[arg(long = "rate", value_parser = parse_keyed::<f64>)]
    pub rates: Vec<(String, f64)>,
    /// Median post-op nights, `UNIT=NIGHTS`.
    #[arg(long = "los", value_parser = parse_keyed::<f64>)]
    pub los: Vec<(String, f64)>,
    #[arg(long, default_value_t = 0.6)]
    pub los_sigma: f64,
    #[arg(long, default_value_t = 14.0)]
    pub lead_mean: f64,
    #[arg(long, default_value_t = 12)]
    pub surgeons: usize,
    #[arg(long, default_value_t = 2)]
    pub block_days: usize,
    /// Monday..Friday block popularity.
    #[arg(long, value_delimiter = ',', default_value = "4,3,2,1,1")]
    pub block_weights: Vec<f64>,
    #[arg(long, default_value_t = 7.0)]
    pub daily_hours: f64,
    #[arg(long, default_value_t = 0.3)]
    pub urgent_rate: f64,
    #[arg(long, default_value_t = 1.5)]
    pub outpatient_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    pub medical_rate: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Directory for the journal and snapshot.
    #[arg(long, default_value = "beds-data")]
    pub dir: PathBuf,
    #[arg(long)]
    pub journal: Option<PathBuf>,
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Profiles used to seed the ledger on first start.
    #[arg(long)]
    pub load: Option<PathBuf>,
    /// Surgeon availability for the seeded ledger.
    #[arg(long)]
    pub availability: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
    pub thresholds: Vec<u32>,
    #[arg(long, default_value_t = 5)]
    pub top_n: usize,
    #[arg(long, default_value_t = crate::engine::DEFAULT_HORIZON_CAP_DAYS)]
    pub horizon_cap: i64,
    #[arg(long, default_value_t = crate::service::DEFAULT_SNAPSHOT_EVERY)]
    pub snapshot_every: u64,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_availability(path: &Path) -> Result<Vec<SurgeonAvailabilityRow>> {
    let mut rejects = Vec::new();
    let rows = parse_availability(open(path)?, &mut rejects)?;
    if let Some(r) = rejects.first() {
        eprintln!("warning: {} availability rows skipped (line {}: {})", rejects.len(), r.line, r.reason);
    }
    Ok(rows)
}

fn read_profiles_file(path: &Path) -> Result<Vec<PatientProfile>> {
    Ok(read_profiles(open(path)?)?)
}

pub fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let tables = parse_tables(open(&a.census)?, open(&a.procedures)?, a.availability.as_deref().map(open).transpose()?)?;
    let cfg = IngestConfig {
        sim_start: a.sim_start,
        warmup_start: a.warmup_start,
        warmup_days: a.warmup_days,
        scope_units: a.units.iter().cloned().collect(),
        alpha: a.alpha,
    };
    let (profiles, report) = build_profiles(&tables, &cfg);
    fs::create_dir_all(&a.out)?;

    let mut w = create(&a.out.join("profiles.ndjson"))?;
    write_profiles(&mut w, &profiles)?;
    w.flush()?;
    write_json(&a.out.join("cleaning_report.json"), &report)?;
    write_json(&a.out.join("rejects.json"), &tables.rejects)?;

    let (availability, inferred) = match tables.availability {
        Some(rows) => (rows, false),
        None => (infer_surgeon_availability(&tables.procedures, a.infer_threshold, a.infer_block), true),
    };
    let mut w = create(&a.out.join("availability.csv"))?;
    write_availability(&mut w, &availability)?;
    w.flush()?;

    println!(
        "{} profiles from {} visits ({} excluded, {} rejected rows); availability {} ({} rows)",
        report.profiles,
        report.input_patients,
        report.excluded(),
        tables.rejects.len(),
        if inferred { "inferred" } else { "given" },
        availability.len()
    );
    Ok(())
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let profiles = read_profiles_file(&a.profiles)?;
    let availability = read_availability(&a.availability)?;
    let mut cfg = match a.mode {
        ModeArg::Historical => SimConfig::historical(),
        ModeArg::Beds => {
            let start = a
                .beds_start
                .or_else(|| profiles.iter().map(|p| p.arrival_day()).min())
                .ok_or_else(|| CliError::Usage("--beds-start is required with no profiles".into()))?;
            SimConfig::beds(start, a.units.iter().cloned())
        }
    };
    cfg.alpha = a.alpha;
    cfg.rng_seed = a.seed;
    cfg.consume_historical_hours = !a.no_historical_hours;
    if let Some(f) = a.los_perturbation {
        cfg.los_perturbation = LosPerturbation::BoundedUniform(f);
    }
    if let Err(SimError::Config(m)) = cfg.validate() {
        return Err(CliError::Usage(m));
    }
    let out = run(&profiles, &availability, &cfg)?;
    fs::create_dir_all(&a.out)?;

    let mut w = create(&a.out.join("events.ndjson"))?;
    write_event_log(&mut w, &out.events)?;
    w.flush()?;
    let mut w = create(&a.out.join("records.csv"))?;
    write_records_csv(&mut w, &out.records)?;
    w.flush()?;
    let mut w = create(&a.out.join("records.ndjson"))?;
    for r in &out.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    write_json(&a.out.join("stats.json"), &out.stats)?;

    let mode = match cfg.mode {
        SchedulerMode::Historical => "historical",
        SchedulerMode::Beds => "beds",
    };
    println!(
        "{mode}: {} patients, {} events, {} scheduled by BEDS ({} moved), {} fallbacks",
        out.stats.patients,
        out.events.len(),
        out.stats.beds_scheduled,
        out.stats.moved,
        out.stats.fallbacks
    );
    Ok(())
}

struct LoadedRecords {
    admissions: Vec<AdmissionRecord>,
    sim: Option<Vec<SimRecord>>,
}

fn load_records(path: &Path, elective: &Option<BTreeMap<String, bool>>) -> Result<LoadedRecords> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let rows = read_records_csv(open(path)?)?;
        let admissions = rows
            .into_iter()
            .map(|r| AdmissionRecord {
                elective: elective
                    .as_ref()
                    .map(|m| m.get(r.primary_csn.as_str()).copied().unwrap_or(false))
                    .unwrap_or(true),
                patient: r.primary_csn,
                day: r.simulated_day,
                unit: r.unit,
                post_op: true,
            })
            .collect();
        return Ok(LoadedRecords { admissions, sim: None });
    }
    let mut sim = Vec::new();
    for (i, line) in io::BufRead::lines(open(path)?).enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: SimRecord = serde_json::from_str(&line)
            .map_err(|e| CliError::Usage(format!("{} line {}: {e}", path.display(), i + 1)))?;
        sim.push(r);
    }
    Ok(LoadedRecords {
        admissions: admissions_from_sim(&sim),
        sim: Some(sim),
    })
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let elective = match &a.profiles {
        Some(p) => Some(
            read_profiles_file(p)?
                .iter()
                .map(|p| (p.primary_csn.to_string(), crate::ingest::classify_elective(p)))
                .collect(),
        ),
        None => None,
    };
    let mut sets = Vec::new();
    for (name, path) in &a.records {
        sets.push((name.clone(), load_records(path, &elective)?));
    }
    let periods: Vec<(String, DateWindow)> = if a.periods.is_empty() {
        let days = sets.iter().flat_map(|(_, s)| s.admissions.iter().map(|r| r.day));
        let (lo, hi) = days.fold((None::<Day>, None::<Day>), |(lo, hi), d| {
            (Some(lo.map_or(d, |x| x.min(d))), Some(hi.map_or(d, |x| x.max(d))))
        });
        match (lo, hi) {
            (Some(lo), Some(hi)) => vec![("all".into(), DateWindow::new(lo, hi).expect("ordered"))],
            _ => return Err(CliError::Usage("records contain no admissions".into())),
        }
    } else {
        a.periods.clone()
    };

    let mut named = Vec::new();
    for (set_name, set) in &sets {
        for (period_name, range) in &periods {
            let name = match (sets.len(), periods.len()) {
                (1, _) => period_name.clone(),
                (_, 1) => set_name.clone(),
                _ => format!("{set_name}/{period_name}"),
            };
            named.push(Period {
                name,
                range: *range,
                records: &set.admissions,
            });
        }
    }
    let params = a.bootstrap.map(|(delta, m, seed)| BootstrapParams {
        delta,
        m,
        seed,
        scale: if a.absolute { ChangeScale::Absolute } else { ChangeScale::Relative },
    });
    let elective_only = !a.all_admissions;
    let mut report: Report = build_report(&named, &a.unit, elective_only, a.outliers, params);
    if !a.weekdays {
        report.rows.retain(|r| r.weekday == "all");
        report.bootstrap.retain(|r| r.weekday == "all");
    }

    fs::create_dir_all(&a.out)?;
    write_json(&a.out.join("report.json"), &report)?;
    let mut w = create(&a.out.join("report.csv"))?;
    write_report_csv(&mut w, &report)?;
    w.flush()?;

    if a.plots {
        for unit in &a.unit {
            let series: Vec<_> = named
                .iter()
                .map(|p| {
                    let mut s = daily_admissions(p.records, unit, elective_only, p.range);
                    s.filter = p.name.clone();
                    s
                })
                .collect();
            let refs: Vec<_> = series.iter().collect();
            let svg = svg_time_series(&refs, &format!("Daily admissions, {unit}"));
            fs::write(a.out.join(format!("admissions_{}.svg", file_slug(unit.as_str()))), svg)?;
        }
        for (name, set) in &sets {
            if let Some(sim) = &set.sim {
                let hist = reschedule_histogram(sim, 1, false);
                let svg = svg_histogram(&hist, &format!("Reschedule delta (days), {name}"));
                fs::write(a.out.join(format!("delta_{}.svg", file_slug(name))), svg)?;
            }
        }
    }

    print_report(&report);
    Ok(())
}

fn file_slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn print_report(r: &Report) {
    println!(
        "{:<20} {:<8} {:<4} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>8}",
        "period", "unit", "day", "n", "mean", "cov", "median", "q90", "qmra", "outliers"
    );
    for row in &r.rows {
        let Some(s) = row.stats else { continue };
        let qmra = s.qmra.map(|q| format!("{q:.3}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<20} {:<8} {:<4} {:>6} {:>7.3} {:>7.3} {:>7.2} {:>7.2} {:>7} {:>8}",
            row.period, row.unit, row.weekday, s.n_days, s.mean, s.cov, s.median, s.q90, qmra, row.outlier_days
        );
    }
    for b in &r.bootstrap {
        match (&b.result, &b.error) {
            (Some(res), _) => println!(
                "bootstrap {} -> {} {} {}: change {:+.3}, p = {:.4} (delta {}, m {})",
                b.before, b.after, b.unit, b.weekday, res.observed_change, res.p_value, res.delta, res.m
            ),
            (None, Some(e)) => println!("bootstrap {} -> {} {} {}: {e}", b.before, b.after, b.unit, b.weekday),
            _ => {}
        }
    }
}

pub fn synth_config(a: &SynthArgs) -> Result<SynthConfig> {
    let defaults = SynthConfig::default();
    let mut streams = defaults.streams.clone();
    if !a.rates.is_empty() {
        let known: BTreeMap<String, UnitStream> =
            streams.into_iter().map(|s| (s.unit.to_string(), s)).collect();
        let chosen: BTreeSet<&String> = a.rates.iter().map(|(u, _)| u).collect();
        streams = a
            .rates
            .iter()
            .map(|(unit, rate)| {
                let mut s = known.get(unit).cloned().unwrap_or(UnitStream {
                    unit: unit.as_str().into(),
                    daily_rate: 0.0,
                    los_median_nights: 3.0,
                    los_sigma: a.los_sigma,
                    step_down_prob: 0.0,
                    step_down_unit: None,
                });
                s.daily_rate = *rate;
                // only step down into a unit that is part of this population
                if s.step_down_unit.as_ref().is_some_and(|d| !chosen.contains(&d.to_string())) {
                    s.step_down_unit = None;
                    s.step_down_prob = 0.0;
                }
                s
            })
            .collect();
    }
    for s in &mut streams {
        s.los_sigma = a.los_sigma;
    }
    for (unit, nights) in &a.los {
        let s = streams
            .iter_mut()
            .find(|s| s.unit.as_str() == unit)
            .ok_or_else(|| CliError::Usage(format!("--los names unknown unit {unit}")))?;
        s.los_median_nights = *nights;
    }
    let weights: [f64; 5] = a
        .block_weights
        .clone()
        .try_into()
        .map_err(|_| CliError::Usage("--block-weights needs five values".into()))?;
    Ok(SynthConfig {
        seed: a.seed,
        start: a.start,
        horizon_days: a.days,
        streams,
        lead_mean_days: a.lead_mean,
        surgeons: a.surgeons,
        block_days_per_surgeon: a.block_days,
        block_weekday_weights: weights,
        daily_hours: a.daily_hours,
        urgent_rate: a.urgent_rate,
        outpatient_rate: a.outpatient_rate,
        medical_rate: a.medical_rate,
        ..defaults
    })
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let cfg = synth_config(a)?;
    let data = generate(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::create_dir_all(&a.out)?;
    let mut w = create(&a.out.join("census.csv"))?;
    write_census(&mut w, &data.census)?;
    w.flush()?;
    let mut w = create(&a.out.join("procedures.csv"))?;
    write_procedures(&mut w, &data.procedures)?;
    w.flush()?;
    let mut w = create(&a.out.join("availability.csv"))?;
    write_availability(&mut w, &data.availability)?;
    w.flush()?;
    write_json(&a.out.join("synth_config.json"), &cfg)?;
    println!(
        "{} census rows, {} procedures, {} availability rows (slack {:.2}x)",
        data.census.len(),
        data.procedures.len(),
        data.availability.len(),
        data.slack()
    );
    Ok(())
}

pub fn cmd_serve(a: &ServeArgs) -> Result<()> {
    let thresholds = Thresholds::new(a.thresholds.clone()).map_err(CliError::Usage)?;
    let mut cfg = ServiceConfig::in_dir(&a.dir);
    cfg.listen = a.listen;
    if let Some(j) = &a.journal {
        cfg.journal_path = j.clone();
    }
    if let Some(s) = &a.snapshot {
        cfg.snapshot_path = s.clone();
    }
    cfg.thresholds = thresholds;
    cfg.default_top_n = a.top_n;
    cfg.horizon_cap_days = a.horizon_cap;
    cfg.snapshot_every = a.snapshot_every;
    if let Err(ServiceError::Config(m)) = cfg.validate() {
        return Err(CliError::Usage(m));
    }

    let base = match &a.load {
        Some(p) => {
            let profiles = read_profiles_file(p)?;
            let availability = match &a.availability {
                Some(av) => read_availability(av)?,
                None => Vec::new(),
            };
            if cfg.snapshot_path.exists() {
                eprintln!("note: {} exists, --load ignored", cfg.snapshot_path.display());
            }
            initial_state(&profiles, &availability)
        }
        None => ScheduleState::new(),
    };
    let svc = Arc::new(SchedulingService::open(&cfg, base)?);

    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(cfg.listen).await?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr} (version {})", svc.version());
        io::stdout().flush()?;
        crate::service::serve(svc, listener).await
    })?;
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => cmd_report(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Serve(a) => cmd_serve(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
