use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    bootstrap_test_with, count_outlier_days, daily_admissions, summarize, weekday_split, AdmissionRecord,
    BootstrapResult, ChangeScale, DailySeries, Histogram, MetricsError, SummaryStats, WEEKDAYS,
};
use crate::model::{DateWindow, UnitId};

/// A named slice of admissions evaluated over a date range.
pub struct Period<'a> {
    pub name: String,
    pub range: DateWindow,
    pub records: &'a [AdmissionRecord],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub period: String,
    pub unit: UnitId,
    /// `all` or a weekday abbreviation.
    pub weekday: String,
    pub stats: Option<SummaryStats>,
    pub outlier_days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub before: String,
    pub after: String,
    pub unit: UnitId,
    pub weekday: String,
    pub result: Option<BootstrapResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub elective_only: bool,
    pub outlier_bounds: (u32, u32),
    pub change_scale: ChangeScale,
    pub rows: Vec<ReportRow>,
    pub bootstrap: Vec<BootstrapRow>,
}

/// Bootstrap parameters for [`build_report`].
#[derive(Debug, Clone, Copy)]
pub struct BootstrapParams {
    pub delta: f64,
    pub m: usize,
    pub seed: u64,
    pub scale: ChangeScale,
}

fn labelled(series: &DailySeries) -> Vec<(String, DailySeries)> {
    let mut out = vec![("all".to_string(), series.clone())];
    for (w, part) in WEEKDAYS.iter().zip(weekday_split(series).into_values()) {
        out.push((w.to_string(), part));
    }
    out
}

/// Summary rows for every (period, unit, weekday), and when `bootstrap` is set,
/// tests of the first period against each later one.
pub fn build_report(
    periods: &[Period<'_>],
    units: &[UnitId],
    elective_only: bool,
    outlier_bounds: (u32, u32),
    bootstrap: Option<BootstrapParams>,
) -> Report {
    let mut rows = Vec::new();
    let mut split: Vec<Vec<Vec<(String, DailySeries)>>> = Vec::new();
    for p in periods {
        let mut per_unit = Vec::new();
        for unit in units {
            let series = daily_admissions(p.records, unit, elective_only, p.range);
            let parts = labelled(&series);
            for (label, s) in &parts {
                rows.push(ReportRow {
                    period: p.name.clone(),
                    unit: unit.clone(),
                    weekday: label.clone(),
                    stats: summarize(s).ok(),
                    outlier_days: count_outlier_days(s, outlier_bounds.0, outlier_bounds.1),
                });
            }
            per_unit.push(parts);
        }
        split.push(per_unit);
    }

    let mut boot = Vec::new();
    if let Some(params) = bootstrap {
        for later in 1..periods.len() {
            for (u, unit) in units.iter().enumerate() {
                for ((label, before), (_, after)) in split[0][u].iter().zip(&split[later][u]) {
                    let res = bootstrap_test_with(before, after, params.delta, params.m, params.seed, params.scale);
                    boot.push(BootstrapRow {
                        before: periods[0].name.clone(),
                        after: periods[later].name.clone(),
                        unit: unit.clone(),
                        weekday: label.clone(),
                        error: res.as_ref().err().map(MetricsError::to_string),
                        result: res.ok(),
                    });
                }
            }
        }
    }

    Report {
        elective_only,
        outlier_bounds,
        change_scale: bootstrap.map(|b| b.scale).unwrap_or_default(),
        rows,
        bootstrap: boot,
    }
}

pub fn write_report_csv<W: Write>(out: W, report: &Report) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["period", "unit", "weekday", "n_days", "mean", "cov", "median", "q90", "qmra", "outlier_days"])?;
    for r in &report.rows {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        let s = r.stats.as_ref();
        w.write_record([
            r.period.clone(),
            r.unit.to_string(),
            r.weekday.clone(),
            s.map(|s| s.n_days.to_string()).unwrap_or_default(),
            f(s.map(|s| s.mean)),
            f(s.map(|s| s.cov)),
            f(s.map(|s| s.median)),
            f(s.map(|s| s.q90)),
            f(s.and_then(|s| s.qmra)),
            r.outlier_days.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const W: f64 = 800.0;
const H: f64 = 300.0;
const PAD: f64 = 40.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="20" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{y}" x2="{x}" y2="{y}" stroke="black"/>"#,
        y = H - PAD,
        x = W - PAD
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Daily counts as polylines, one per series.
pub fn svg_time_series(series: &[&DailySeries], title: &str) -> String {
    let mut s = svg_open(title);
    let n = series.iter().map(|x| x.len()).max().unwrap_or(0).max(2);
    let top = series.iter().flat_map(|x| x.counts.values()).copied().max().unwrap_or(0).max(1) as f64;
    let sx = (W - 2.0 * PAD) / (n - 1) as f64;
    let sy = (H - 2.0 * PAD - 10.0) / top;
    for (i, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser
            .counts
            .values()
            .enumerate()
            .map(|(k, c)| format!("{:.1},{:.1}", PAD + k as f64 * sx, H - PAD - *c as f64 * sy))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
            COLORS[i % COLORS.len()],
            pts.join(" ")
        );
        let label = format!("{} {}", ser.unit, ser.filter);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{}">{}</text>"#,
            W - PAD - 200.0,
            20.0 + 14.0 * i as f64,
            COLORS[i % COLORS.len()],
            escape(label.trim())
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Bar chart of a reschedule histogram.
pub fn svg_histogram(hist: &Histogram, title: &str) -> String {
    let mut s = svg_open(title);
    let (Some(lo), Some(hi)) = (hist.bins.keys().next(), hist.bins.keys().last()) else {
        s.push_str("</svg>\n");
        return s;
    };
    let nbins = ((hi - lo) / hist.bin_width + 1) as f64;
    let top = hist.bins.values().copied().max().unwrap_or(1).max(1) as f64;
    let bw = (W - 2.0 * PAD) / nbins;
    for (edge, count) in &hist.bins {
        let x = PAD + ((edge - lo) / hist.bin_width) as f64 * bw;
        let h = (H - 2.0 * PAD - 10.0) * *count as f64 / top;
        let _ = writeln!(
            s,
            r##"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="#1f77b4"><title>{edge}: {count}</title></rect>"##,
            H - PAD - h,
            (bw - 1.0).max(1.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="11">{lo}</text><text x="{}" y="{}" font-family="sans-serif" font-size="11">{hi}</text>"#,
        H - PAD + 15.0,
        W - PAD - 20.0,
        H - PAD + 15.0
    );
    s.push_str("</svg>\n");
    s
}
