use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn beds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beds")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = beds(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) {
    ok(&["synth", "--out", p(dir), "--seed", seed, "--days", "120"]);
}

#[test]
fn synth_is_byte_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    synth(&a, "1");
    synth(&b, "1");
    for f in ["census.csv", "procedures.csv", "availability.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn pipeline_from_synth_to_report() {
    let t = tempfile::tempdir().unwrap();
    let (raw, ing, hist, beds_dir, rep) = (
        t.path().join("raw"),
        t.path().join("ingest"),
        t.path().join("hist"),
        t.path().join("beds"),
        t.path().join("report"),
    );
    synth(&raw, "3");
    ok(&[
        "ingest",
        "--census", p(&raw.join("census.csv")),
        "--procedures", p(&raw.join("procedures.csv")),
        "--availability", p(&raw.join("availability.csv")),
        "--out", p(&ing),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ing.join("cleaning_report.json")).unwrap()).unwrap();
    assert_eq!(report["input_patients"], report["profiles"]);

    let profiles = ing.join("profiles.ndjson");
    let avail = raw.join("availability.csv");
    ok(&["simulate", "--profiles", p(&profiles), "--availability", p(&avail), "--out", p(&hist), "--mode", "historical"]);
    ok(&[
        "simulate", "--profiles", p(&profiles), "--availability", p(&avail), "--out", p(&beds_dir),
        "--mode", "beds", "--beds-start", "2019-01-01", "--units", "PICUs,PCUs",
    ]);
    let header = fs::read_to_string(beds_dir.join("records.csv")).unwrap();
    assert!(header.starts_with("primary_csn,original_day,simulated_day,delta_days,unit\n"));
    let first_event = fs::read_to_string(hist.join("events.ndjson")).unwrap();
    let first_event: serde_json::Value = serde_json::from_str(first_event.lines().next().unwrap()).unwrap();
    assert_eq!(first_event["kind"], "ARRIVAL");

    let out = ok(&[
        "report",
        "--records", &format!("historical={}", p(&hist.join("records.ndjson"))),
        "--records", &format!("beds={}", p(&beds_dir.join("records.csv"))),
        "--profiles", p(&profiles),
        "--period", "main=2019-02-01..2019-04-30",
        "--weekdays", "--bootstrap", "0.0,200,1", "--outliers", "2,5", "--plots",
        "--out", p(&rep),
    ]);
    assert!(out.contains("bootstrap historical -> beds"));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(rep.join("report.json")).unwrap()).unwrap();
    // 2 record sets x 2 units x (all + 5 weekdays)
    assert_eq!(r["rows"].as_array().unwrap().len(), 24);
    assert!(rep.join("admissions_PICUs.svg").exists());
    assert!(rep.join("delta_historical.svg").exists());
}

#[test]
fn missing_availability_is_inferred() {
    let t = tempfile::tempdir().unwrap();
    let raw = t.path().join("raw");
    synth(&raw, "2");
    let out = t.path().join("ing");
    let msg = ok(&[
        "ingest", "--census", p(&raw.join("census.csv")), "--procedures", p(&raw.join("procedures.csv")),
        "--out", p(&out),
    ]);
    assert!(msg.contains("inferred"));
    let text = fs::read_to_string(out.join("availability.csv")).unwrap();
    assert!(text.starts_with("Date,Primary Surgeon ID,Service,Available Hours"));
    assert!(text.lines().count() > 1);
}

#[test]
fn bad_header_exits_two_and_names_the_column() {
    let t = tempfile::tempdir().unwrap();
    let raw = t.path().join("raw");
    synth(&raw, "2");
    let census = fs::read_to_string(raw.join("census.csv")).unwrap();
    let broken = t.path().join("census.csv");
    fs::write(&broken, census.replacen("Dept Abbrev", "Department", 1)).unwrap();
    let out = beds(&[
        "ingest", "--census", p(&broken), "--procedures", p(&raw.join("procedures.csv")),
        "--out", p(&t.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Dept Abbrev"));
}

#[test]
fn runtime_and_usage_errors_have_distinct_codes() {
    let t = tempfile::tempdir().unwrap();
    let missing = t.path().join("nope.ndjson");
    let out = beds(&["simulate", "--profiles", p(&missing), "--availability", p(&missing), "--out", p(t.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(beds(&["simulate", "--mode", "sideways"]).status.code(), Some(2));
    let help = ok(&["simulate", "--help"]);
    for flag in ["--mode", "--beds-start", "--units", "--alpha", "--seed"] {
        assert!(help.contains(flag), "{flag}");
    }
}

fn http(addr: &str, method: &str, path: &str, body: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    let status = resp[9..12].parse().unwrap();
    let body = resp.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

#[test]
fn serve_prints_address_and_answers() {
    let t = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_beds"))
        .args(["serve", "--listen", "127.0.0.1:0", "--dir", p(t.path())])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").unwrap().split(' ').next().unwrap().to_string();
    let (status, body) = http(&addr, "GET", "/heatmap?unit=PICUs&surgeon=s1&start=2020-01-01&end=2020-01-07", "");
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(status, 200);
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 7);
}
