use std::fs;
use std::process::Command;

use peer_select::harness::{run_sweep, run_sweep_to, ExperimentConfig, RunSettings, CSV_HEADER, GAIN_HEADER};
use peer_select::Error;

const BIN: &str = env!("CARGO_BIN_EXE_peer-select");

fn config(json: &str) -> ExperimentConfig {
    json.parse().unwrap()
}

#[test]
fn sweep_covers_the_grid() {
    let cfg = config(r#"{"n": 30, "k": [3, 6], "m": [2], "phi": [0.1, 0.9], "mechanisms": ["vanilla"], "trials": 20, "seed": 1}"#);
    let rows = run_sweep(&cfg, &RunSettings::default()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.trials == 20 && r.infeasible.is_none()));
    let mut cells: Vec<(usize, u64)> = rows.iter().map(|r| (r.params.k, r.params.phi.value().to_bits())).collect();
    cells.dedup();
    assert_eq!(cells.len(), 4);
}

#[test]
fn empty_grid_gives_no_rows() {
    let cfg = config(r#"{"n": 30, "k": [], "m": [2], "phi": [0.5], "trials": 5, "seed": 1}"#);
    assert!(run_sweep(&cfg, &RunSettings::default()).unwrap().is_empty());
}

#[test]
fn unknown_fields_are_rejected() {
    assert!(r#"{"n": 30, "k": [3], "m": [2], "phi": [0.5], "sead": 1}"#.parse::<ExperimentConfig>().is_err());
}

#[test]
fn unwritable_output_fails_up_front() {
    let cfg = config(r#"{"n": 400, "k": [40], "m": [20], "phi": [0.5], "trials": 100000, "seed": 1}"#);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("rows.csv");
    let start = std::time::Instant::now();
    assert!(matches!(run_sweep_to(&cfg, &out, &RunSettings::default()), Err(Error::Output { .. })));
    assert!(start.elapsed().as_secs() < 5);
}

#[test]
fn cli_validates_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.json");
    fs::write(&cfg, r#"{"n": 40, "k": [5], "m": [3], "c": [2], "phi": [0.5], "trials": 50, "seed": 3}"#).unwrap();

    let st = Command::new(BIN).arg("--config").arg(&cfg).arg("--validate-only").output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));

    let out = dir.path().join("rows.csv");
    let st = Command::new(BIN).arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 3);

    // reruns, serial and parallel, are byte-identical
    let again = dir.path().join("again.csv");
    let st = Command::new(BIN).arg("--config").arg(&cfg).arg("--out").arg(&again).args(["--threads", "1"]).output().unwrap();
    assert!(st.status.success());
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"n": 40, "k": [50], "m": [3], "phi": [0.5]}"#).unwrap();
    assert!(!Command::new(BIN).arg("--config").arg(&bad).arg("--validate-only").status().unwrap().success());
}

#[test]
fn cli_writes_gain_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    fs::write(&a, r#"{"n": 30, "k": [6], "m": [1], "phi": [0.5], "mechanisms": ["vanilla"], "trials": 200, "seed": 5}"#).unwrap();
    fs::write(&b, r#"{"n": 30, "k": [6], "m": [8], "phi": [0.5], "mechanisms": ["vanilla"], "trials": 200, "seed": 5}"#).unwrap();
    let out = dir.path().join("gain.csv");
    let st = Command::new(BIN).arg("--gain").arg(&a).arg(&b).arg("--out").arg(&out).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(GAIN_HEADER));
    let deltas: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(deltas.len(), 30);
    assert!(deltas.iter().sum::<f64>().abs() < 1e-4);
}
