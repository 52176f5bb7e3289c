use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn cmean(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmean"))
        .args(args)
        .output()
        .expect("spawn cmean")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cmean-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn gaussian_report_matches_the_closed_form() {
    let o = cmean(&["report", "gaussian:mu=0,var=1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kind"], "entropy-report");
    assert_eq!(v["schema_version"], 1);
    let h = v["h_cond_mean"]["value"].as_f64().unwrap();
    let closed = 0.5 * (std::f64::consts::PI * std::f64::consts::E).ln();
    assert!((h - closed).abs() < 1e-9, "{h}");
}

#[test]
fn bits_are_nats_over_ln2() {
    let nats: Value = serde_json::from_str(&stdout(&cmean(&["report", "uniform:var=2"]))).unwrap();
    let bits: Value = serde_json::from_str(&stdout(&cmean(&[
        "--units",
        "bits",
        "report",
        "uniform:var=2",
    ])))
    .unwrap();
    assert_eq!(bits["units"], "bits");
    for key in ["h_y", "h_cond_mean", "lower_main"] {
        let n = nats[key]["value"].as_f64().unwrap();
        let b = bits[key]["value"].as_f64().unwrap();
        assert!((b * std::f64::consts::LN_2 - n).abs() < 1e-12, "{key}");
    }
    // Variances are not entropic and keep their units.
    assert_eq!(nats["mmse"], bits["mmse"]);
}

#[test]
fn exit_codes() {
    assert_eq!(cmean(&["report", "unif:var=1"]).status.code(), Some(1));
    assert_eq!(cmean(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        cmean(&["sweep", "uniform", "--vars", "2,1"]).status.code(),
        Some(1)
    );
    let o = cmean(&["report", "uniform:var=-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("variance must be positive"));
    assert_eq!(cmean(&["--help"]).status.code(), Some(0));
}

#[test]
fn strict_mode_fails_on_warnings() {
    // The numeric gap does not converge this close to d = 0; the cell is blanked with a warning.
    let args = ["expofam", "--d", "0.01,1", "--numeric-gamma", "2.5"];
    let lax = cmean(&args);
    assert_eq!(lax.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&lax.stderr).contains("warning: numeric gap at d = 0.01"));
    let first = stdout(&lax).lines().nth(1).unwrap().to_string();
    assert!(first.ends_with(",,"), "{first}");
    let strict: Vec<&str> = std::iter::once("--strict").chain(args).collect();
    assert_eq!(cmean(&strict).status.code(), Some(4));
    assert_eq!(
        cmean(&["--strict", "sweep", "gaussian", "--vars", "1,2"])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn selftest_is_deterministic_and_passes() {
    let a = cmean(&["selftest", "--seed", "42"]);
    let b = cmean(&["selftest", "--seed", "42"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(
        text.lines().filter(|l| l.starts_with("PASS ")).count() >= 15,
        "{text}"
    );
    assert!(!text.contains("FAIL "), "{text}");
}

#[test]
fn csv_report_has_paired_error_columns() {
    let o = cmean(&["report", "laplace:var=1", "--format", "csv"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), row.len());
    assert_eq!(header[0], "noise_var");
    for pair in header[1..].chunks(2) {
        assert_eq!(format!("{}_abs_error", pair[0]), pair[1]);
    }
}

#[test]
fn fig3_writes_csvs_and_a_manifest() {
    let dir = scratch("fig3");
    let o = cmean(&[
        "figure",
        "fig3",
        "--out-dir",
        dir.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("fig3_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["kind"], "figure-manifest");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["tool"], "cmean");
    assert!(m["tool_version"].is_string());
    assert_eq!(m["tolerances"]["combined_error_factor"], 3.0);
    let files = m["files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    for f in files {
        let mut rdr = csv::Reader::from_path(dir.join(f["path"].as_str().unwrap())).unwrap();
        let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
        let columns: Vec<String> = serde_json::from_value(f["columns"].clone()).unwrap();
        assert_eq!(header, columns);
        assert_eq!(header[..3], ["sigma_x2", "truth", "truth_abs_error"]);
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len() as u64, f["rows"].as_u64().unwrap());
        for r in &rows {
            let truth: f64 = r[1].parse().unwrap();
            let lower: f64 = r[3].parse().unwrap();
            let jensen: f64 = r[5].parse().unwrap();
            assert!(lower <= truth + 1e-6 && truth <= jensen + 1e-6, "{r:?}");
        }
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn rate_loss_csv_reads_back() {
    let dir = scratch("rate");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("rate.csv");
    let o = cmean(&[
        "rate-loss",
        "gaussian:var=1",
        "--agents",
        "2",
        "--d",
        "0.6,0.75,0.9",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = condmean::rate::read_rate_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1].d, 0.75);
    std::fs::remove_dir_all(dir).unwrap();
}
