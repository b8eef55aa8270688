use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_discretep"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str], out: &Path) -> i32 {
    let status = bin().args(args).arg("--out").arg(out).output().unwrap();
    status.status.code().unwrap()
}

#[test]
fn table1_has_32_rows_and_unit_p0_mass() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["table1"], dir.path()), 0);
    let mut r = csv::Reader::from_path(dir.path().join("table1.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    let p0 = headers.iter().position(|h| h == "p0_exact").unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 32);
    let total: discretep::Rational = rows.iter().map(|row| discretep::rational::parse(&row[p0]).unwrap()).sum();
    assert_eq!(total, discretep::rational::one());
    assert_eq!(&rows[7][headers.iter().position(|h| h == "P_MD").unwrap()], "0.25000");
    assert!(dir.path().join("table1.manifest.json").exists());
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["verify"], dir.path()), 0);
    let reports: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 9);
    assert!(reports.as_array().unwrap().iter().all(|r| r["verdict"] == "pass"));

    // Rank 2 (a λ = 2.62 point) moved below a λ = 0.66 point.
    let mut labels = discretep::model::example1_priority();
    labels.swap(1, 7);
    let tampered = dir.path().join("ranking.txt");
    fs::write(&tampered, labels.join("\n")).unwrap();
    let out =
        bin().args(["verify", "--ranking", tampered.to_str().unwrap(), "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not agree"));
}

#[test]
fn verify_with_empty_grid_skips_theta_claims() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["verify", "--grid", ""], dir.path()), 0);
    let reports: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    for i in [0, 2, 5] {
        assert_eq!(reports[i]["verdict"], "skipped");
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["cdf", "--family", "x"], dir.path()), 2);
    assert_eq!(run(&["cdf", "--model", "binomial:oops"], dir.path()), 2);
    assert_eq!(run(&["verify", "--grid", "theta9"], dir.path()), 2);
    let cfg = dir.path().join("zero.json");
    let text = fs::read_to_string(configs().join("bh_null.json")).unwrap().replace("2000", "0");
    fs::write(&cfg, text).unwrap();
    assert_eq!(run(&["simulate", "--config", cfg.to_str().unwrap()], dir.path()), 2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"hypotheses": 3}"#).unwrap();
    assert_eq!(run(&["simulate", "--config", bad.to_str().unwrap()], dir.path()), 2);
}

#[test]
fn cdf_staircases() {
    let dir = tempfile::tempdir().unwrap();
    let count = |args: &[&str]| {
        assert_eq!(run(args, dir.path()), 0);
        csv::Reader::from_path(dir.path().join("cdf.csv")).unwrap().records().count()
    };
    assert_eq!(count(&["cdf", "--family", "md"]), 32);
    assert_eq!(count(&["cdf", "--family", "t"]), 6);
    assert_eq!(count(&["cdf", "--family", "t", "--theta", "4/5"]), 6);
    assert_eq!(count(&["cdf", "--uniform", "11"]), 11);
    assert!(count(&["cdf", "--family", "md", "--u", "rand"]) >= 33);
    assert_eq!(count(&["cdf", "--family", "md", "--u", "mid"]), 32);
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("bh_null.json");
    let args = ["simulate", "--config", cfg.to_str().unwrap(), "--replicates", "100"];
    assert_eq!(run(&args, a.path()), 0);
    assert_eq!(run(&args, b.path()), 0);
    for f in ["simulate.json", "simulate.csv", "simulate.manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn pvalues_with_shuffle_tie_break() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["pvalues", "--tie-break", "shuffle", "--seed", "3"], dir.path()), 0);
    let first = fs::read(dir.path().join("pvalues.csv")).unwrap();
    assert_eq!(run(&["pvalues", "--tie-break", "shuffle:3"], dir.path()), 0);
    assert_eq!(first, fs::read(dir.path().join("pvalues.csv")).unwrap());
    assert_eq!(run(&["pvalues", "--tie-break", "shuffle"], dir.path()), 2);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("pvalues.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 3);
}
