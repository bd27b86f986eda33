use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rasim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rasim"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

const SMALL: &str = r#"
[scheme]
kind = "crdsa"
replicas = 3

[frame]
slots = 32

[phy]
modulation = 4
fec_rate = "1/3"

[traffic]
kind = "poisson"

[power]
kind = "equal"
esn0_db = 10.0

[reception]
kind = "threshold"
rho_db = -2.0

[sweep]
loads = [0.0, 0.2, 0.4, 0.6, 0.8]
frames = 400
"#;

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn sweep_writes_one_row_per_load() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), SMALL);
    let out = dir.path().join("out.csv");
    let o = rasim(&[
        "sweep",
        scenario.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "g,sent,lost,plr,plr_ci_low,plr_ci_high,throughput"
    );
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[1], "0,0,0,0,0,1,0");
    assert!(csv.ends_with('\n') && !csv.contains('\r') && !csv.contains(" \n"));
}

#[test]
fn sweep_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), SMALL);
    let s = scenario.to_str().unwrap();
    let one = rasim(&["--workers", "1", "sweep", s, "--seed", "11"]);
    let many = rasim(&["--workers", "8", "sweep", s, "--seed", "11"]);
    assert!(one.status.success() && many.status.success());
    assert_eq!(one.stdout, many.stdout);
    let other_seed = rasim(&["--workers", "1", "sweep", s, "--seed", "12"]);
    assert_ne!(one.stdout, other_seed.stdout);
}

#[test]
fn missing_curve_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "kind = \"threshold\"\nrho_db = -2.0",
        "kind = \"sea\"\ncurve = \"absent.csv\"",
    );
    let scenario = write_scenario(dir.path(), &text);
    let o = rasim(&["sweep", scenario.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("absent.csv"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        &SMALL.replace("slots = 32", "slots = 32\nslot = 3"),
    );
    let o = rasim(&["sweep", scenario.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("slot"));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), SMALL);
    let out = dir.path().join("missing-dir/out.csv");
    let o = rasim(&[
        "sweep",
        scenario.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn shipped_scenarios_parse() {
    for entry in std::fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            // slotdist with one frame is the cheapest full load of a scenario
            let o = rasim(&["slotdist", path.to_str().unwrap(), "--frames", "1"]);
            let text = std::fs::read_to_string(&path).unwrap();
            if text.contains("kind = \"essa\"") {
                assert_eq!(o.status.code(), Some(2), "{}", path.display());
                assert!(stderr(&o).contains("slotted"));
            } else {
                assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
            }
        }
    }
}

#[test]
fn devol_reports_mean_and_threshold() {
    let o = rasim(&["devol", "x2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("mean degree: 2\n"), "{out}");
    let threshold: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("threshold: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((threshold - 0.5).abs() < 1e-3);

    let o = rasim(&["devol", "0.5x2+0.28x3+0.22x8"]);
    assert!(stdout(&o).contains("mean degree: 3.6"), "{}", stdout(&o));
}

#[test]
fn devol_rejects_bad_pmfs() {
    let o = rasim(&["devol", "0.5x2+0.6x3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1.1"));
    let o = rasim(&["devol", "0.5x2+0.5y3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("position 9"), "{}", stderr(&o));
}

#[test]
fn table_default_rows() {
    let o = rasim(&["table"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for (name, gp, psi) in [
        ("CRDSA", "3/2", "2.604e-3"),
        ("IRSA-2", "3/2", "1.488e-3"),
        ("CSA", "1", "3.906e-3"),
        ("E-SSA", "192", "5.208e-3"),
    ] {
        let line = out
            .lines()
            .find(|l| l.starts_with(name) && l.split_whitespace().next() == Some(name))
            .unwrap();
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields[1], gp, "{line}");
        assert_eq!(fields[4], psi, "{line}");
    }
}

#[test]
fn table_custom_rows() {
    let o = rasim(&[
        "table",
        "--row",
        "CSA,4,1/2,1,128,2,0.19",
        "--row",
        "unit,2,1,1,1,1",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out
        .lines()
        .any(|l| l.starts_with("CSA") && l.trim_end().ends_with("0.19")));
    let unit: Vec<&str> = out
        .lines()
        .find(|l| l.starts_with("unit"))
        .unwrap()
        .split_whitespace()
        .collect();
    assert_eq!(unit[1], "1");
    assert_eq!(unit[4].parse::<f64>().unwrap(), 1.0);
    let o = rasim(&["table", "--row", "bad,4,x,1,128,2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn slotdist_matches_poisson() {
    let o = rasim(&[
        "slotdist",
        scenarios().join("crdsa3-collision.toml").to_str().unwrap(),
        "--load",
        "1.0",
        "--frames",
        "20000",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let tv: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("total variation distance: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(tv < 0.01, "{out}");
}

#[test]
fn slotdist_zero_load() {
    let o = rasim(&[
        "slotdist",
        scenarios().join("crdsa3-collision.toml").to_str().unwrap(),
        "--load",
        "0",
        "--frames",
        "50",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == "0,1,1"), "{out}");
}
