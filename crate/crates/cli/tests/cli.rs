use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vertisim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vertisim")).args(args).output().expect("binary runs")
}

fn scenario(name: &str) -> String {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    path.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_outputs_and_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = vertisim(&[
            "run",
            "--config",
            &scenario("baseline.toml"),
            "--seed",
            "7",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["flights.csv", "passengers.csv", "events.csv", "utilization.csv", "summary.json"] {
        assert!(a.path().join(name).is_file(), "{name}");
    }
    let summary = fs::read_to_string(a.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 7"));
    assert_eq!(summary, fs::read_to_string(b.path().join("summary.json")).unwrap());
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(scenario("baseline.toml")).unwrap().replace("size = 14", "size = 0");
    fs::write(&bad, text).unwrap();
    let out = vertisim(&["run", "--config", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("fleet.size"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = vertisim(&[
        "sweep",
        "--config",
        &scenario("baseline.toml"),
        "--fleet",
        "8,14",
        "--distance",
        "12,24",
        "--seeds",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(3) == Some("ok")));
}

#[test]
fn plan_reports_tlof_capacity() {
    let out = vertisim(&["plan", "--config", &scenario("baseline.toml")]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("tlof 48.00 ops"), "{}", stdout(&out));
    let out = vertisim(&["plan", "--config", &scenario("zero_demand.toml"), "--csv"]);
    assert!(out.status.success());
    assert!(stdout(&out).lines().any(|l| l == "network,all,min_fleet,0"), "{}", stdout(&out));
}

#[test]
fn energy_table_and_charge_curve_print_csv() {
    let out = vertisim(&["energy-table", "--distance", "24", "--pax", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("phase,"));
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().last().unwrap().starts_with("total,"));
    let out = vertisim(&["charge-curve", "--step", "10"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("soc_pct,"));
    assert!(!vertisim(&["energy-table", "--distance", "0.1"]).status.success());
}
