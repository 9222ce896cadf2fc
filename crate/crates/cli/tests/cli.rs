use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drivestack::sim::log::read_log;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> PathBuf {
    root().join("scenarios").join(name)
}

fn drivestack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drivestack"))
        .args(args)
        .env_remove("DRIVESTACK_OUT")
        .output()
        .expect("binary runs")
}

fn run_minimal(out: &Path, seed: &str) -> PathBuf {
    let sc = scenario("minimal.json");
    let o = drivestack(&[
        "run",
        "--scenario",
        sc.to_str().unwrap(),
        "--preset",
        "Mp",
        "--seed",
        seed,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.join(format!("run-minimal-Mp-s{seed}"))
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenario("minimal.json");
    let o = drivestack(&["run", "--scenario", sc.to_str().unwrap(), "--preset", "Mx", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Mx"), "{err}");
    for name in ["Mp", "Mp+32m", "Ms"] {
        assert!(err.contains(name), "{err}");
    }
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    let o = drivestack(&["run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_scenario_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = drivestack(&["run", "--scenario", "no/such/file.json", "--out", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("file.json"));
}

#[test]
fn run_writes_report_and_log() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_minimal(tmp.path(), "4");
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["arrived"], true);
    assert_eq!(report["seed"], 4);
    assert_eq!(report["report"]["driving_score"], 100.0);
    let log = read_log(fs::read(dir.join("log.jsonl")).unwrap().as_slice(), "log").unwrap();
    assert_eq!(log.len() as u64, report["ticks"].as_u64().unwrap());
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let da = run_minimal(a.path(), "11");
    let db = run_minimal(b.path(), "11");
    for f in ["report.json", "log.jsonl"] {
        assert_eq!(fs::read(da.join(f)).unwrap(), fs::read(db.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn candidate_dump_has_132_rows_per_tick() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenario("minimal.json");
    let o = drivestack(&[
        "run",
        "--scenario",
        sc.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
        "--dump-candidates",
    ]);
    assert!(o.status.success());
    let dir = tmp.path().join("run-minimal-custom-s1");
    let mut rdr = csv::Reader::from_path(dir.join("candidates.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert!(!rows.is_empty());
    assert_eq!(rows.len() % 132, 0);
    let chosen = rows.iter().filter(|r| &r[12] == "1").count();
    assert_eq!(chosen * 132, rows.len());
}

#[test]
fn train_on_empty_directory_fails() {
    let demos = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = drivestack(&["train", "--demos", demos.path().to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn plot_dump_round_trips_the_ego_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_minimal(tmp.path(), "2");
    let log_path = dir.join("log.jsonl");
    let o = drivestack(&["plot-dump", "--log", log_path.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = read_log(fs::read(&log_path).unwrap().as_slice(), "log").unwrap();
    let dump = tmp.path().join("dump-run-minimal-Mp-s2");
    let mut rdr = csv::Reader::from_path(dump.join("ego_trace.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), log.len());
    for (row, rec) in rows.iter().zip(&log) {
        assert_eq!(row[0].parse::<u64>().unwrap(), rec.tick);
        assert_eq!(row[2].parse::<f64>().unwrap(), rec.ego.pose.x);
        assert_eq!(row[3].parse::<f64>().unwrap(), rec.ego.pose.y);
        assert_eq!(row[5].parse::<f64>().unwrap(), rec.ego.speed);
    }
    for f in ["tracks.csv", "decisions.csv", "events.csv"] {
        assert!(dump.join(f).exists(), "{f}");
    }
}

#[test]
fn plot_dump_of_empty_log_writes_headers_only() {
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("empty.jsonl");
    fs::write(&log, "").unwrap();
    let o = drivestack(&["plot-dump", "--log", log.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join(format!("dump-{}", tmp.path().file_name().unwrap().to_string_lossy()));
    for f in ["ego_trace.csv", "tracks.csv", "decisions.csv", "events.csv"] {
        let text = fs::read_to_string(dir.join(f)).unwrap();
        assert_eq!(text.lines().count(), 1, "{f}");
    }
}

#[test]
fn plot_dump_rejects_garbage() {
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("bad.jsonl");
    fs::write(&log, "{not json\n").unwrap();
    let o = drivestack(&["plot-dump", "--log", log.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn calibrate_writes_a_loadable_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = drivestack(&["calibrate", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let path = tmp.path().join("calibration/caltable.csv");
    let table = drivestack::controller::CalibrationTable::load(&path).unwrap();
    assert!(table.lookup(10.0, 0.0).abs() < 1.0);
}
