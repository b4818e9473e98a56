use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn formation(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formation"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn capacity_default_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = formation(&["capacity", "--vf", "15", "--df", "15"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("1800 "), "{}", stdout(&o));
    let o = formation(&["capacity", "--vf", "15", "--df", "0"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn plan_single_vehicle_costs_its_distance() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("one.txt"),
        "formation-instance 1\ngrid 3 5\nvehicle 0 0 2\ntarget 3 2\n",
    )
    .unwrap();
    let o = formation(&["plan", "one.txt"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.trim_end().ends_with("best cost 5"), "{out}");
    let o = formation(&["plan", "one.txt", "--mode", "2"], dir.path());
    assert!(
        stdout(&o).trim_end().ends_with("best cost 3"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn plan_case_study() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let o = formation(&["plan", "case_study.txt"], &data);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("terminated by assignment cost 8"), "{out}");
    assert!(out.contains("best assignment [1, 4, 2, 5, 3]"), "{out}");
    assert!(out.trim_end().ends_with("best cost 7"), "{out}");
}

#[test]
fn plan_trace_lists_the_tree() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("two.txt"),
        "formation-instance 1\ngrid 3 4\nvehicle 0 0 1\nvehicle 1 1 0\ntarget 2 0\ntarget 2 1\n",
    )
    .unwrap();
    let o = formation(
        &["plan", "two.txt", "--trace", "--special-conflicts", "none"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("special conflicts none"));
    assert!(out.contains("constraint tree"));
    assert!(out.contains("*N1\tparent -"));
}

#[test]
fn plan_contradictory_preferences_fail() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.txt"),
        "formation-instance 1\ngrid 2 3\nvehicle 0 0 0\nvehicle 0 1 0\ntarget 1 0\ntarget 1 1\n",
    )
    .unwrap();
    let o = formation(&["plan", "bad.txt"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("preference"), "{}", stderr(&o));
}

#[test]
fn plan_reports_parse_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("x.txt"),
        "formation-instance 1\ngrid 3 4\nvehicle 0 zero 1\n",
    )
    .unwrap();
    let o = formation(&["plan", "x.txt"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn sim_sweep_layout_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.txt"),
        "formation-scenario 1\nduration = 90\n",
    )
    .unwrap();
    let args = [
        "sim",
        "s.txt",
        "--method",
        "fc,rule",
        "--volumes",
        "1000,1600",
        "--seeds",
        "1",
        "--out",
        "out",
    ];
    let o = formation(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let mut runs: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "summary.csv")
        .collect();
    runs.sort();
    assert_eq!(
        runs,
        [
            "fc_v1000_s1",
            "fc_v1600_s1",
            "rule_v1000_s1",
            "rule_v1600_s1"
        ]
    );
    for r in &runs {
        for f in [
            "travel_times.csv",
            "heatmap.csv",
            "events.jsonl",
            "manifest.json",
            "scenario.txt",
        ] {
            assert!(out.join(r).join(f).is_file(), "{r}/{f}");
        }
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fc_v1000_s1/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);

    let first = fs::read(out.join("summary.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 1 + 4 + 4);
    let o = formation(&args, dir.path());
    assert!(o.status.success());
    assert_eq!(first, fs::read(out.join("summary.csv")).unwrap());
}

#[test]
fn sim_needs_volumes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.txt"), "formation-scenario 1\n").unwrap();
    let o = formation(
        &[
            "sim",
            "s.txt",
            "--volumes",
            "",
            "--seeds",
            "1",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let o = formation(&["sim", "s.txt", "--seeds", "1", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
