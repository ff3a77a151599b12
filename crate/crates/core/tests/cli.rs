//! The command-line tool end to end: exit codes, outputs and determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_inertia-id"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, out: &str, seed: &str, tag: &str) {
    let o = run(
        &[
            "simulate",
            "--model",
            "builtin:three_link",
            "--contacts",
            "pivot_left,pivot_right",
            "--duration",
            "3",
            "--seed",
            seed,
            "--torque-noise",
            "0.01",
            "--tag",
            tag,
            "--out",
            out,
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn simulate_is_byte_identical_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "a", "4", "swing");
    simulate(dir.path(), "b", "4", "swing");
    for f in ["swing.csv", "swing.truth.json", "model.toml"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    simulate(dir.path(), "c", "5", "swing");
    assert_ne!(
        std::fs::read(dir.path().join("a/swing.csv")).unwrap(),
        std::fs::read(dir.path().join("c/swing.csv")).unwrap()
    );
}

#[test]
fn static_scenario_file_keeps_every_contact() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("scenario.toml"),
        "model = \"builtin:quadruped\"\nduration = 0.5\ntag = \"stand\"\n\n[motion]\nfamily = \"static\"\nposes = 2\nspread = 0.1\n",
    )
    .unwrap();
    let o = run(&["simulate", "--scenario", "scenario.toml", "--out", "s"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("s/stand.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 51);
    for row in &rows[1..] {
        let cells: Vec<&str> = row.split(',').collect();
        assert!(cells[cells.len() - 4..].iter().all(|c| *c == "1"), "{row}");
    }
}

#[test]
fn identify_writes_reports_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "sim", "1", "swing");
    simulate(d, "sim", "2", "held-out");
    let before = std::fs::read(d.join("sim/swing.csv")).unwrap();
    let args = |out: &'static str| {
        vec![
            "identify",
            "--model",
            "sim/model.toml",
            "--train",
            "sim/swing.csv",
            "--val",
            "sim/held-out.csv",
            "--out",
            out,
        ]
    };
    let o = run(&args("r1"), d);
    assert!(o.status.success(), "{}", stderr(&o));
    let o2 = run(&args("r2"), d);
    assert!(o2.status.success());
    for f in ["report.txt", "summary.json", "identified_model.toml", "friction.json"] {
        assert_eq!(
            std::fs::read(d.join("r1").join(f)).unwrap(),
            std::fs::read(d.join("r2").join(f)).unwrap(),
            "{f}"
        );
    }
    // inputs untouched
    assert_eq!(before, std::fs::read(d.join("sim/swing.csv")).unwrap());

    let report = std::fs::read_to_string(d.join("r1/report.txt")).unwrap();
    assert!(report.contains("| Motion"));
    assert!(report.contains("Overall RMSE"));
    assert!(report.contains("| held-out"));
    assert!(report.contains("gamma            1e-2"));

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r1/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["solutions"][0]["method"], "lmi");
    assert_eq!(summary["solutions"][0]["all_consistent"], true);
    assert_eq!(summary["solutions"][1]["method"], "svd");

    // the identified model loads and predicts
    let o = run(
        &[
            "predict",
            "--model",
            "r1/identified_model.toml",
            "--recorded-with",
            "sim/model.toml",
            "--friction-file",
            "r1/friction.json",
            "--data",
            "sim/held-out.csv",
            "--out",
            "pred",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("overall RMSE"));
    assert!(d.join("pred/predictions_held-out.csv").exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "sim", "1", "swing");
    std::fs::write(
        d.join("run.toml"),
        "model = \"sim/model.toml\"\ntrain = [\"sim/swing.csv\"]\nout = \"from-config\"\nbaseline = false\n\n[identify]\ngamma = 0.5\nmetric = \"euclidean\"\n\n[split]\nratio = 0.75\n",
    )
    .unwrap();
    let o = run(&["identify", "--config", "run.toml", "--gamma", "0.02"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(d.join("from-config/report.txt")).unwrap();
    assert!(report.contains("gamma            2e-2"));
    assert!(report.contains("metric           euclidean"));
    assert!(report.contains("training samples: 225"));
    assert!(report.contains("validation samples: 75"));
    assert!(!report.contains("SVD solution"));
}

#[test]
fn validation_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "sim", "1", "swing");

    let o = run(&["identify", "--model", "missing/robot.toml", "--train", "sim/swing.csv"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing/robot.toml"), "{}", stderr(&o));

    let o = run(
        &["identify", "--model", "sim/model.toml", "--train", "sim/swing.csv", "--gamma", "-0.1", "--out", "neg"],
        d,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gamma"));
    assert!(!d.join("neg").exists());

    std::fs::write(d.join("bad.toml"), "[identify]\ngamma = -1.0\n").unwrap();
    let o = run(&["identify", "--config", "bad.toml", "--model", "sim/model.toml", "--train", "sim/swing.csv"], d);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["identify", "--model", "sim/model.toml", "--train", "sim/nothing.csv"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sim/nothing.csv"));

    // a log recorded with a different model is refused
    let o = run(&["inspect", "--model", "sim/model.toml", "--data", "sim/swing.csv"], d);
    assert!(o.status.success());
    std::fs::write(
        d.join("other.toml"),
        std::fs::read_to_string(d.join("sim/model.toml")).unwrap().replacen("mass = 1", "mass = 2", 1),
    )
    .unwrap();
    let o = run(&["inspect", "--model", "other.toml", "--data", "sim/swing.csv"], d);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn filter_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "sim", "1", "swing");
    let o = run(&["filter", "--model", "sim/model.toml", "--input", "sim/swing.csv", "--out", "f.csv"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = std::fs::read_to_string(d.join("f.csv")).unwrap();
    assert!(f.starts_with("# model_hash"));
    assert_ne!(f, std::fs::read_to_string(d.join("sim/swing.csv")).unwrap());

    let o = run(&["inspect", "--model", "sim/model.toml", "--data", "sim/swing.csv", "--out", "ins"], d);
    assert!(o.status.success());
    let text = std::fs::read_to_string(d.join("ins/inspect.txt")).unwrap();
    assert!(text.contains("numerical rank"));
    assert!(text.contains("singular values"));
    assert!(text.contains("upper.m"));
}

#[test]
fn solver_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "sim", "1", "swing");
    std::fs::write(d.join("tight.toml"), "[identify]\nmax_iterations = 2\n").unwrap();
    let o = run(
        &["identify", "--config", "tight.toml", "--model", "sim/model.toml", "--train", "sim/swing.csv", "--out", "t"],
        d,
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("solver"));
    assert!(d.join("t/report.txt").exists());
}
