use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gradlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradlab"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const HEAT: &str = r#"{
  "kind": "heat",
  "grid": {"extents": [1.0], "cells": [64]},
  "solver": {"dt": 0.005},
  "t_end": 0.2,
  "heat": {"v0": {"type": "constant", "value": 1.0}, "source": {"type": "constant", "value": 2.0}}
}"#;

const OSCILLATING: &str = r#"{
  "kind": "sweep",
  "grid": {"extents": [1.0], "cells": [64]},
  "solver": {"dt": 0.005},
  "t_end": 0.2,
  "sweep": {"family": {"kind": "oscillating"}, "ladder": {"first": 0, "last": 3}},
  "checks": {"psi": null}
}"#;

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&gradlab(&["--help"])), 0);
    assert_eq!(code(&gradlab(&["--version"])), 0);
    assert_eq!(code(&gradlab(&["sweep", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&gradlab(&[])), 1);
    assert_eq!(code(&gradlab(&["heat", "--bogus"])), 1);
    assert_eq!(code(&gradlab(&["heat"])), 1);
    assert_eq!(code(&gradlab(&["report"])), 1);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let broken = write(dir.path(), "broken.json", "{ not json");
    assert_eq!(
        code(&gradlab(&["heat", "--config", &broken, "--out", out])),
        2
    );

    let unknown = write(
        dir.path(),
        "unknown.json",
        &HEAT.replace("\"cells\"", "\"spacing\": 0.1, \"cells\""),
    );
    let o = gradlab(&["heat", "--config", &unknown, "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("grid.spacing"), "{}", stderr(&o));

    let invalid = write(
        dir.path(),
        "invalid.json",
        &HEAT.replace("\"dt\": 0.005", "\"dt\": -1.0"),
    );
    assert_eq!(
        code(&gradlab(&["heat", "--config", &invalid, "--out", out])),
        2
    );

    let heat = write(dir.path(), "heat.json", HEAT);
    let o = gradlab(&["sweep", "--config", &heat, "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("'heat'"));

    let missing = dir.path().join("missing.json");
    assert_eq!(
        code(&gradlab(&[
            "heat",
            "--config",
            missing.to_str().unwrap(),
            "--out",
            out
        ])),
        2
    );
}

#[test]
fn heat_run_writes_archive_and_report_reads_it_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "heat.json", HEAT);
    let out = dir.path().join("run");
    let o = gradlab(&[
        "heat",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--strict",
        "--threads",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("mass_identity"), "{s}");
    for f in [
        "config.json",
        "manifest.json",
        "reports.csv",
        "summary.txt",
        "frames.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }

    let r = gradlab(&["report", "--out", out.to_str().unwrap(), "--strict"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(
        stdout(&r),
        fs::read_to_string(out.join("summary.txt")).unwrap()
    );

    // Report via a config pointing at the archive.
    let rc = write(
        dir.path(),
        "report.json",
        &format!(
            r#"{{"kind": "report", "report": {{"archive": {:?}}}}}"#,
            out
        ),
    );
    assert_eq!(code(&gradlab(&["report", "--config", &rc])), 0);

    // A tampered file is detected.
    let p = out.join("reports.csv");
    let mut bytes = fs::read(&p).unwrap();
    bytes.push(b'\n');
    fs::write(&p, bytes).unwrap();
    let r = gradlab(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 3);
    assert!(stderr(&r).contains("reports.csv"));
}

#[test]
fn strict_mode_reports_failures_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "osc.json", OSCILLATING);
    let out = dir.path().join("osc");
    let out = out.to_str().unwrap();
    assert_eq!(
        code(&gradlab(&["sweep", "--config", &cfg, "--out", out])),
        0
    );
    assert!(fs::read_to_string(Path::new(out).join("convergence.csv"))
        .unwrap()
        .contains("stagnant"));
    assert_eq!(
        code(&gradlab(&[
            "sweep", "--config", &cfg, "--out", out, "--strict"
        ])),
        4
    );
    assert_eq!(code(&gradlab(&["report", "--out", out])), 0);
}

#[test]
fn solver_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "neg.json",
        r#"{
  "kind": "chemo",
  "grid": {"extents": [1.0], "cells": [16]},
  "solver": {"dt": 0.01},
  "t_end": 0.1,
  "chemo": {
    "system": {"variant": "B", "chi": 1.0, "eps": 0.1},
    "u0": {"type": "constant", "value": -1.0},
    "v0": {"type": "constant", "value": 1.0}
  }
}"#,
    );
    let o = gradlab(&[
        "chemo",
        "--config",
        &cfg,
        "--out",
        dir.path().join("neg").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(
        code(&gradlab(&[
            "report",
            "--out",
            dir.path().join("nowhere").to_str().unwrap()
        ])),
        3
    );
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "osc.json", OSCILLATING);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(
        code(&gradlab(&[
            "sweep",
            "--config",
            &cfg,
            "--out",
            a.to_str().unwrap(),
            "--threads",
            "4"
        ])),
        0
    );
    let archived = a.join("config.json");
    assert_eq!(
        code(&gradlab(&[
            "sweep",
            "--config",
            archived.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
            "--threads",
            "1"
        ])),
        0
    );
    for f in ["reports.csv", "convergence.csv", "sweep_table.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}
