//! End-to-end behaviour of the `cauchyloc` binary.

use std::path::Path;
use std::process::{Command, Output};

use cauchyloc_cli::report::{read_report, write_report, Detail};
use cauchyloc_cli::{Format, Row};

fn cauchyloc(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cauchyloc"));
    cmd.args(args).env_remove("CAUCHYLOC_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run_in(dir: &Path, extra: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut args = vec!["run", "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    cauchyloc(&args, envs)
}

fn entries(dir: &Path) -> usize {
    std::fs::read_dir(dir).map_or(0, |d| d.count())
}

#[test]
fn bundled_normalization_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["normalization.flat"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = read_report(&dir.path().join("normalization.flat.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert!((0.999..=1.001).contains(&rows[0].value));
    assert!(rows[0].quad_error.is_finite() && rows[0].truncation_error.is_finite());
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS normalization.flat#0"));
}

#[test]
fn constant_kernel_control_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["kernels.negative-control", "--format", "json"], &[]);
    assert_eq!(out.status.code(), Some(2));
    let rows = read_report(&dir.path().join("kernels.negative-control.jsonl")).unwrap();
    assert!(!rows[0].pass);
    assert!(rows[0].detail("min_eig").unwrap() < 0.0);
}

#[test]
fn malformed_file_exits_one_without_report() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 1\nname = \"bad\"\n[state\nkind = 3\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run_in(&out_dir, &[bad.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(entries(&out_dir), 0);
}

#[test]
fn unresolved_reference_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("ref.toml");
    std::fs::write(
        &file,
        r#"schema_version = 1
name = "ref"
[state]
kind = "gaussian"
center_p = [0.0, 0.0, 0.0]
spread = 0.5
grid_points = 8
[observable]
kind = "newton_wigner"
[[checks]]
kind = "moments"
surface = "missing"
axis = 0
order = 1
"#,
    )
    .unwrap();
    let out = run_in(&dir.path().join("out"), &[file.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown surface `missing`"));
    assert_eq!(entries(&dir.path().join("out")), 0);
}

#[test]
fn one_bad_file_stops_the_whole_batch() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 2\nname = \"bad\"\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run_in(&out_dir, &["normalization.flat", bad.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(entries(&out_dir), 0);
}

#[test]
fn unknown_scenario_name_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["no.such.scenario"], &[]).status.code(), Some(1));
}

#[test]
fn duplicate_report_paths_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["normalization.flat", "normalization.flat"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(entries(dir.path()), 0);
}

#[test]
fn seed_override_changes_digest_and_is_reproducible() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let report = |d: &tempfile::TempDir| std::fs::read(d.path().join("mpovm.frames.csv")).unwrap();
    assert_eq!(run_in(dirs[0].path(), &["mpovm.frames"], &[]).status.code(), Some(0));
    assert_eq!(run_in(dirs[1].path(), &["mpovm.frames"], &[("CAUCHYLOC_SEED", "99")]).status.code(), Some(0));
    assert_eq!(run_in(dirs[2].path(), &["mpovm.frames"], &[("CAUCHYLOC_SEED", "99")]).status.code(), Some(0));
    assert_ne!(report(&dirs[0]), report(&dirs[1]));
    assert_eq!(report(&dirs[1]), report(&dirs[2]));
    let bad = run_in(dirs[0].path(), &["mpovm.frames"], &[("CAUCHYLOC_SEED", "seven")]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn list_scenarios_names_the_corpus() {
    let out = cauchyloc(&["list-scenarios"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("normalization.flat\t")));
    assert!(text.lines().count() >= 15);
}

fn row(check: usize, x: f64, value: f64, kind: &str) -> Row {
    Row {
        scenario: "profile".into(),
        check,
        kind: kind.into(),
        digest: "00".into(),
        x,
        value,
        quad_error: 1e-6,
        truncation_error: 2e-6,
        pass: true,
        details: vec![("ratio".into(), Detail::Num(2.0))],
    }
}

#[test]
fn plotdata_is_long_format_and_stable() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.csv");
    write_report(&report, &[row(0, 0.5, 0.1, "probability"), row(1, 1.0, 0.4, "probability"), row(2, 7.0, 1.0, "normalization")], Format::Csv)
        .unwrap();
    let plot = |args: &[&str]| {
        let mut all = vec!["plotdata", report.to_str().unwrap()];
        all.extend_from_slice(args);
        cauchyloc(&all, &[])
    };
    let out = plot(&["--kind", "probability"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scenario,check,x,y,yerr");
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[2], "profile,1,1.0000000000000000e0,4.0000000000000002e-1,3.0000000000000001e-6");
    assert_eq!(plot(&["--kind", "probability"]).stdout, out.stdout);

    let by_index = String::from_utf8(plot(&["--axis", "index"]).stdout).unwrap();
    assert!(by_index.lines().nth(3).unwrap().starts_with("profile,2,2.0000000000000000e0,"));

    let target = dir.path().join("plot.csv");
    assert_eq!(plot(&["--out", target.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&target).unwrap().lines().count(), 4);

    assert_eq!(plot(&["--axis", "radius"]).status.code(), Some(1));
}

#[test]
fn plotdata_of_empty_report_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("empty.jsonl");
    std::fs::write(&report, "").unwrap();
    let out = cauchyloc(&["plotdata", report.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "scenario,check,x,y,yerr\n");
}

#[test]
fn missing_report_exits_one() {
    let out = cauchyloc(&["plotdata", "/nonexistent/report.csv"], &[]);
    assert_eq!(out.status.code(), Some(1));
}
