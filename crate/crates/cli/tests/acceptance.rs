//! Runs the bundled corpus and grades it criterion by criterion.
//!
//! Prints one line per criterion and fails if any criterion fails. The corpus runs twice;
//! the second run must reproduce every report byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use cauchyloc_cli::{bundled_dir, load_all, run, scenario_files, RunOptions, Row, ScenarioOutcome};

/// Relative tolerance for first moments against the packet width.
const MOMENT_WIDTH_FRACTION: f64 = 5e-3;

struct Corpus {
    rows: Vec<Row>,
}

impl Corpus {
    fn new(outcomes: &[ScenarioOutcome]) -> Self {
        Self { rows: outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect() }
    }

    fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.kind == kind && !is_control(r))
    }

    fn controls<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.kind == kind && is_control(r))
    }
}

fn is_control(r: &Row) -> bool {
    r.scenario.ends_with("negative-control")
}

struct Verdict {
    pass: bool,
    note: String,
}

fn all_pass<'a>(rows: impl Iterator<Item = &'a Row>, min_count: usize) -> Verdict {
    let rows: Vec<&Row> = rows.collect();
    let failed: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| format!("{}#{}", r.scenario, r.check)).collect();
    let pass = failed.is_empty() && rows.len() >= min_count;
    let note = if failed.is_empty() {
        format!("{} rows (need {min_count})", rows.len())
    } else {
        format!("{} rows, failed: {}", rows.len(), failed.join(", "))
    };
    Verdict { pass, note }
}

fn and(a: Verdict, b: Verdict) -> Verdict {
    Verdict { pass: a.pass && b.pass, note: format!("{}; {}", a.note, b.note) }
}

fn normalization(c: &Corpus) -> Verdict {
    let flat = c.rows.iter().find(|r| r.scenario == "normalization.flat");
    let example = Verdict {
        pass: flat.is_some_and(|r| (0.999..=1.001).contains(&r.value)),
        note: format!("normalization.flat value {:?}", flat.map(|r| r.value)),
    };
    and(all_pass(c.of_kind("normalization"), 37), example)
}

fn causality(c: &Corpus) -> Verdict {
    let rows: Vec<&Row> = c.of_kind("causality").collect();
    let strict = rows.iter().filter(|r| r.detail("strict") == Some(1.0)).count();
    let frac = strict as f64 / rows.len().max(1) as f64;
    and(all_pass(rows.iter().copied(), 20), Verdict { pass: frac >= 0.8, note: format!("strict margin in {strict}/{}", rows.len()) })
}

fn gram(c: &Corpus) -> Verdict {
    let positive = all_pass(c.of_kind("kernel-check").filter(|r| r.detail_text("method") == Some("gram")), 15);
    let control: Vec<&Row> = c.controls("kernel-check").collect();
    let rejected = !control.is_empty() && control.iter().all(|r| !r.pass && r.detail("min_eig").is_some_and(|e| e < 0.0));
    and(positive, Verdict { pass: rejected, note: format!("g = 1 control rejected: {rejected}") })
}

fn propk(c: &Corpus) -> Verdict {
    all_pass(c.of_kind("kernel-check").filter(|r| matches!(r.detail_text("method"), Some("integral" | "mollifier"))), 10)
}

/// Packet label `packet-x` of a per-packet scenario name.
fn packet(r: &Row) -> Option<&str> {
    r.scenario.split('.').next().filter(|p| p.starts_with("packet-"))
}

fn first_moments(c: &Corpus) -> Verdict {
    let rows: Vec<&Row> = c.of_kind("moments").filter(|r| r.detail("order") == Some(1.0)).collect();
    let mut groups: BTreeMap<(String, u64), Vec<&Row>> = BTreeMap::new();
    for r in &rows {
        if let (Some(p), Some(a)) = (packet(r), r.detail("axis")) {
            groups.entry((p.to_string(), a as u64)).or_default().push(r);
        }
    }
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for g in groups.values() {
        for (i, a) in g.iter().enumerate() {
            for b in &g[i + 1..] {
                let tol = a.detail("tolerance").unwrap_or(f64::NAN) + b.detail("tolerance").unwrap_or(f64::NAN);
                let width = a.detail("width").unwrap_or(f64::NAN);
                worst = worst.max((a.value - b.value).abs() / tol.min(MOMENT_WIDTH_FRACTION * width));
                pairs += 1;
            }
        }
    }
    and(
        all_pass(rows.iter().copied(), 15),
        Verdict { pass: pairs >= 30 && worst <= 1.0, note: format!("{pairs} pairs, worst |difference|/tolerance {worst:.3}") },
    )
}

fn second_moments(c: &Corpus) -> Verdict {
    let rows: Vec<&Row> = c.of_kind("moments").filter(|r| r.detail("order") == Some(2.0)).collect();
    let oracle = rows.iter().filter(|r| r.detail("kappa_oracle_diff").is_some()).count();
    and(all_pass(rows.iter().copied(), 15), Verdict { pass: oracle >= 1, note: format!("{oracle} finite-rank oracle rows") })
}

fn heisenberg(c: &Corpus) -> Verdict {
    let rows: Vec<&Row> = c.of_kind("heisenberg").collect();
    let resolved = rows.iter().filter(|r| r.detail("correction_over_tolerance").is_some_and(|x| x > 3.0)).count();
    let finite = rows.iter().filter(|r| r.scenario.starts_with("finite-rank")).count();
    and(
        all_pass(rows.iter().copied(), 9),
        Verdict { pass: resolved >= 1 && finite >= 1, note: format!("{resolved} with resolved correction, {finite} finite-rank") },
    )
}

fn covariance(c: &Corpus) -> Verdict {
    let control: Vec<&Row> = c.controls("covariance").collect();
    let rejected = !control.is_empty()
        && control.iter().all(|r| !r.pass && r.detail("deviation_over_tolerance").is_some_and(|d| d > 3.0));
    let ratio = control.iter().filter_map(|r| r.detail("deviation_over_tolerance")).fold(0.0, f64::max);
    and(all_pass(c.of_kind("covariance"), 9), Verdict { pass: rejected, note: format!("control deviation/tolerance {ratio:.2}") })
}

fn hegerfeldt(c: &Corpus) -> Verdict {
    let leaks: Vec<&Row> = c.of_kind("hegerfeldt").collect();
    let monotone = leaks.windows(2).all(|w| w[0].x < w[1].x && w[0].value > w[1].value);
    let probes = c.of_kind("probability").filter(|r| r.detail("min_ratio").is_some());
    and(
        and(all_pass(leaks.iter().copied(), 3), all_pass(probes, 2)),
        Verdict { pass: monotone, note: format!("leak decreasing in R: {monotone}") },
    )
}

fn report_bytes(outcomes: &[ScenarioOutcome]) -> BTreeMap<String, Vec<u8>> {
    outcomes.iter().map(|o| (o.name.clone(), std::fs::read(&o.report).expect("report written"))).collect()
}

fn run_corpus(out_dir: &Path) -> Vec<ScenarioOutcome> {
    let files = scenario_files(&bundled_dir()).expect("bundled corpus");
    let scenarios = load_all(&files).expect("bundled corpus loads");
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let opts = RunOptions { jobs, out_dir: out_dir.to_path_buf(), seed_override: None, format_override: None };
    run(&scenarios, &opts).expect("reports written")
}

#[test]
fn acceptance() {
    let first_dir = tempfile::tempdir().unwrap();
    let second_dir = tempfile::tempdir().unwrap();
    let first = run_corpus(first_dir.path());
    let c = Corpus::new(&first);

    let mut verdicts: Vec<(&str, Verdict)> = vec![
        ("normalization", normalization(&c)),
        ("flux conservation", all_pass(c.of_kind("conservation"), 6)),
        ("general causality", causality(&c)),
        ("coherence", all_pass(c.of_kind("coherence"), 6)),
        ("kernel positive definiteness", gram(&c)),
        ("integral and mollifier criteria", propk(&c)),
        ("first moments", first_moments(&c)),
        ("second-moment decomposition", second_moments(&c)),
        ("modified uncertainty relation", heisenberg(&c)),
        ("stress-energy operator against kernel", all_pass(c.of_kind("mpovm"), 1)),
        ("covariance", covariance(&c)),
        ("second-order residuals", all_pass(c.of_kind("residuals"), 3)),
        ("density positivity", all_pass(c.of_kind("positivity"), 12)),
        ("no strict localization", hegerfeldt(&c)),
    ];
    let second = run_corpus(second_dir.path());
    let (a, b) = (report_bytes(&first), report_bytes(&second));
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    verdicts.push((
        "determinism",
        Verdict { pass: differing.is_empty() && a.len() == b.len(), note: format!("{} reports, differing: {differing:?}", a.len()) },
    ));

    for (i, (name, v)) in verdicts.iter().enumerate() {
        println!("criterion {:2} {:<40} {}  {}", i + 1, name, if v.pass { "PASS" } else { "FAIL" }, v.note);
    }
    let failed: Vec<usize> = verdicts.iter().enumerate().filter(|(_, (_, v))| !v.pass).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
