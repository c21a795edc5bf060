//! Scenario runner for the cauchyloc verification suites.
//!
//! A scenario file declares one state, an optional observable, named surfaces and regions,
//! and a list of checks. Running it writes one report row per check and returns an exit code:
//! 0 when every check passes, 2 when any check fails, 1 when a file cannot be loaded.

pub mod checks;
pub mod error;
pub mod plot;
pub mod report;
pub mod scenario;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use error::CliError;
pub use report::Row;
pub use scenario::{Format, Scenario};

/// Environment variable overriding every file seed.
pub const SEED_ENV: &str = "CAUCHYLOC_SEED";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

/// Directory of the scenario corpus shipped with the crate.
pub fn bundled_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

/// An existing file path, or the name of a scenario in `data_dir`.
pub fn resolve(arg: &str, data_dir: &Path) -> Result<PathBuf, CliError> {
    let direct = PathBuf::from(arg);
    if direct.is_file() {
        return Ok(direct);
    }
    let bundled = data_dir.join(format!("{arg}.toml"));
    if bundled.is_file() {
        return Ok(bundled);
    }
    Err(CliError::UnknownScenario(arg.to_string()))
}

/// Scenario files in `data_dir`, sorted by file name.
pub fn scenario_files(data_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(data_dir)
        .map_err(CliError::io(data_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads every file; the first failure aborts before anything runs.
pub fn load_all(paths: &[PathBuf]) -> Result<Vec<Scenario>, CliError> {
    paths.iter().map(|p| scenario::load(p)).collect()
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub jobs: usize,
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub format_override: Option<Format>,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub name: String,
    pub report: PathBuf,
    pub rows: Vec<Row>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Runs the scenarios (in parallel over scenarios, checks in declared order) and writes one report each.
pub fn run(scenarios: &[Scenario], opts: &RunOptions) -> Result<Vec<ScenarioOutcome>, CliError> {
    let mut seen = BTreeSet::new();
    let plan: Vec<(PathBuf, Format)> = scenarios
        .iter()
        .map(|sc| {
            let format = opts.format_override.unwrap_or(sc.file.output.format);
            let path = sc.report_path(&opts.out_dir, format);
            if !seen.insert(path.clone()) {
                return Err(CliError::DuplicateReport(path));
            }
            Ok((path, format))
        })
        .collect::<Result<_, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .expect("thread pool with a positive thread count");
    let rows: Vec<Vec<Row>> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|sc| {
                let seed = opts.seed_override.unwrap_or(sc.file.seed);
                (0..sc.file.checks.len()).map(|i| checks::run_check(sc, i, seed)).collect()
            })
            .collect()
    });
    scenarios
        .iter()
        .zip(plan)
        .zip(rows)
        .map(|((sc, (path, format)), rows)| {
            report::write_report(&path, &rows, format)?;
            Ok(ScenarioOutcome { name: sc.name().to_string(), report: path, rows })
        })
        .collect()
}

pub fn exit_code(outcomes: &[ScenarioOutcome]) -> i32 {
    if outcomes.iter().all(ScenarioOutcome::passed) {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

/// Human-readable summary, one line per check.
pub fn summary(outcomes: &[ScenarioOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        for r in &o.rows {
            let note = r.detail_text("error").map(|e| format!("  error: {e}")).unwrap_or_default();
            out.push_str(&format!(
                "{} {}#{} {}: value {} error {:.2e}{note}\n",
                if r.pass { "PASS" } else { "FAIL" },
                o.name,
                r.check,
                r.kind,
                report::fmt_float(r.value),
                r.total_error(),
            ));
        }
    }
    let failed = outcomes.iter().flat_map(|o| &o.rows).filter(|r| !r.pass).count();
    let total: usize = outcomes.iter().map(|o| o.rows.len()).sum();
    out.push_str(&format!("{} scenarios, {total} checks, {failed} failed\n", outcomes.len()));
    out
}
