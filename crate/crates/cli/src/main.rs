use std::path::PathBuf;
use std::process::ExitCode;

use cauchyloc_cli::plot::{plotdata, Axis};
use cauchyloc_cli::{
    bundled_dir, exit_code, load_all, report, resolve, run, scenario, scenario_files, summary, CliError, Format, RunOptions,
    EXIT_ERROR, SEED_ENV,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cauchyloc", version, about = "Run localization-observable verification scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenario files or bundled scenarios by name.
    Run {
        /// Scenario files or bundled scenario names.
        scenarios: Vec<String>,
        /// Run every bundled scenario.
        #[arg(long)]
        all: bool,
        /// Scenarios run concurrently on this many threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Directory of bundled scenarios.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Directory that receives the reports.
        #[arg(long, default_value = "reports")]
        out_dir: PathBuf,
        /// Report format for every scenario, overriding the files.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Convert a report to a long-format plot table.
    Plotdata {
        report: PathBuf,
        /// `x` for the row coordinate or `index` for the check index.
        #[arg(long, default_value = "x")]
        axis: String,
        /// Keep only checks of this kind.
        #[arg(long)]
        kind: Option<String>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List bundled scenarios with their descriptions.
    ListScenarios {
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

fn seed_override() -> Result<Option<u64>, String> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("{SEED_ENV} must be an unsigned integer, got `{v}`")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("{SEED_ENV}: {e}")),
    }
}

fn execute(command: Command) -> Result<i32, String> {
    let err = |e: CliError| e.to_string();
    match command {
        Command::Run { scenarios, all, jobs, data_dir, out_dir, format } => {
            let data_dir = data_dir.unwrap_or_else(bundled_dir);
            let mut paths = if all { scenario_files(&data_dir).map_err(err)? } else { Vec::new() };
            for s in &scenarios {
                paths.push(resolve(s, &data_dir).map_err(err)?);
            }
            if paths.is_empty() {
                return Err("nothing to run: give scenario files or names, or --all".into());
            }
            let loaded = load_all(&paths).map_err(err)?;
            let opts = RunOptions {
                jobs,
                out_dir,
                seed_override: seed_override()?,
                format_override: format.map(|f| match f {
                    FormatArg::Csv => Format::Csv,
                    FormatArg::Json => Format::Json,
                }),
            };
            let outcomes = run(&loaded, &opts).map_err(err)?;
            print!("{}", summary(&outcomes));
            Ok(exit_code(&outcomes))
        }
        Command::Plotdata { report: path, axis, kind, out } => {
            let axis: Axis = axis.parse().map_err(err)?;
            let rows = report::read_report(&path).map_err(err)?;
            let table = plotdata(&rows, axis, kind.as_deref());
            match out {
                Some(p) => std::fs::write(&p, table).map_err(|e| format!("{}: {e}", p.display()))?,
                None => print!("{table}"),
            }
            Ok(0)
        }
        Command::ListScenarios { data_dir } => {
            let data_dir = data_dir.unwrap_or_else(bundled_dir);
            for path in scenario_files(&data_dir).map_err(err)? {
                let sc = scenario::load(&path).map_err(err)?;
                println!("{}\t{}", sc.name(), sc.file.description);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
