use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use shaploc::bench::{bench, render_bench};
use shaploc::config::{parse_config, table1_preset, table2_preset, OutputFormat, SuiteConfig};
use shaploc::report::{render, run_suite_with, RowOutcome};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

const DEFAULT_PRESET_TRIALS: u64 = 1_000_000;
const FULL_PRESET_TRIALS: u64 = 10_000_000;

#[derive(Parser)]
#[command(
    name = "shaploc",
    version,
    about = "Shapley vs single-term anomaly localization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format (overrides the config file).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write results here instead of stdout (overrides the config file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Omit the generation timestamp so identical runs produce identical files.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config file.
    Run { config: PathBuf },
    /// Run a built-in parameter grid.
    Preset {
        #[arg(value_enum)]
        name: Preset,
        /// Monte Carlo runs per experiment.
        #[arg(long)]
        trials: Option<u64>,
        /// Use 10^7 runs per experiment.
        #[arg(long, conflicts_with = "trials")]
        full: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time exact Shapley values against the single-term statistic.
    Bench {
        /// Largest sensor count to time.
        #[arg(long, default_value_t = 18, value_parser = clap::value_parser!(u64).range(1..=24))]
        max_n: u64,
        /// Timed batches per measurement.
        #[arg(long, default_value_t = 7)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Markdown => OutputFormat::Markdown,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Table1,
    Table2,
}

fn write_output(out: Option<&Path>, text: &str) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn run_suite_cmd(mut suite: SuiteConfig, cli: &Cli) -> ExitCode {
    if let Some(f) = cli.format {
        suite.format = f.into();
    }
    if let Some(out) = &cli.out {
        suite.output = Some(out.clone());
    }
    let result = run_suite_with(&suite, |row| {
        if let RowOutcome::Failed(msg) = &row.outcome {
            eprintln!("experiment `{}` failed: {msg}", row.experiment.name);
        }
    });
    let timestamp = (!cli.no_timestamp)
        .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    let text = render(&result, suite.format, timestamp.as_deref());
    if let Err(e) = write_output(suite.output.as_deref(), &text) {
        eprintln!("error: cannot write results: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    if result.failed() {
        ExitCode::from(EXIT_RUNTIME)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { config } => match parse_config(config) {
            Ok(suite) => run_suite_cmd(suite, &cli),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Preset {
            name,
            trials,
            full,
            seed,
        } => {
            let trials = match (trials, full) {
                (Some(0), _) => {
                    eprintln!("error: --trials must be at least 1");
                    return ExitCode::from(EXIT_CONFIG);
                }
                (Some(t), _) => *t,
                (None, true) => FULL_PRESET_TRIALS,
                (None, false) => DEFAULT_PRESET_TRIALS,
            };
            let suite = match name {
                Preset::Table1 => table1_preset(trials, *seed),
                Preset::Table2 => table2_preset(trials, *seed),
            };
            run_suite_cmd(suite, &cli)
        }
        Command::Bench { max_n, reps, seed } => {
            let n_list: Vec<usize> = (1..=*max_n as usize).collect();
            let rows = match bench(&n_list, *reps, *seed) {
                Ok(rows) => rows,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_RUNTIME);
                }
            };
            let format = cli.format.map(OutputFormat::from).unwrap_or_default();
            match write_output(cli.out.as_deref(), &render_bench(&rows, format)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: cannot write results: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
    }
}
