use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use rollreg_cli::config::{parse_config_file, ExperimentConfig};
use rollreg_cli::plot::{emit_plot_from_dir, PlotKind};
use rollreg_cli::report::emit_csv;
use rollreg_cli::runner::{run_experiment, RunOutcome};
use rollreg_cli::verify::run_verification;

/// Name of the environment variable that overrides the output directory.
const OUTPUT_DIR_VAR: &str = "ROLLREG_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "rollreg",
    version,
    about = "Streaming rolling-window regret benchmarks: run experiment grids, \
             export CSVs, and render SVG plots"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment grid described by a config file and write CSVs.
    Run {
        /// Path to a `key = value` config file.
        config: PathBuf,
    },
    /// Render one plot kind from a directory written by `run`.
    Plot {
        /// Directory holding `runs.csv` and its window tables.
        dir: PathBuf,
        /// One of: rate_sweep, t_sweep, order_sweep, optimizer_compare,
        /// scaling_curve.
        #[arg(long)]
        kind: String,
    },
    /// Run the built-in invariant checks and print PASS/FAIL lines.
    Verify,
}

/// Environment override, then the config's `run.output_dir`, then
/// `./rollreg-out`.
fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_VAR) {
        return PathBuf::from(dir);
    }
    cfg.run.output_dir.clone().unwrap_or_else(|| PathBuf::from("rollreg-out"))
}

fn run(config: &Path) -> rollreg_cli::Result<i32> {
    let cfg = parse_config_file(config)?;
    let dir = output_dir(&cfg);
    let outcomes = run_experiment(&cfg)?;

    let mut warnings: BTreeSet<String> = BTreeSet::new();
    let mut failed = 0usize;
    let mut finished = 0usize;
    for outcome in &outcomes {
        match outcome {
            RunOutcome::Record(r) => {
                finished += 1;
                warnings.extend(r.warnings.iter().cloned());
            }
            RunOutcome::Failure(f) => {
                failed += 1;
                eprintln!("failed [{} seed {}]: {}", f.config_hash, f.seed, f.error);
            }
        }
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let files = emit_csv(&outcomes, &dir)?;
    println!("wrote {} ({finished} runs, {failed} failed)", files.runs.display());
    for path in &files.windows {
        println!("wrote {}", path.display());
    }
    if let Some(path) = &files.failures {
        println!("wrote {}", path.display());
    }
    Ok(if failed > 0 { 1 } else { 0 })
}

fn plot(dir: &Path, kind: &str) -> rollreg_cli::Result<i32> {
    let kind: PlotKind = kind.parse()?;
    let path = emit_plot_from_dir(dir, kind)?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn dispatch(cli: Cli) -> rollreg_cli::Result<i32> {
    match cli.cmd {
        Cmd::Run { config } => run(&config),
        Cmd::Plot { dir, kind } => plot(&dir, &kind),
        Cmd::Verify => Ok(if run_verification() { 0 } else { 1 }),
    }
}

fn main() {
    let code = match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    std::process::exit(code);
}
