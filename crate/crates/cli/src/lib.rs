//! Command-line harness for the driving stack: route runs, ablation
//! matrices, IRL training, calibration and tick-log dumps.
//!
//! Every command writes under a directory named after its inputs and seed
//! inside `--out` (default `runs`, or `$DRIVESTACK_OUT`), so reruns with the
//! same seed overwrite byte-identical files.

pub mod ablation;
pub mod dump;
pub mod error;
pub mod presets;
pub mod run;
pub mod train;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use drivestack::irl::SyntheticConfig;

pub use error::{CliError, CliResult};

pub const OUT_ENV: &str = "DRIVESTACK_OUT";

#[derive(Debug, Parser)]
#[command(name = "drivestack", version, about = "Closed-loop driving stack harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write report.json and log.jsonl.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        agent_config: Option<PathBuf>,
        /// Degradation preset name from the preset file.
        #[arg(long)]
        preset: Option<String>,
        /// Preset file; defaults to config/presets.json or the bundled copy.
        #[arg(long)]
        presets: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every evaluated candidate to candidates.csv.
        #[arg(long)]
        dump_candidates: bool,
    },
    /// Run presets over a scenario suite and write the summary table.
    Ablation {
        #[arg(long)]
        suite: PathBuf,
        /// JSON with "presets" (names) and "seeds".
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        presets: Option<PathBuf>,
        #[arg(long)]
        agent_config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn cost weights from a directory of demonstrations.
    Train {
        #[arg(long)]
        demos: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flatten a tick log into CSV tables.
    PlotDump {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the feed-forward table on the default plant.
    Calibrate {
        #[arg(long, default_value_t = drivestack::sim::DEFAULT_TICK)]
        tick: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic demonstrations under known weights.
    GenDemos {
        #[arg(long, default_value_t = 60)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

pub fn execute(cmd: Command) -> CliResult<PathBuf> {
    match cmd {
        Command::Run {
            scenario,
            agent_config,
            preset,
            presets,
            seed,
            out,
            dump_candidates,
        } => run::cmd_run(&run::RunArgs {
            scenario,
            agent_config,
            preset,
            presets,
            seed,
            out: out_dir(out),
            dump_candidates,
        }),
        Command::Ablation {
            suite,
            matrix,
            presets,
            agent_config,
            jobs,
            out,
        } => ablation::cmd_ablation(&ablation::AblationArgs {
            suite,
            matrix,
            presets,
            agent_config,
            jobs,
            out: out_dir(out),
        }),
        Command::Train { demos, config, out } => train::cmd_train(&demos, config.as_deref(), &out_dir(out)),
        Command::PlotDump { log, out } => dump::cmd_plot_dump(&log, &out_dir(out)),
        Command::Calibrate { tick, out } => train::cmd_calibrate(tick, &out_dir(out)),
        Command::GenDemos { count, seed, out } => {
            let cfg = SyntheticConfig {
                count,
                seed,
                ..SyntheticConfig::default()
            };
            train::cmd_gen_demos(&cfg, &out_dir(out))
        }
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
