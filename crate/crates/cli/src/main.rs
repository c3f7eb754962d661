//! `intentgate`: gate recorded decoder output, evaluate calibration and thresholds, run the
//! synthetic experiments, benchmark the gate and verify traces.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error, 3 internal error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Failure, InputError};

#[derive(Debug, Parser)]
#[command(name = "intentgate", version, about = "Runtime safety gate for decoded motor-imagery intents")]
struct Cli {
    /// Suppress notes on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gate a posterior stream and write a trace.
    Monitor(MonitorCmd),
    /// Calibration report (ECE, MCE, ACE, temperature) for labeled posteriors.
    Calibrate(CalibrateCmd),
    /// Single-threshold confidence gate swept over a grid.
    Sweep(SweepCmd),
    /// Run the SNR-degradation experiment of a scenario.
    NoiseTest(NoiseTestCmd),
    /// Measure per-step gate latency.
    Bench(BenchCmd),
    /// Re-run a trace and check that every decision reproduces.
    ReplayVerify(ReplayCmd),
    /// Write a synthetic posterior stream.
    Generate(GenerateCmd),
}

/// Overrides for the monitor configuration; names follow its fields.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Monitor configuration file (TOML); flags below override it.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Normalized-entropy ceiling (default 0.75).
    #[arg(long)]
    pub tau_h: Option<f64>,
    /// Artifact z-score ceiling (default 2.5).
    #[arg(long)]
    pub tau_a: Option<f64>,
    /// Oscillation-index ceiling (default 0.3).
    #[arg(long)]
    pub tau_omega: Option<f64>,
    /// Calibration mixing weight toward the decoder posterior (default 0.8).
    #[arg(long)]
    pub alpha_m: Option<f64>,
    /// Intent history length in frames (default 10).
    #[arg(long)]
    pub k_frames: Option<usize>,
    /// Halt while the history is shorter than K frames (default true).
    #[arg(long)]
    pub warmup_halt: Option<bool>,
    /// Checks to disable: entropy, artifact, oscillation, calibration, logical.
    #[arg(long, value_delimiter = ',', value_name = "CHECK")]
    pub ablate: Vec<String>,
}

/// Objects the intents refer to; unset fields default to the problem's first object of each type.
#[derive(Debug, Clone, Default, Args)]
pub struct ContextArgs {
    /// Robot performing every action.
    #[arg(long)]
    pub robot: Option<String>,
    /// Item for GRASP and RELEASE.
    #[arg(long)]
    pub item: Option<String>,
    /// Target location for MOVE_TO (and where RELEASE puts the item).
    #[arg(long)]
    pub location: Option<String>,
    /// Target orientation for ROTATE.
    #[arg(long)]
    pub orientation: Option<String>,
}

#[derive(Debug, Args)]
pub struct MonitorCmd {
    /// Posterior stream: `frame,grasp,release,move_to,rotate[,label]` per line.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Raw EEG (CSV or binary) whose preprocessed windows feed the artifact check, one per frame.
    #[arg(long)]
    pub signal: Option<PathBuf>,
    /// PDDL domain; the bundled assistive-robot domain by default.
    #[arg(long)]
    pub domain: Option<PathBuf>,
    /// PDDL problem; the bundled kitchen problem by default.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Trace output (JSON lines).
    #[arg(long, short = 'o')]
    pub trace: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub ctx: ContextArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateCmd {
    /// Labeled posterior stream.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub bins: usize,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    /// Labeled posterior stream.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Thresholds: a comma list or `start:stop:step`; 0.1..1.0 by 0.1 by default.
    #[arg(long)]
    pub grid: Option<String>,
    /// Extra objective weights α,β,γ on safety, (1 − intervention) and F1.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, value_name = "A,B,C")]
    pub weights: Option<Vec<f64>>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Scenario file (TOML); the default SNR-ramp scenario when omitted.
    #[arg(long, short)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Calibration bins for the experiment's report.
    #[arg(long)]
    pub bins: Option<usize>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct NoiseTestCmd {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Directory for result.json, summary.txt, trace.jsonl (and ablation.json).
    #[arg(long, short)]
    pub out_dir: PathBuf,
    /// Also run every ablation variant.
    #[arg(long)]
    pub ablation_suite: bool,
}

#[derive(Debug, Args)]
pub struct BenchCmd {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Timed steps (at least).
    #[arg(long, default_value_t = 100_000)]
    pub steps: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayCmd {
    #[arg(long, short)]
    pub trace: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateCmd {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Posterior stream output (repetition 0 of the scenario).
    #[arg(long, short, required_unless_present = "scenario_template")]
    pub output: Option<PathBuf>,
    /// Print the default scenario as TOML and exit.
    #[arg(long)]
    pub scenario_template: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let notes = commands::Notes { quiet: cli.quiet };
    let result = match cli.command {
        Command::Monitor(c) => commands::monitor(&c, notes),
        Command::Calibrate(c) => commands::calibrate(&c, notes),
        Command::Sweep(c) => commands::sweep(&c, notes),
        Command::NoiseTest(c) => commands::noise_test(&c, notes),
        Command::Bench(c) => commands::bench(&c, notes),
        Command::ReplayVerify(c) => commands::replay_verify(&c, notes),
        Command::Generate(c) => commands::generate(&c, notes),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<Failure>() {
                1
            } else if e.chain().any(|c| c.is::<InputError>()) {
                2
            } else {
                3
            })
        }
    }
}
