//! `deixis` command line and grounding service.

pub mod commands;
pub mod config;
pub mod serve;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::Config;

/// Exit code for domain failures (bad input data, planning or runtime errors).
pub const EXIT_DOMAIN: i32 = 1;
/// Exit code for malformed command lines.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn domain(e: impl std::fmt::Display) -> Self {
        CliError::Domain(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Domain(_) => EXIT_DOMAIN,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "deixis",
    version,
    about = "Ground speech and pointing into robot policy programs"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalOpts {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Category ontology file.
    #[arg(long, global = true)]
    pub ontology: Option<PathBuf>,
    /// Replay transcript store directory.
    #[arg(long, global = true)]
    pub transcripts: Option<PathBuf>,
    /// Trained gesture models; without them scripted gestures are observed as is.
    #[arg(long, global = true)]
    pub models: Option<PathBuf>,
    /// Completion backend: rule, replay or remote.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Default keypoint noise, meters.
    #[arg(long, global = true)]
    pub noise: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or inspect scenes.
    #[command(subcommand)]
    Scene(SceneCmd),
    /// Synthesize hands, train and evaluate classifiers.
    #[command(subcommand)]
    Gesture(GestureCmd),
    /// Resolve what a hand points at.
    Resolve(ResolveArgs),
    /// Plan one instruction.
    Plan(PlanArgs),
    /// Run one scenario and print its metrics.
    Run(RunArgs),
    /// Run every scenario in a directory and print CSV.
    Batch(BatchArgs),
    /// Spacing by distance referent accuracy grid.
    Sweep(SweepArgs),
    /// Score a planner on gesture-instruction cases.
    GiEval(GiEvalArgs),
    /// Plan through the remote backend and save its completions for replay.
    Record(RecordArgs),
    /// Serve the grounding endpoints over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum SceneCmd {
    /// Generate a scene from a spec file or a drawer grid shorthand.
    Gen(SceneGenArgs),
    /// Summarize a scene file.
    Show { file: PathBuf },
}

#[derive(Debug, Args)]
pub struct SceneGenArgs {
    /// SceneSpec JSON file.
    #[arg(long, conflicts_with = "drawers")]
    pub spec: Option<PathBuf>,
    /// Drawer grid as ROWSxCOLS.
    #[arg(long)]
    pub drawers: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub spacing: f64,
    /// Center of drawer_0_0 as x,y,z.
    #[arg(long, default_value = "-0.35,-0.35,1.5")]
    pub origin: String,
}

#[derive(Debug, Subcommand)]
pub enum GestureCmd {
    /// Synthesize one hand recording or a labelled dataset.
    Synth(SynthArgs),
    /// Train both classifiers.
    Train(TrainArgs),
    /// Held-out accuracy of trained classifiers.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    Static,
    Dynamic,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Gesture class for a single recording.
    #[arg(long, required_unless_present = "dataset", conflicts_with = "dataset")]
    pub class: Option<String>,
    /// Synthesize a labelled dataset instead (JSON lines).
    #[arg(long, value_enum)]
    pub dataset: Option<DatasetKind>,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Point the finger at x,y,z.
    #[arg(long)]
    pub target: Option<String>,
    /// Wrist position x,y,z.
    #[arg(long)]
    pub wrist: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub static_data: Option<PathBuf>,
    #[arg(long)]
    pub dynamic_data: Option<PathBuf>,
    /// Samples per class when synthesizing missing data.
    #[arg(long, default_value_t = 500)]
    pub per_class: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset (JSON lines); its test split is scored.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolveMode {
    Object,
    Location,
    Direction,
}

#[derive(Debug, Args)]
pub struct ResolveArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Hand file: one frame or an array of frames (the last is used).
    #[arg(long)]
    pub hand: PathBuf,
    /// Spoken object category, required for object mode.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_enum, default_value_t = ResolveMode::Object)]
    pub mode: ResolveMode,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub speech: String,
    /// Gesture label, e.g. pointing or "thumbs up".
    #[arg(long)]
    pub gesture: Option<String>,
    /// Free-text gesture description; overrides --gesture.
    #[arg(long)]
    pub gesture_description: Option<String>,
    /// Use the extended primitive catalog.
    #[arg(long)]
    pub extended: bool,
    /// Stop after parsing and validation.
    #[arg(long)]
    pub validate_only: bool,
    /// Dry-run the program against this scene (needs --hand).
    #[arg(long, requires = "hand")]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub hand: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[arg(long)]
    pub dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated spacings, meters.
    #[arg(long, default_value = "0.05,0.15,0.30")]
    pub spacings: String,
    /// Comma-separated distances, meters.
    #[arg(long, default_value = "0.5,1.0,1.5")]
    pub distances: String,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct GiEvalArgs {
    #[arg(long)]
    pub cases: PathBuf,
    /// Also write per-case outcomes as JSON here.
    #[arg(long)]
    pub details: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    /// Record every prompt of a scenario run.
    #[arg(long, conflicts_with = "speech")]
    pub scenario: Option<PathBuf>,
    #[arg(long, required_unless_present = "scenario")]
    pub speech: Option<String>,
    #[arg(long)]
    pub gesture: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Directory of scene files addressable by name in requests.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
