//! Command-line front end.
//!
//! Every subcommand resolves its configuration as defaults, then an
//! optional JSON file, then flags; creates a fresh run directory; echoes the
//! resolved configuration there as `config.json`; and finishes by writing
//! `report.json`, which is also printed to stdout. Failures print one JSON
//! object to stderr.

mod commands;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
pub use commands::*;
pub use report::{Report, VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

pub const CONFIG_FILE: &str = "config.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(name = "dagr", version, about = "Saliency-guided video quality assessment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the saliency network and write a checkpoint plus loss curve.
    TrainSaliency(TrainSaliencyArgs),
    /// Train the quality model on frozen saliency maps.
    TrainVqa(TrainVqaArgs),
    /// Score a trained quality model on one split.
    Eval(EvalArgs),
    /// Print the analytical cost table.
    Flops(FlopsArgs),
    /// Run the finite-difference gradient suite.
    Gradcheck(GradcheckArgs),
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
    /// Run an ablation sweep.
    Sweep(SweepArgs),
    /// Export per-video register-token embeddings as CSV.
    ExportEmbeddings(ExportEmbeddingsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON file with configuration values; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exact run directory. Must not exist.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    /// Parent of timestamped run directories.
    #[arg(long, default_value = "runs")]
    pub out_root: PathBuf,
}

/// Defaults overlaid by the optional config file.
pub fn load_config<C: DeserializeOwned + Default>(path: Option<&Path>) -> Result<C> {
    let Some(path) = path else {
        return Ok(C::default());
    };
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Creates the run directory: `--run-dir` verbatim, otherwise
/// `<out-root>/<UTC timestamp>-seed<seed>`.
pub fn create_run_dir(common: &CommonArgs, seed: u64) -> Result<PathBuf> {
    let dir = match &common.run_dir {
        Some(d) => d.clone(),
        None => {
            let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
            common.out_root.join(format!("{stamp}-seed{seed}"))
        }
    };
    if dir.exists() {
        return Err(Error::Config(format!("run directory {} already exists", dir.display())));
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::format("json", e))?;
    bytes.push(b'\n');
    write_file(path, bytes)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Verification(_) => EXIT_VERIFICATION,
        Error::Ablation { source, .. } => exit_code(source),
        _ => EXIT_RUNTIME,
    }
}

pub fn error_json(e: &Error) -> serde_json::Value {
    serde_json::json!({"error": e.kind(), "message": e.to_string()})
}

/// Result of a finished command: its report and the exit status to use.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub run_dir: PathBuf,
    pub exit: i32,
}

pub fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::TrainSaliency(a) => cmd_train_saliency(&a),
        Command::TrainVqa(a) => cmd_train_vqa(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Flops(a) => cmd_flops(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::ExportEmbeddings(a) => cmd_export_embeddings(&a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            match serde_json::to_string_pretty(&out.report) {
                Ok(s) => println!("{s}"),
                Err(e) => log::error!("report: {e}"),
            }
            out.exit
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}
