//! Experiment driver: dataset generation, classifier and AC-GAN training,
//! evaluation reports and latent-space exploration.
//!
//! Exit codes: 0 success, 2 configuration, 3 I/O, 4 numeric divergence,
//! 5 artifact mismatch.

pub mod commands;
pub mod config;

use std::fs::{self, File, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use acgan_core::kv::KvMap;
use acgan_core::{Error, Result};
use clap::{Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "acgan-lab", version, about = "AC-GAN experiments at desk scale")]
pub struct Cli {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `run.out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate the training and held-out shapes datasets.
    GenData,
    /// Train the surrogate classifier used for evaluation.
    TrainClassifier,
    /// Train (or resume) the AC-GAN.
    TrainAcgan,
    /// Intra-class MS-SSIM of generated and real images.
    EvalDiversity,
    /// Classifier accuracy against evaluation resolution.
    EvalCurve,
    /// Inception score under the surrogate classifier.
    EvalIscore,
    /// Per-class diversity against accuracy.
    EvalJoint,
    /// Nearest training images of generated samples.
    EvalNn,
    /// Diversity as a function of the number of classes trained on.
    SweepClasscount,
    /// Latent interpolation strip for one class.
    Interpolate,
    /// Fixed latent rows across all classes.
    StyleGrid,
    /// gen-data through every evaluation and exploration.
    RunAll,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Shape(_) => 2,
        Error::Io(_) => 3,
        Error::NonFinite(_) => 4,
        Error::Format(_) | Error::Checksum { .. } | Error::Version { .. } | Error::Mismatch(_) => 5,
    }
}

/// Exclusive claim on an output directory, released on drop.
struct OutputLock {
    path: PathBuf,
    _file: File,
}

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        let file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == ErrorKind::AlreadyExists {
                Error::Io(std::io::Error::new(
                    ErrorKind::AlreadyExists,
                    format!("{} is in use by another run (remove {} if stale)", dir.display(), path.display()),
                ))
            } else {
                Error::Io(e)
            }
        })?;
        Ok(Self { path, _file: file })
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(path) => KvMap::parse(&fs::read_to_string(path)?)?,
        None => KvMap::new(),
    };
    RunConfig::resolve(&file, cli.seed, cli.out.clone())
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let _lock = OutputLock::acquire(&cfg.out)?;
    acgan_core::container::write_atomic(&cfg.out.join("resolved.cfg"), cfg.to_kv().to_string().as_bytes())?;
    use commands as c;
    match cli.command {
        Command::GenData => c::gen_data(&cfg),
        Command::TrainClassifier => c::train_classifier(&cfg),
        Command::TrainAcgan => c::train_acgan(&cfg),
        Command::EvalDiversity => c::eval_diversity(&cfg),
        Command::EvalCurve => c::eval_curve(&cfg),
        Command::EvalIscore => c::eval_iscore(&cfg),
        Command::EvalJoint => c::eval_joint(&cfg),
        Command::EvalNn => c::eval_nn(&cfg),
        Command::SweepClasscount => c::sweep_classcount(&cfg),
        Command::Interpolate => c::interpolate(&cfg),
        Command::StyleGrid => c::style_grid(&cfg),
        Command::RunAll => c::run_all(&cfg),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
