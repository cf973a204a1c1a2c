//! Command-line pipeline: synthetic tacts, segmentation network training,
//! segmentation with uncertainty filtering, instance clustering, pose
//! estimation, scene-model export, scan quality and savings reports.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod manifest;
pub mod stages;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An upstream artifact a stage needs does not exist.
    #[error("{what} missing: {path}")]
    Missing { what: String, path: PathBuf },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] brownfield_core::error::Error),
}

impl CliError {
    /// 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }
}

#[derive(Debug, Parser)]
#[command(name = "brownfield", version, about = "Static factory models from labeled point clouds")]
pub struct Cli {
    /// TOML pipeline configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Re-run stages even when their artifacts are up to date.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate the training and test tacts with ground-truth manifests.
    Synth,
    /// Train the segmentation network on the training tacts.
    Train,
    /// Label the test tacts with the trained network.
    Segment,
    /// Score per-point uncertainty and drop uncertain points.
    Uncertainty,
    /// Compare clustering methods on the labeled test tacts.
    Cluster,
    /// Estimate object poses from the filtered segmentation.
    Pose,
    /// Write the estimated poses as scene-model XML.
    Export,
    /// Compare a measured cloud against a reference cloud.
    Quality {
        #[arg(long)]
        measured: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Yearly cost and savings of automated digitalization.
    Savings,
    /// Every stage in order.
    RunAll,
}

/// Resolved configuration for one invocation.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Command::Quality { measured, reference } = &cli.command {
        if measured.is_some() {
            cfg.quality.measured = measured.clone();
        }
        if reference.is_some() {
            cfg.quality.reference = reference.clone();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Progress goes to `out`, errors to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = resolve_config(&cli).and_then(|cfg| stages::Pipeline::new(cfg, cli.force, out).run(&cli.command));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
