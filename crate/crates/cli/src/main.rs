//! `mist`: simulate speckle data, reconstruct phase and dark-field maps, and
//! measure contrast-to-noise.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or format error,
//! 4 degenerate system.

mod cnr;
mod reconstruct;
mod report;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mist_core::io::FieldFormat;
use mist_core::{Boundary, MistError, StencilKind, StencilScheme};

#[derive(Parser)]
#[command(name = "mist", version, about = "Speckle-tracking phase and dark-field retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic reference/sample pairs with ground truth.
    Simulate(simulate::Args),
    /// Recover the phase Laplacian, phase and diffusion maps from pairs.
    Reconstruct(reconstruct::Args),
    /// Contrast-to-noise ratio between two regions of a field.
    Cnr(cnr::Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Fd,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Mirror,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Raw,
    Pfm,
}

impl From<FormatArg> for FieldFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Raw => FieldFormat::Raw,
            FormatArg::Pfm => FieldFormat::Pfm,
        }
    }
}

/// Spectral derivatives are periodic by construction, so the boundary
/// defaults accordingly when not given.
pub fn scheme_from_args(scheme: SchemeArg, boundary: Option<BoundaryArg>) -> Result<StencilScheme, CliError> {
    let kind = match scheme {
        SchemeArg::Fd => StencilKind::FivePointFd,
        SchemeArg::Spectral => StencilKind::SpectralFourier,
    };
    let boundary = match (boundary, scheme) {
        (Some(BoundaryArg::Mirror), _) => Boundary::Mirror,
        (Some(BoundaryArg::Periodic), _) | (None, SchemeArg::Spectral) => Boundary::Periodic,
        (None, SchemeArg::Fd) => Boundary::Mirror,
    };
    StencilScheme::new(kind, boundary).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn scheme_name(scheme: StencilScheme) -> (&'static str, &'static str) {
    let kind = match scheme.kind() {
        StencilKind::FivePointFd => "fd",
        StencilKind::SpectralFourier => "spectral",
    };
    let boundary = match scheme.boundary() {
        Boundary::Mirror => "mirror",
        Boundary::Periodic => "periodic",
    };
    (kind, boundary)
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] MistError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                MistError::InvalidArgument(_) | MistError::DegenerateRoi(_) => 2,
                MistError::DegenerateSystem(_) => 4,
                _ => 3,
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => simulate::run(&args),
        Command::Reconstruct(args) => reconstruct::run(&args),
        Command::Cnr(args) => cnr::run(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mist: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
