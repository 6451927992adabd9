use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown element symbol `{symbol}`")]
    UnknownElement { line: usize, symbol: String },

    #[error("frame {frame} (line {line}): {message}")]
    FrameMismatch { frame: usize, line: usize, message: String },

    #[error("invalid molecule: {0}")]
    InvalidMolecule(String),

    #[error("basis set has no entry for element Z={0}")]
    MissingElement(u32),

    #[error("orbital type `{0}` is not in the orbital token table")]
    UnknownOrbital(String),

    #[error("degenerate geometry: atoms {i} and {j} are {distance:.3e} Bohr apart")]
    DegenerateGeometry { i: usize, j: usize, distance: f64 },

    #[error("overlap matrix is numerically singular (smallest eigenvalue {min_eigenvalue:.3e})")]
    LinearDependence { min_eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("coefficients are not orthonormal: max |C^T S C - I| = {deviation:.3e}")]
    NotOrthonormal { deviation: f64 },

    #[error("orthogonalization failed: Q_raw is rank deficient after jitter")]
    RankDeficient,

    #[error("non-finite gradient in parameter block `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss at learner step {step}")]
    NonFiniteLoss { step: usize },

    #[error("unstable Langevin chain: {rejected} of {steps} steps rejected at dt={dt:e}")]
    UnstableChain { rejected: usize, steps: usize, dt: f64 },

    #[error("sampler iteration {iteration}: {source}")]
    Sampler {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot sample: {0}")]
    EmptySource(&'static str),

    #[error("frame {frame}: reference SCF result missing or unconverged")]
    UnconvergedReference { frame: usize },

    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad user input (files, flags, configuration)
    /// rather than by a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::UnknownElement { .. }
                | Error::FrameMismatch { .. }
                | Error::InvalidMolecule(_)
                | Error::MissingElement(_)
                | Error::UnknownOrbital(_)
                | Error::Config { .. }
        )
    }
}
