use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("network matrix is singular")]
    SingularNetwork,

    #[error("simulation diverged at t = {time:.4} s (bus {bus}, |dw| = {value:.3e} pu)")]
    Divergence { time: f64, bus: usize, value: f64 },

    #[error("simulation failed for h = {h} s, P_E = {pe} pu: {source}")]
    SweepPoint {
        h: f64,
        pe: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("unusable channel {channel}: {bad} of {len} points are bad")]
    UnusableChannel { channel: String, bad: usize, len: usize },

    #[error("bad magic in {0}")]
    BadMagic(String),

    #[error("unsupported format version {0}")]
    Version(String),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("checksum mismatch in {what}: stored {stored:08x}, computed {computed:08x}")]
    Checksum { what: String, stored: u32, computed: u32 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("non-finite gradient in batch {batch}")]
    NonFiniteGradient { batch: usize },

    #[error("training diverged at epoch {epoch}: val MSE {val_mse:.4e} vs initial {initial:.4e}")]
    TrainingDiverged { epoch: usize, val_mse: f64, initial: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("combinatorial limit exceeded: {0} subsets")]
    TooManySubsets(u128),

    #[error("incompatible checkpoint and bundle: model {model}, bundle {bundle}")]
    Incompatible { model: String, bundle: String },

    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Config(_) | Error::Locked(_) => 1,
            Error::SingularNetwork
            | Error::Divergence { .. }
            | Error::NonFiniteGradient { .. }
            | Error::TrainingDiverged { .. } => 3,
            Error::SweepPoint { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
