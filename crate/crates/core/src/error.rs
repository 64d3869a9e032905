use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report. The variant name doubles as the
/// stable error identifier printed by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("dimensions {height}x{width} overflow the supported size")]
    DimensionOverflow { height: u64, width: u64 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("unknown kind '{0}'")]
    UnknownKind(String),

    #[error("invalid slice: {0}")]
    InvalidSlice(String),

    #[error("direct DFT limited to 64x64, got {height}x{width}")]
    SizeGuard { height: usize, width: usize },

    #[error("acceleration must be positive")]
    ZeroAcceleration,

    #[error("fraction {fraction} needs {needed} columns but the center band alone takes {center}")]
    FractionBelowCenter {
        fraction: f64,
        needed: usize,
        center: usize,
    },

    #[error("fraction {0} out of range")]
    FractionOutOfRange(f64),

    #[error("pitch bisection failed: {0}")]
    BisectionFailure(String),

    #[error("malformed mask sidecar: {0}")]
    MalformedSidecar(String),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{height}x{width} is not divisible by {factor}")]
    DivisibilityViolation { height: usize, width: usize, factor: usize },

    #[error("degrade spec violation: {0}")]
    SpecViolation(String),

    #[error("degenerate intensity range: p_lo={lo} p_hi={hi}")]
    DegenerateRange { lo: f64, hi: f64 },

    #[error("constant slice has no histogram domain")]
    ConstantSlice,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("window {window} larger than image {height}x{width}")]
    WindowTooLarge { window: usize, height: usize, width: usize },

    #[error("cannot aggregate an empty list")]
    EmptyInput,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid bench config: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Stable variant name, e.g. `FractionBelowCenter`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Io(_) => "Io",
            Error::MalformedHeader(_) => "MalformedHeader",
            Error::DimensionOverflow { .. } => "DimensionOverflow",
            Error::NonFinite { .. } => "NonFinite",
            Error::UnknownKind(_) => "UnknownKind",
            Error::InvalidSlice(_) => "InvalidSlice",
            Error::SizeGuard { .. } => "SizeGuard",
            Error::ZeroAcceleration => "ZeroAcceleration",
            Error::FractionBelowCenter { .. } => "FractionBelowCenter",
            Error::FractionOutOfRange(_) => "FractionOutOfRange",
            Error::BisectionFailure(_) => "BisectionFailure",
            Error::MalformedSidecar(_) => "MalformedSidecar",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DivisibilityViolation { .. } => "DivisibilityViolation",
            Error::SpecViolation(_) => "SpecViolation",
            Error::DegenerateRange { .. } => "DegenerateRange",
            Error::ConstantSlice => "ConstantSlice",
            Error::InvalidParams(_) => "InvalidParams",
            Error::WindowTooLarge { .. } => "WindowTooLarge",
            Error::EmptyInput => "EmptyInput",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::InvalidConfig(_) => "InvalidConfig",
        }
    }
}
