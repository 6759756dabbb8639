use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("n_fft must be a positive even integer, got {0}")]
    InvalidFftSize(usize),

    #[error("hop must be in 1..=n_fft ({n_fft}), got {hop}")]
    InvalidHop { hop: usize, n_fft: usize },

    #[error("signal is empty")]
    EmptySignal,

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("n_fft mismatch: expected {expected}, got {actual}")]
    FftSizeMismatch { expected: usize, actual: usize },

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },

    #[error("phase rotation of the DC bin must be 0, got {0}")]
    NonZeroDcPhase(f64),

    #[error("window overlap sum vanishes at output sample {0}")]
    ZeroEnvelope(usize),

    #[error("time shift {delta} exceeds the bound of {bound} samples")]
    ShiftOutOfBounds { delta: f64, bound: f64 },

    #[error("invalid filter spec: {0}")]
    InvalidFilter(String),

    #[error("invalid policy config: {0}")]
    InvalidPolicy(String),

    #[error("invalid metric config: {0}")]
    InvalidMetric(String),

    #[error("batch is empty")]
    EmptyBatch,
}
