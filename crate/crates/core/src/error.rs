//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input samples are all zero (or non-finite); no direction to normalize.
    #[error("degenerate mode: {0}")]
    DegenerateMode(String),

    /// Operands live on different grids or have inconsistent sizes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Byte-level format violation (bad magic, version, truncation, NaNs).
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// The iterative eigensolver did not converge; surfaced, never truncated.
    #[error("eigendecomposition did not converge for a {0}x{0} kernel")]
    EigenNonConvergence(usize),

    /// A vacuum-calibration spectrum contains photon-carrying modes.
    #[error("vacuum spectrum contaminated: max |n_i| = {max_photon:.4e} exceeds {limit:.4e}")]
    Contaminated { max_photon: f64, limit: f64 },

    /// An estimated photon number sits at or below the statistical floor.
    #[error("statistical floor: {0}; increase the number of waveforms")]
    StatisticalFloor(String),

    /// More than two eigenvalues above the vacuum band.
    #[error("unsupported multimode spectrum: {count} modes above the vacuum band")]
    UnsupportedMultimode { count: usize },
}
