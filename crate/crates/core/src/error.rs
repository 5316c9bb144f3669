use thiserror::Error;

/// Errors raised by the physical and key-rate models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Total per-gate noise probability reached 1; the linear
    /// flux-to-probability conversion no longer holds.
    #[error("detector saturated: total per-gate noise probability {total:.6e} >= 1")]
    Saturation { total: f64 },

    #[error("degenerate channel: overall gain is zero (no signal and no background)")]
    DegenerateChannel,

    #[error("no positive key rate anywhere in mu interval [{lo}, {hi}]")]
    NoKey { lo: f64, hi: f64 },

    #[error(
        "no noise budget: {min_rate_bps} bps requested but only {dark_only_rate_bps:.3} bps \
         is reachable with dark counts alone"
    )]
    NoBudget {
        min_rate_bps: f64,
        dark_only_rate_bps: f64,
    },
}

impl ModelError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        ModelError::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
