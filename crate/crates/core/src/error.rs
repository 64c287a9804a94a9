use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the model, simulator and estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("flux inversion did not converge for currents ({i_d} A, {i_q} A) after {iterations} iterations (residual {residual:.3e} A)")]
    NonConvergence {
        i_d: f64,
        i_q: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("integration step {dt:.3e} s exceeds 1/50 of the waveform period {period:.3e} s")]
    StepTooLarge { dt: f64, period: f64 },

    #[error("run did not reach a periodic steady state within {periods} periods (last drift {drift:.3e} Wb per period)")]
    Unsettled { periods: usize, drift: f64 },

    #[error("only {available:.2} whole waveform periods remain after the discard window (need at least 2)")]
    TooShort { available: f64 },

    #[error("trace resolves only {samples_per_period:.1} samples per waveform period (need at least 16)")]
    Unresolved { samples_per_period: f64 },

    #[error("ripple amplitude {i_tilde:.3e} A on the {axis}-axis is below the noise floor {floor:.3e} A")]
    ZeroRipple { axis: char, i_tilde: f64, floor: f64 },

    #[error("regression `{what}` is rank deficient")]
    RankDeficient { what: &'static str },

    #[error("waveform samples do not have zero mean (mean {mean:.3e}, peak {peak:.3e})")]
    NonZeroMean { mean: f64, peak: f64 },

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("config error in {}: {message}", .path.display())]
    Config { path: PathBuf, message: String },

    #[error("run `{label}`: {source}")]
    Run {
        label: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Wraps an error with the label of the experiment run that produced it.
    pub fn in_run(self, label: impl Into<String>) -> Self {
        Error::Run {
            label: label.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through run labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Run { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for configuration and input-file problems, false for numerical failures.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self.root(),
            Error::InvalidParameter { .. }
                | Error::Config { .. }
                | Error::MissingFile(_)
                | Error::Io { .. }
                | Error::Trace(_)
                | Error::NonZeroMean { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
