use alloc::string::String;

/// Errors raised by the simulator, encoders and trainers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {what}")]
    Divergence { what: &'static str },

    #[error("trial diverged at step {step}: {source}")]
    TrialDiverged {
        step: usize,
        #[source]
        source: alloc::boxed::Box<SimError>,
    },

    #[error("rate {rate} Hz with dt {dt} s gives per-step probability above 1")]
    EncodingSaturation { rate: f64, dt: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("mismatch draw for {param} stayed invalid after {attempts} attempts")]
    MismatchRejected { param: &'static str, attempts: usize },
}

pub type Result<T, E = SimError> = core::result::Result<T, E>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(SimError::Dimension {
            what,
            expected,
            found,
        });
    }
    Ok(())
}
