//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by simulation, measure construction, and experiment code.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument violated its documented range.
    #[error("parameter out of range: {0}")]
    Parameter(String),

    /// A complex argument lay outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Loewner composition produced a non-finite value.
    #[error("trace breakdown at step {step}")]
    Trace { step: usize },

    /// Backward flow passed through the exclusion zone around a curve tip.
    #[error("tip-zone singularity at step {step} (|discriminant| = {discriminant:.3e})")]
    TipZone { step: usize, discriminant: f64 },

    /// A probe point was absorbed by the evolving hull.
    #[error("point swallowed at capacity time {t}")]
    Swallowed { t: f64 },

    /// A probe radius left the range the field sampler is validated for.
    #[error("probe radius {radius:.3e} outside validated range [{min:.3e}, {max:.3e}]")]
    Regime { radius: f64, min: f64, max: f64 },

    /// Pairwise covariance evaluation failed for a probe pair.
    #[error("covariance evaluation failed for probe pair ({i}, {j}): {reason}")]
    Covariance { i: usize, j: usize, reason: String },

    /// Covariance factorization failed even after jitter escalation.
    #[error("ill-conditioned ensemble: factorization failed at jitter {jitter:.3e}")]
    IllConditioned { jitter: f64 },

    /// Chaos weights requested for an atom with no matching field probe.
    #[error("probe/atom misalignment at atom {index}")]
    Alignment { index: usize },

    /// Too many grid cells were excluded for the run to be trustworthy.
    #[error("quality failure: {0}")]
    Quality(String),

    /// A stabilization loop ran out of budget before resolving.
    #[error("unresolved after budget: bracket [{lower:.6e}, {upper:.6e}]")]
    Unresolved { lower: f64, upper: f64 },

    /// Config file missing, malformed, or containing unknown keys.
    #[error("config error: {0}")]
    Config(String),

    /// Persisted record failed its integrity hash check.
    #[error("record hash mismatch: stored {stored}, recomputed {computed}")]
    HashMismatch { stored: String, computed: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
