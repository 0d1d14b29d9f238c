use thiserror::Error;

/// Errors shared across the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid exponent pair or other parameter-level violation.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A bracketing root find could not establish or keep a sign change.
    #[error("root bracketing failed: {0}")]
    Bracket(String),

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge: requested {requested:e}, achieved {achieved:e} on [{lo}, {hi}]")]
    QuadratureFailure {
        requested: f64,
        achieved: f64,
        lo: f64,
        hi: f64,
    },

    /// The denominator of beta_R is too close to zero at this R.
    #[error("ill-conditioned beta_R: (phi0, chi_R eta0)_L2 = {denominator:e}")]
    IllConditionedBeta { denominator: f64 },

    /// The requested construction does not apply to this (p, q) cell.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// The R schedule was exhausted without meeting the success criteria.
    #[error("R schedule exhausted: {0}")]
    ScheduleExhausted(String),

    /// Time integration produced NaN or overflow.
    #[error("evolution aborted at t = {t}: {reason}")]
    EvolutionAborted { t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
