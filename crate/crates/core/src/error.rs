use thiserror::Error;

use crate::potentials::Violation;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures of the numerical operations. Each variant carries a stable
/// upper-case code used in diagnostics and CSV error columns.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Invalid(#[from] Violation),
    #[error("DOMAIN: {0}")]
    Domain(String),
    #[error("K_OUT_OF_RANGE: k = {k} outside ({lo}, {hi})")]
    KOutOfRange { k: f64, lo: f64, hi: f64 },
    #[error("LENGTH: need at least {need} entries, got {got}")]
    Length { need: usize, got: usize },
    #[error("DEGENERATE: 1 + mu^2 - 2 mu cos k vanishes (mu = {mu}, k = {k})")]
    Degenerate { mu: f64, k: f64 },
    #[error("ZERO_RADIUS: both Prüfer components vanish at n = {n}")]
    ZeroRadius { n: usize },
    #[error("NU_TOO_LARGE: |nu| = {0} >= 1/2")]
    NuTooLarge(f64),
    #[error("RANGE: {0}")]
    Range(String),
    #[error("NOT_MONOTONE: {0}")]
    NotMonotone(String),
    #[error("KAPPA_ZERO: kappa = {0:e}")]
    KappaZero(f64),
    #[error("PRECONDITION: {0}")]
    Precondition(String),
    #[error("WINDOW_OVERFLOW: {0}")]
    WindowOverflow(String),
    #[error("NO_RESONANCE: best distance {best:e} exceeds 10 x target {target:e}")]
    NoResonance { best: f64, target: f64 },
    #[error("CONTAINMENT: {0}")]
    Containment(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Invalid(v) => v.code.as_str(),
            Error::Domain(_) => "DOMAIN",
            Error::KOutOfRange { .. } => "K_OUT_OF_RANGE",
            Error::Length { .. } => "LENGTH",
            Error::Degenerate { .. } => "DEGENERATE",
            Error::ZeroRadius { .. } => "ZERO_RADIUS",
            Error::NuTooLarge(_) => "NU_TOO_LARGE",
            Error::Range(_) => "RANGE",
            Error::NotMonotone(_) => "NOT_MONOTONE",
            Error::KappaZero(_) => "KAPPA_ZERO",
            Error::Precondition(_) => "PRECONDITION",
            Error::WindowOverflow(_) => "WINDOW_OVERFLOW",
            Error::NoResonance { .. } => "NO_RESONANCE",
            Error::Containment(_) => "CONTAINMENT",
        }
    }

    /// Input errors (as opposed to failures of a numerical check on valid input).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_)
                | Error::Domain(_)
                | Error::KOutOfRange { .. }
                | Error::Length { .. }
                | Error::Range(_)
                | Error::Precondition(_)
        )
    }
}
