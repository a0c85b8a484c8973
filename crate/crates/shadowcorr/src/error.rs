//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A numeric input was outside the domain of the operation.
    #[error("domain error: {what} must be {requirement}, got {value}")]
    Domain {
        what: &'static str,
        requirement: &'static str,
        value: f64,
    },

    /// A correlation of exactly +/-1 was passed to a routine that needs |rho| < 1.
    #[error("degenerate correlation rho_h = {rho_h}: use the closed-form limit")]
    DegenerateCorrelation { rho_h: f64 },

    /// A correlation strictly inside (-1, 1) was passed to the closed-form limit.
    #[error("rho_h = {rho_h} is not degenerate: the closed form applies only at |rho_h| = 1")]
    NotDegenerate { rho_h: f64 },

    /// A link failure probability of exactly 0 or 1 makes the failure
    /// indicator constant, so its correlation is undefined.
    #[error("degenerate scenario: epsilon = {epsilon} gives a constant failure indicator")]
    DegenerateScenario { epsilon: f64 },

    /// The requested event correlation cannot be produced by any rho_h.
    #[error("target rho = {target} is unattainable for these links: attainable range is [{min}, {max}]")]
    TargetUnattainable { target: f64, min: f64, max: f64 },

    /// Too few failure events were observed to form an indicator correlation.
    #[error("insufficient events: link 1 saw {failures1} failures and link 2 saw {failures2} failures out of {n_samples} samples; the indicator correlation needs both links to have nonconstant indicators")]
    InsufficientEvents {
        failures1: u64,
        failures2: u64,
        n_samples: u64,
    },

    /// A simulation configuration violated its invariants.
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    /// An internal numerical consistency check failed.
    #[error("internal numerical failure: {0}")]
    Internal(String),
}
