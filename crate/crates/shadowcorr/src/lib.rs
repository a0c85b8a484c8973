//! Dual-connectivity reliability toolkit: computes, inverts, and
//! Monte-Carlo-verifies the mapping between the shadowing
//! cross-correlation of two wireless links and the correlation of their
//! failure events.
//!
//! A device duplicating packets over two links only loses a packet when
//! both links fade below threshold at once. With log-normal shadowing the
//! joint fade probability is a bivariate-normal orthant probability, so
//! the correlation of the two failure indicators follows from the
//! shadowing cross-correlation `rho_h`, the per-link fade margins, and
//! nothing else. This crate provides:
//!
//! * [`gaussian`] — high-accuracy Q-function, its inverse, and the normal
//!   density;
//! * [`bivariate`] — the orthant probability by two independent numerical
//!   methods that cross-validate each other;
//! * [`mapping`] — link budgets to margins, margins to reliabilities, the
//!   `rho_h -> rho` map, its inverse, and the residual dual-link failure
//!   probability;
//! * [`montecarlo`] — a reproducible sampling oracle with plain and
//!   mean-shifted (importance) estimators;
//! * [`cli`] — the `shadowcorr` command-line tool.

pub mod bivariate;
pub mod cli;
pub mod error;
pub mod gaussian;
pub mod mapping;
pub mod montecarlo;

pub use bivariate::{
    upper_tail, upper_tail_degenerate, upper_tail_single_integral, upper_tail_second_method,
    OrthantMethod, OrthantProbability, ShadowingCorrelation,
};
pub use error::{Error, Result};
pub use gaussian::{normal_pdf, q_function, q_inverse, StandardScore, UnitProbability};
pub use mapping::{
    dual_failure_probability, event_correlation, indicator_sigma, invert_correlation,
    link_reliability, max_event_correlation, normalized_margin, table_one, CorrelationResult,
    DualLinkScenario, LinkBudget, LinkReliability,
};
pub use montecarlo::{
    estimate_event_correlation, estimate_joint_failure, sample_pair, McEstimate, McMethod,
    ShadowingSamplePair, SimConfig,
};
