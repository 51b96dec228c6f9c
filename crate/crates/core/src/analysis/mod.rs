//! Offline verification of trajectories against the telescoping inequality,
//! the weight-sequence conditions and the high-probability bounds, plus the
//! Monte-Carlo resilience and rate estimators.
//!
//! Unlike the learner, the verifier reads the realized noise and the bundle
//! origins recorded in a [`Trajectory`](crate::dmd::Trajectory).

mod bounds;
mod lemma;
mod mgf;
mod rate;
mod wanes;
mod weights;

pub use bounds::{rate_constant, theoretical_gap_bound, BoundInputs, GapBound};
pub use lemma::{check_chainsum, check_lemma1, ChainSumCheck, LemmaContext, PerRoundCertificate};
pub use mgf::{admissible_lambdas, check_max_mgf, MaxMgfReport, MgfRow};
pub use rate::{fit_loglog, fit_rate, quartiles, validate_grid, RateFit, Summary, MIN_GRID, MIN_HORIZON};
pub use wanes::{clopper_pearson, estimate_wanes, ResilienceEstimate, MIN_TRIALS};
pub use weights::{build_weights, WeightCheck, WeightSequence};

/// Relative slack for deterministic inequality checks.
pub const INEQUALITY_SLACK: f64 = 1e-9;

/// Relative slack for Monte-Carlo moment checks.
pub const MGF_SLACK: f64 = 0.05;

pub(crate) fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + INEQUALITY_SLACK * (1.0 + rhs.abs())
}
