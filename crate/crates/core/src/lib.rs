//! Error rates of random-subset majority voting over an ensemble of `m`
//! classifiers.
//!
//! For each example, `v` of the `m` voters (odd `v`) are drawn without
//! replacement and their majority is returned. If `i` of the `m` classifiers
//! are wrong on that example, the chance the vote is wrong is the
//! hypergeometric tail `r(m, i, v)`; averaging over a distribution `w` of
//! error counts gives the error curve `v -> sum_i w_i r(m, i, v)`.
//!
//! The crate provides:
//!
//! * [`exactmath`]: `r(m, i, v)` and its forward difference, exact for
//!   small `m` and in log space above that, plus binomial and chi-squared
//!   helpers.
//! * [`curves`]: distributions, the basis matrix and error curves.
//! * [`construct`]: distributions whose curve is minimized at a given `v`,
//!   including a max-gap linear program.
//! * [`estimate`]: picking `v` from validation data, by running the votes
//!   (direct) or by pushing the empirical error-count histogram through
//!   the basis (inference).
//! * [`bounds`]: simultaneous confidence bands on the curve.
//! * [`sim`]: seeded Monte Carlo checks of all of the above.

pub mod bounds;
pub mod construct;
pub mod curves;
pub mod error;
pub mod estimate;
pub mod exactmath;
pub mod sim;

pub use bounds::{
    binomial_box_constraints, direct_hoeffding_band, inference_hoeffding_band,
    inference_lp_bounds, x2_membership, BandEntry, BandMethod, BoxConstraints, ConfidenceBand,
    LpBackend,
};
pub use construct::lp::LpError;
pub use construct::{max_gap_lp, theorem4_distribution, GapCertificate};
pub use curves::{
    build_basis, error_curve, worst_case_all_voting, BasisMatrix, CurveSource,
    ErrorCountDistribution, ErrorCurve,
};
pub use error::{Error, Result};
pub use estimate::{
    direct_estimate, inference_estimate, select_voters, EmpiricalErrorCounts, EstimatorMethod,
    Selection, ValidationSample,
};
pub use exactmath::{basis_error_rate, delta_v, Arithmetic};
pub use sim::suite::{run_suite, Suite, SuiteConfig};
pub use sim::{SimulationReport, World};
