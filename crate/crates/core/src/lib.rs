//! Sharp bounds on the relative treatment effect for ordinal outcomes.
//!
//! The relative treatment effect `gamma = pr{Y(1) > Y(0)} - pr{Y(1) < Y(0)}`
//! depends on the joint coupling of the two potential outcomes, which no
//! experiment identifies. This crate computes the sharp bounds implied by the
//! identifiable marginals, builds couplings that attain them, cross-checks
//! the closed forms against an exact transportation-program oracle, and
//! estimates everything from data, with bootstrap confidence intervals for
//! the identified set.

pub mod attainment;
pub mod bootstrap;
pub mod bounds;
pub mod data;
pub mod estimate;
pub mod glm;
pub mod rng;
pub mod transport;

pub use attainment::{
    attaining_matrix_lower, attaining_matrix_upper, construct_attaining_matrix,
    validate_attainment, AttainError, Attainment, ValidationReport, FILL_TOLERANCE,
};
pub use bounds::{
    bounds_report, delta_jm, distributional_effect, gamma_independent, gamma_lower, gamma_upper,
    tuple_set, xi_jm, BoundsError, BoundsReport, JointMatrix, MarginalDistribution, TupleIndex,
};
pub use bootstrap::{bootstrap_interval, BootError, IntervalReport};
pub use data::{DataError, Dataset, UnitRecord};
pub use estimate::{estimate_bounds, BoundsEstimate, Design, EstimateError};
pub use rng::CounterRng;
pub use transport::{lp_gamma_bounds, Sense, TransportError, TransportProblem, TransportSolution};
