//! Age-optimal partial updates.
//!
//! A source emits i.i.d. symbols; the transmitter merges them into `k`
//! partial updates and sends each over a noiseless binary link with a
//! real-valued codeword length, which is also its service time. This crate
//! finds partial-update pmfs and lengths that minimize the long-term average
//! Age of Information subject to an entropy (information-retention)
//! constraint `H(X̂) = β`:
//!
//! - [`length_solver`]: optimal lengths for a fixed pmf (Lambert-W closed
//!   form inside a parametric root search on the age).
//! - [`pmf_solver`]: optimal pmf for fixed lengths under the entropy
//!   constraint.
//! - [`altmin`]: alternating minimization between the two.
//! - [`partition_search`]: exhaustive and greedy search over partitions of
//!   the source alphabet.
//! - [`age`]: analytic and Monte-Carlo average age.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod age;
pub mod altmin;
pub mod distributions;
pub mod error;
pub mod length_solver;
pub mod partition_search;
pub mod pmf_solver;
pub mod special;
pub mod types;

pub use age::{average_age, finite_horizon_age, simulate_age};
pub use altmin::{
    alternate_minimize, alternate_minimize_multistart, kkt_residuals, lagrangian,
    lagrangian_gradient, random_pmf, AltMinSolution, IterRecord, IterTrace, Step,
};
pub use distributions::zipf;
pub use error::{Error, Result};
pub use length_solver::{
    lengths_from_lambda_theta, optimal_lengths, p_of_lambda, solve_theta_for_kraft, LengthSolution,
};
pub use partition_search::{
    best_at_beta, best_at_beta_with, brute_force_frontier, brute_force_frontier_with,
    enumerate_partitions, evaluate_partition, greedy_partition, lower_envelope, stirling2,
    BetaRule, BruteForceOptions, Frontier, PartitionPoint, PartitionPointRecord, DEFAULT_BUDGET,
    DEFAULT_TOL_BETA,
};
pub use pmf_solver::{normalize_sigma, optimal_pmf, pmf_from_gamma_sigma, PmfSolution};
pub use special::lambert_w0;
pub use types::{
    entropy, induced_pmf, kraft_sum, AgeStats, CodeLengths, Partition, Pmf, SolverConfig,
};
