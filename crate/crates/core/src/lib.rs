//! Exponential-family solution generators for combinatorial optimization.
//!
//! The crate enumerates the solution space of small combinatorial instances
//! (cuts, constraint satisfaction, matchings, tours), encodes every solution
//! and instance as feature vectors whose bilinear form is the cost, and then
//! trains fast/slow mixtures of Gibbs densities with an entropy regularizer.
//! Every expectation is exact over the enumerated table, which makes the
//! landscape identities checkable to machine precision.

pub mod encodings;
pub mod error;
pub mod experiment;
pub mod features;
pub mod fourier;
pub mod generator;
pub mod instance;
pub mod landscape;
pub mod math;
pub mod objective;
pub mod optimizer;
pub mod scorer;
pub mod verify;

pub use encodings::{
    brute_force_optimum, encode_max_k_csp, encode_maxcut, encode_mincut, encode_mwbm, encode_tsp,
    validate_encoding, Bounds, EncodeOptions, EncodingReport, ParamSubspace, ProblemEncoding,
    ProblemKind,
};
pub use error::{Error, Result};
pub use generator::{Distribution, MixtureParams};
pub use instance::{erdos_renyi, AssignmentProblem, CspInstance, Graph, Instance, Predicate};
pub use objective::{GradReport, PriorSpec};
pub use optimizer::{SGDConfig, Trajectory};

/// Re-exported so callers can build parameter matrices without naming nalgebra.
pub use nalgebra::{DMatrix, DVector};
