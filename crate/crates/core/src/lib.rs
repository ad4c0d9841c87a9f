pub mod cli;
pub mod compile;
pub mod data;
pub mod grpo;
pub mod metrics;
pub mod parser;
pub mod reward;
pub mod sample;
pub mod scanner;
pub mod scalar;
pub mod solidity;

pub use scalar::{Exact, Scalar, Weight};

/// Default floating scalar for policy math and reward totals.
pub type Real = f64;
/// Toy policy over the default scalar.
pub type Policy = grpo::ToyPolicy<Real>;
/// Reward weights over the default scalar.
pub type Weights = reward::RewardConfig<Real>;
/// Reward weights in exact rational arithmetic.
pub type ExactWeights = reward::RewardConfig<Exact>;
