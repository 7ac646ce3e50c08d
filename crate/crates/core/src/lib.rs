//! Exact Bayes risks and optimum decision-theoretic sampling plans for
//! exponential life tests under Type-I and Type-I hybrid censoring with a
//! gamma prior, plus Monte Carlo and Bayes-rule references to check them.

pub mod bsp_ref;
pub mod error;
mod kernel;
pub mod mc_oracle;
pub mod model;
mod parallel;
pub mod risk_hybrid;
pub mod risk_type1;
pub mod search;
pub mod specfun;
