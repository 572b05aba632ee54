//! Data-dependent hypothesis sets: complexity estimators, stability
//! coefficients, generalization bound calculators, the exponential
//! mechanism, application families and brute-force oracles.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod applications;
pub mod bounds;
pub mod combinatorics;
pub mod complexity;
pub mod corpus;
pub mod error;
pub mod hypothesis;
pub mod loss;
pub mod mechanisms;
pub mod oracle;
pub mod risk;
pub mod rng;
pub mod sample;
pub mod stability;

pub use error::{HssError, Result};
pub use hypothesis::{FixedFamily, Hypothesis, HypothesisFamily, HypothesisSet, SupValue, Target};
pub use loss::LossFunction;
pub use rng::SeededRng;
pub use sample::{DiscreteDistribution, LabeledPoint, LabeledSample};
