//! Concrete data-dependent hypothesis-set families.

pub mod bagging;
pub mod distillation;
pub mod feature_map;
pub mod linalg;
pub mod pcr;
pub mod sco;
