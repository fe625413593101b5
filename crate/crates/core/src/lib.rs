//! Data-shared lasso with group-specific penalty weights, bootstrapped
//! feature reduction, soft-threshold de-noising, and subgroup removal
//! analysis for grouped sparse binary regression problems such as
//! bag-of-words rating prediction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod datadir;
pub mod denoise;
pub mod dsl;
pub mod error;
pub mod lasso;
pub mod resampling;
pub mod rng;
pub mod sparse;
pub mod subgroups;
pub mod synthetic;

pub use error::{Error, Result};
pub use sparse::{ColumnMap, SparseBinaryDesign};
