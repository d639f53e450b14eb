// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod cli;
pub mod curve;
pub mod image;
pub mod metrics;
pub mod policy;
pub mod sensitivity;
