// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod denoiser;
pub mod error;
pub mod seed;
pub mod sensing;
pub mod oamp;
pub mod se;
pub mod harness;
pub mod stats;
