// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod expfam;
pub mod io;
pub mod linalg;
pub mod messages;
pub mod model;
pub mod special;
pub mod svi;
pub mod sweep;
pub mod synth;
