// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod env;
pub mod error;
pub mod impacts;
pub mod influent;
pub mod marl;
pub mod plant;
pub mod scenarios;

pub use error::{Error, Result};
