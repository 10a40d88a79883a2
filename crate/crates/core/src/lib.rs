#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod echo;
pub mod error;
pub mod fit;
pub mod io;
pub mod loss;
pub mod montecarlo;
pub mod numeric;
pub mod specfun;
pub mod trace;

pub use error::{Error, Result};
