// `!(x > 0.0)` style guards deliberately reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bishop;
pub mod curve;
pub mod error;
pub mod extremal;
pub mod fiber;
pub mod lp;
pub mod par;
pub mod polyalg;
pub mod report;

pub use error::{Error, Result};
pub use num_complex::Complex64;
