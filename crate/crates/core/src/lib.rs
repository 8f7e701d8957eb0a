#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dual;
pub mod error;
pub mod estimators;
pub mod harris;
pub mod pierrehumbert;
pub mod rds;
pub mod stats;
pub mod structure;
pub mod torus;
pub mod transport;

pub use error::{Error, Result};
