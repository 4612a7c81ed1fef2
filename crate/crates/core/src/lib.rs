#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Graph topology inference from nodal observations.

pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod netdyn;
pub mod par;
pub mod simulate;
pub mod smoothlearn;
pub mod solvers;
pub mod spectral_id;
pub mod statnet;

pub use error::{Error, Result};
