#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod generators;
pub mod geometry;
pub mod io;
pub mod monge_ampere;
pub mod ot;
pub mod points;
pub mod potential;
pub mod quadrature;
pub mod quantiles;
pub mod reference;
pub mod rng;

pub use error::{Error, Result};
