//! Chance-constrained electric vehicle scheduling with stochastic energy consumption.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bnp;
pub mod charging;
pub mod cli;
pub mod degradation;
pub mod error;
pub mod instances;
pub mod lp;
pub mod master;
pub mod network;
pub mod pricing;
pub mod probability;

pub use error::{Error, Result};
