//! Protection engine for three-phase microgrids based on dynamic state
//! estimation.
//!
//! The pipeline is: simulate the true network ([`sim`]), fit every
//! two-sample window of merging-unit data to the network model by weighted
//! least squares ([`estimator`]), score the fit with a chi-square confidence
//! ([`chi2`]), explain low confidence as a measurement attack, a fault or
//! both ([`hypothesis`]), and turn the confidence trace into timed alert/trip
//! decisions ([`decision`]). [`scenario`] wires everything to a JSON
//! configuration and CSV outputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chi2;
pub mod decision;
pub mod error;
pub mod estimator;
pub mod hypothesis;
pub mod measurement;
pub mod model;
pub mod plot;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
