//! Counterfactual estimands for recurrent events subject to competing events
//! and censoring.
//!
//! The crate covers simulation of discrete-time event histories, exact
//! discrete g-formula and IPW estimators, continuous-time weighted
//! counting-process estimators, an interventional oracle and the bootstrap.

// `!(x > y)` is used on purpose to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod continuous;
pub mod curve;
pub mod data;
pub mod dgp;
pub mod discrete;
pub mod error;
pub mod estimand;
pub mod grid;
pub mod hazard;
pub mod oracle;
pub mod report;
pub mod weights;

pub use curve::{Band, Bands, Component, CurveEstimate, StdErrors};
pub use error::{Error, ErrorClass, Result};
pub use estimand::{Estimand, EstimandSpec};
pub use grid::TimeGrid;
