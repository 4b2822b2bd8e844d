//! Delay-aware distributed Kalman filtering for linear time-varying systems,
//! with stability- and observability-driven filter-node selection.

pub mod dkf;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod observability;
pub mod selection;
pub mod sensing;
pub mod stability;

pub use error::{Error, Result};
