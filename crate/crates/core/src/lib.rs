//! Cluster-correlation expansion of central-spin dynamics.

pub mod cluster;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod par;
pub mod scenario;
pub mod shorttime;
pub mod spin_model;

pub use error::{Error, Result};
