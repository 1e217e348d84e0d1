//! Autonomous thermal soaring.
//!
//! - [`thermal_env`]: Gaussian thermals in a uniform wind.
//! - [`glider`]: drag polar, point-mass kinematics and the netto variometer.
//! - [`estimator`]: four-state EKF over thermal strength, radius and core position.
//! - [`controller`]: cruise / powered climb / thermal loiter mode logic.
//! - [`polar_fit`]: least-squares polar identification.
//! - [`sim`]: closed-loop scenario runner and the loiter-radius sweep.

// `!(x > y)` is the NaN-rejecting form used for validation throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod estimator;
pub mod glider;
pub mod polar_fit;
pub mod sim;
pub mod thermal_env;

pub use error::{Result, SoarError};
