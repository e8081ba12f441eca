//! Simulation and analysis of passive alignment for a tripod end-effector
//! pressed against a tilted surface by a force-controlled aerial robot.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditions;
pub mod contact;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod geom;
pub mod harness;
pub mod metrics;

pub use error::{Error, Result};
