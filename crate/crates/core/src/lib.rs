//! Identification of physically consistent rigid-body inertial parameters of
//! floating-base robots from joint kinematics and joint torques only.
//!
//! The whole-body dynamics are projected onto the null space of the contact
//! constraints, which removes the unknown contact forces, and the resulting
//! linear regression is solved subject to per-link semidefinite constraints.

pub mod cli;
pub mod consistency;
pub mod contact;
pub mod dataio;
pub mod fixtures;
pub mod identify;
pub mod error;
pub mod linalg;
pub mod model;
pub mod regularization;
pub mod signal;
pub mod spatialdyn;
pub mod synth;

pub use error::{Error, Result};
