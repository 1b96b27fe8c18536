//! Wheeled-bipedal balancing stack: floating-base dynamics with rolling
//! wheels, reduced-order balance models, a Riccati-based control Lyapunov
//! function, a weighted-QP whole-body controller and a simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clf;
pub mod config;
pub mod design;
pub mod dynamics;
pub mod error;
pub mod qp;
pub mod reduced;
pub mod reference;
pub mod robot;
pub mod scenario;
pub mod simulator;
pub mod spatial;
pub mod trajopt;
pub mod wbc;

pub use error::{Error, Result};

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;
