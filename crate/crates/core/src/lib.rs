//! Open-system trajectories and their geometric phases.
//!
//! The crate integrates Lindblad master equations, unravels them into
//! quantum-jump and linear quantum-state-diffusion trajectories, and computes
//! the geometric phases attached to those trajectories. Its central use is
//! showing that shifts `L_m -> L_m - f_m(t)` of the Lindblad operators can
//! leave the density-matrix evolution untouched while changing trajectory
//! phases.
//!
//! Module map:
//!
//! - [`operators`]: small dense complex linear algebra and time-ordered
//!   propagation.
//! - [`lindblad`]: models, master-equation integration, symmetry transforms.
//! - [`jump`]: no-jump generators, geometric phase, jump sampling, Kraus sets.
//! - [`dephasing`]: closed-form results for the dephasing qubit.
//! - [`qsd`]: linear quantum state diffusion and the averaged geometric phase.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dephasing;
pub mod error;
pub mod jump;
pub mod lindblad;
pub mod numerics;
pub mod operators;
pub mod qsd;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Default number of propagation steps per evolution interval.
pub const DEFAULT_STEPS: usize = 4096;

/// Version of this library.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
