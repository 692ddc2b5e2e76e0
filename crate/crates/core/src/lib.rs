//! Preparation procedures for open quantum systems.
//!
//! The crate simulates how a system that starts out correlated with its
//! environment is prepared into known input states, how the choice of
//! preparation procedure leaks into the post-preparation environment, and
//! what that does to a process map reconstructed by tomography.
//!
//! All states are explicit system ⊗ environment density matrices. The system
//! is always the left tensor factor: a joint index is
//! `system_index * dim_e + environment_index`.

pub mod channels;
pub mod dynamics;
pub mod error;
pub mod preparations;
pub mod qmath;
pub mod random;
pub mod scenario;
pub mod states;
pub mod tomography;

pub use error::{Error, Result};
pub use qmath::{ComplexMatrix, C64};
