//! Infinite-time admissibility of control operators for retarded diagonal
//! delay systems
//!
//! ```text
//! z_k'(t) = lambda_k z_k(t) + gamma_k z_k(t - tau) + b_k u(t)
//! ```
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: parameter types, validation and the system-spec document.
//! - [`region`]: the stability sets `Lambda_{tau,a}` for `gamma e^{-i b tau}`.
//! - [`charfun`]: the quasi-polynomial `s - lambda - gamma e^{-s tau}` and an
//!   argument-principle root counter.
//! - [`costint`]: the cost integral `J` by closed form, residues and quadrature.
//! - [`admissibility`]: per-component certificates and whole-system `l^1` checks.
//! - [`ddesim`]: a method-of-steps simulator used to check the bounds empirically.
//! - [`cli`]: the `ra` command-line front end.

pub mod admissibility;
pub mod charfun;
pub mod cli;
pub mod costint;
pub mod ddesim;
pub mod error;
pub mod model;
pub mod region;

pub use error::{Error, ErrorClass, Result};
pub use model::{ComponentParams, DiagonalDelaySystem, ToleranceProfile};
