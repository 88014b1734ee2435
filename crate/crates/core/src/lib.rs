//! Generalized l1 demixing.
//!
//! Given `z = A x0 + B y0` with sparse `x0`, `y0`, the demixing program
//!
//! ```text
//!     minimize ‖x‖₁  subject to  ‖y‖₁ ≤ ‖y0‖₁,  A x + B y = z
//! ```
//!
//! is lowered to a dense linear program and solved by an interior-point
//! method. On top of that the crate provides a three-condition success
//! certificate, Monte-Carlo statistical-dimension estimates with
//! kinematic-formula bounds, and a phase-transition experiment harness.

pub mod certificate;
pub mod error;
pub mod experiments;
pub mod l1programs;
pub mod lp;
pub mod numerics;
pub mod statdim;

pub use error::{Error, Result};
