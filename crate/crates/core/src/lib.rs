//! Triple Hopf bifurcation analysis of a tritrophic food-chain model.
//!
//! The crate covers the whole chain from the model to verified limit cycles:
//!
//! * [`model`]: the prey / predator / top-predator vector field and its Jacobian.
//! * [`equilibria`]: the six closed-form singular points with residual checks.
//! * [`hopf`]: the spectrum at `p3` and the degenerate-Hopf parameter constraints.
//! * [`transform`]: the exact coordinate pipeline into the normal form of averaging,
//!   with Taylor-mode extraction of the ε-series coefficients.
//! * [`averaging`]: a generic second-order averaging engine plus the closed-form
//!   second-order averaged field of the food chain.
//! * [`cycles`]: closed-form cycle predictions, Newton refinement and stability.
//! * [`dynamics`]: adaptive Runge–Kutta integration, periodic-orbit shooting,
//!   Poincaré returns and Floquet multipliers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod cycles;
pub mod dynamics;
pub mod equilibria;
mod error;
pub mod hopf;
pub mod model;
pub mod scalar;
pub mod transform;

pub use error::{Error, Result};
pub use hopf::HopfSetup;
pub use model::{ModelParams, StateVec};
