//! Data-driven approximation of maximum positively invariant (MPI) and
//! maximum controlled invariant (MCI) sets of nonlinear discrete-time
//! systems.
//!
//! Given only one-step transitions (x, x⁺), the library fits a value
//! function whose zero-sublevel set approximates the invariant set, by
//! solving a single dense linear program: the Bellman inequality is imposed
//! at the data points, bound constraints at a set of artificial points, and
//! the integral of the value function over the constraint set is maximized.
//! Conservative (held-out residual) and guaranteed (Lipschitz-certified)
//! sublevel thresholds post-process the same fit.

pub mod basis;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod lp;
pub mod rng;

pub use error::{Error, Result};
