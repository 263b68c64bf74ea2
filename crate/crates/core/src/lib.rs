//! Optimal consumption and investment for an investor who can trade a risky
//! asset only at the arrival times of a Poisson process.
//!
//! For power utility the value function has the Merton form `v(x) = θ₁ x^γ`
//! and the auxiliary (between-trade) value function reduces to one spatial
//! variable `ξ = x / a`. The crate solves the reduced Hamilton–Jacobi–Bellman
//! equations (stationary and time-dependent), the coefficient fixed point for
//! `θ₁`, the Euler–Lagrange boundary-value problem for the wealth path between
//! two trades, and checks everything against a Monte Carlo simulation of the
//! discrete-trade wealth process.
//!
//! Module map:
//!
//! * [`utility`], [`market`], [`quadrature`]: problem data and integrals against
//!   the return distribution.
//! * [`stationary`], [`nonstationary`]: reduced value-function solvers.
//! * [`bvp`]: optimal wealth / consumption path between two trading dates.
//! * [`policy`]: executable controls derived from a value function.
//! * [`simulator`]: Monte Carlo validation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bvp;
pub mod csv;
mod error;
pub mod grid;
mod hermite;
pub mod market;
pub mod nonstationary;
pub mod policy;
pub mod quadrature;
mod reduced;
pub mod simulator;
pub mod stationary;
pub mod utility;
mod value;

pub use bvp::{ConsumptionPath, PathClass, ShootingConfig};
pub use error::{Error, Result};
pub use grid::{GridConfig, XiGrid};
pub use market::{AssumptionFlag, AssumptionReport, MarketParams, ReturnKind, ReturnModel};
pub use nonstationary::{SurfaceConfig, ValueSurface};
pub use policy::Policy;
pub use simulator::{SimConfig, SimPath, SimResult};
pub use stationary::{FixedPointConfig, Scheme, ValueGrid};
pub use utility::{PowerUtility, UtilityFn, UtilityKind};
pub use value::{vhat_eval, ValueFunction, VhatKind};
