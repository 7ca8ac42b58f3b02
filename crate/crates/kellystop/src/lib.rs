//! Growth-optimal (Kelly) investing under a periodically reset stop-loss.
//!
//! The optimal fraction of wealth in the risky asset solves a nonlinear
//! PDE directly in strategy space, with no reference to the value
//! function. In scaled coordinates (z = pi_c/pi, theta = time-to-reset in
//! characteristic-time units) the stop-loss problem becomes
//! `d_theta u = u^2 z^2 d_z^2 u` on the unit square with fixed boundary
//! data, which an explicit Euler march solves in a few lines.
//!
//! The crate provides:
//!
//! - [`params`]: market parameters and the derived Kelly fraction, Sharpe
//!   ratio, and characteristic time;
//! - [`scale`]: the (pi, t) <-> (z, theta) change of variables;
//! - [`analytic`]: closed-form strategies (free Kelly, CRRA, terminal
//!   stop / CPPI, drawdown, Browne target) used as oracles;
//! - [`pde`]: the stop-loss solver and residual operators for the
//!   strategy equations;
//! - [`value`]: HJB residuals, value reconstruction from a solved
//!   strategy, and the Legendre-transform machinery;
//! - [`sim`]: Monte Carlo simulation of the controlled wealth process
//!   with stop absorption, common-random-number comparisons, and the
//!   drawdown variant;
//! - [`multi`]: the multi-asset free Kelly portfolio and the scalar
//!   projection onto it;
//! - [`checks`]: the oracle/residual validation suite;
//! - [`export`]: bit-stable CSV/JSON writers;
//! - [`cli`]: the command-line front end (`kellystop` binary).
//!
//! See the `examples/` directory for one runnable example per capability.

pub mod analytic;
pub mod checks;
pub mod cli;
pub mod error;
pub mod export;
pub mod grid;
pub mod multi;
pub mod normal;
pub mod params;
pub mod pde;
pub mod scale;
pub mod sim;
pub mod surface;
pub mod value;

pub use error::{Error, Result};
pub use grid::Grid;
pub use params::{derive_params, DerivedParams, MarketParams};
pub use scale::{from_scaled, to_scaled, ScaledState};
pub use surface::{ProblemKind, StrategySurface};
