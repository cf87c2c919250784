//! Solvers and verification tools for linear-quadratic mathematical programs
//! with complementarity constraints (MPCCs).
//!
//! * [`alm`]: safeguarded augmented Lagrangian method with a projected
//!   gradient subsolver ([`pgrad`]).
//! * [`nsnewton`]: globalized nonsmooth Newton method on the M-stationarity
//!   system.
//! * [`stationarity`]: index sets, stationarity classification and
//!   second-order checks.
//! * [`ioc_fem`]: the inverse optimal control benchmark instance.
//! * [`oracle`]: brute-force references used in tests.
//! * [`generate`]: random small instances for fuzzing.

pub mod alm;
pub mod compgeo;
pub mod error;
pub mod generate;
pub mod instance;
pub mod ioc_fem;
pub mod nsnewton;
pub mod oracle;
pub mod pgrad;
pub mod problem;
pub mod stationarity;

pub use error::{MpccError, Result};
pub use problem::{AffineMap, MultiplierSet, QuadraticMpcc, QuadraticObjective};
