//! Numerical laboratory for CGLMP Bell values of two qudits under white
//! noise, unsharp measurements and sequential observers on one side.
//!
//! * [`qmath`]: dense complex matrices, Kronecker products, Jacobi eigensolver.
//! * [`cglmp`]: measurement settings, Bell functional and operator, MES/MVS.
//! * [`noise_seq`]: noisy states, unsharp effects, the sequential channel.
//! * [`solvers`]: thresholds, boundary curves, ANR and q_min.
//! * [`report`]: reference tables, CSV/JSON output used by the CLI.

pub mod cglmp;
pub mod error;
pub mod noise_seq;
pub mod qmath;
pub mod report;
pub mod solvers;

pub use error::{Error, Result};
