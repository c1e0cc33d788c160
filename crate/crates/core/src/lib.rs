//! Interior-point sequential quadratic programming for semi-infinite
//! programs with a log-determinant barrier:
//!
//! ```text
//!     min  f(x) − μ log det F(x)
//!     s.t. g(x, τ) <= 0  (τ ∈ T),   F(x) ≻ 0,   Gx = h.
//! ```
//!
//! Search directions come from an exchange method on a semi-infinite QP and
//! Monteiro-Zhang scaled Newton equations for the dual matrix.

pub mod bench;
pub mod direction;
pub mod driver;
pub mod exchange;
pub mod merit;
pub mod problem;
pub mod qpcore;
pub mod symmat;

pub use direction::{Curvature, ScalingChoice};
pub use driver::{solve, SolveReport, SolveStatus, SolverConfig};
pub use problem::SiplogProblem;
