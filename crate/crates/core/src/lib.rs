//! Robust model predictive control for linear systems with polytopic model
//! uncertainty and bounded additive disturbances.
//!
//! The core synthesis ([`sls`]) solves one convex QP per initial state that
//! jointly optimizes closed-loop system responses and a filter
//! over-approximating the lumped uncertainty. [`tube`] provides a tube MPC
//! baseline, [`polytope`] the set machinery, [`simulate`] closed-loop
//! rollouts and [`experiments`] the coverage harness behind the `rmpc` CLI.

pub mod blockops;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod polytope;
pub mod qp;
pub mod simulate;
pub mod sls;
pub mod tolerances;
pub mod tube;

pub use error::{Error, Result};
