//! Semidefinite programs solved through triangular low-rank factorizations.
//!
//! A standard-form SDP is rewritten over `X = S Sᵀ` with `S` lower triangular
//! (or, for comparison, a full factor `R`), vectorized into a quadratic program
//! with quadratic equality constraints, and solved by a local Newton-KKT SQP
//! method started from a short interior-point run.

pub mod factor;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod problems;
pub mod qecqp;
pub mod sqp;
pub mod warm_start;
