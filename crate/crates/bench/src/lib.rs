//! Command-line front end: instance generation, single solves, offline
//! certification and benchmark sweeps.

pub mod commands;
pub mod record;
pub mod suites;
