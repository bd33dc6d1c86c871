//! Partitioned fluid / thick-structure interaction in 2D with generalized Robin
//! coupling, on fixed and moving (ALE) domains, with a monolithic reference
//! solver and manufactured-solution verification.

pub mod ale;
pub mod cli;
pub mod config;
pub mod experiments;
pub mod fem;
pub mod fsi_linear;
pub mod fsi_moving;
pub mod linsolve;
pub mod mesh;
pub mod monolithic;
pub mod problem;
pub mod verification;
