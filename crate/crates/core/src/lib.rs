//! Φ-regret minimization, proximal regret, and approximate Φ-equilibrium
//! certification for smooth games.

pub mod audit;
pub mod cli;
pub mod conformal;
pub mod deviations;
pub mod error;
pub mod games;
pub mod geometry;
pub mod hardness;
pub mod learners;
pub mod oracles;
pub mod vecops;

pub use error::{Error, Result};
