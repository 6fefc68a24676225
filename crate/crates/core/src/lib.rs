//! Pseudospectral simulation and verification of weakly transverse
//! Boussinesq systems on the periodic square.

pub mod cli;
pub mod energy;
pub mod error;
pub mod evolve;
pub mod spectral;
pub mod systems;
pub mod unknowns;
pub mod verify;

pub use error::{Error, Result};
