//! Pseudospectral laboratory for boosted ground states of the
//! pseudo-relativistic Schrodinger equation with a double-power nonlinearity.

pub mod asymptotics;
pub mod bounds;
pub mod energy;
pub mod error;
pub mod io;
pub mod reference;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
