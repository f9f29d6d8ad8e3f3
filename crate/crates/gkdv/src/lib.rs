//! Solitary waves of the generalized KdV equation, their spectral frames,
//! reduced modulation dynamics and direct instability experiments.

pub mod banded;
pub mod commands;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod family;
pub mod grid;
pub mod io;
pub mod linearization;
pub mod modulation;
pub mod nonlinearity;
pub mod reduced;
pub mod soliton;
pub mod verify;

pub use error::{GkdvError, Result};
pub use grid::Grid;
pub use nonlinearity::{Family, Monomial, Nonlinearity};
