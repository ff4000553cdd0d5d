//! Reflected stochastic heat equations between two moving walls.

pub mod coeff;
pub mod drift;
pub mod envelope;
pub mod error;
pub mod field;
pub mod greens;
pub mod grid;
pub mod hitting;
pub mod implicit;
pub mod io;
pub mod noise;
pub mod obstacle;
pub mod spde;
pub mod walls;

pub use error::{Error, Result};
pub use grid::{make_grid, DomainKind, Grid};
