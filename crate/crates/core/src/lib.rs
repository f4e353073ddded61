//! Certification of discrete point (multi)sets as uniformly spread.
//!
//! The pipeline counts points per cube of a grid, balances the cube counts
//! with a fractional transfer flow, rounds that flow to integers without
//! changing any divergence, physically relocates the transferred points and
//! finally assigns each cube's points to its lattice sites. The result is an
//! explicit bijection onto a scaled integer lattice with bounded displacement.

pub mod cli;
pub mod density;
pub mod error;
pub mod flow_round;
pub mod generators;
pub mod io;
mod matching;
mod maxflow;
pub mod model;
pub mod oracle;
pub mod spread;
pub mod transfer;

pub use error::{Error, Result};
pub use model::{Ball, Cube, GridIndex, Lattice, Point, PointSet, Region, Window};
