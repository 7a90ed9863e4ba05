//! Passive scalar transport in a horizontally periodic slab with Robin
//! (Newton cooling) walls.
//!
//! The crate covers the full verification chain for the decay theory of the
//! advection-diffusion problem on both a rigid slab and a slab with a moving
//! upper surface that is flattened back onto the reference domain:
//!
//! * [`geometry`]: grids, the harmonic extension of the surface, the
//!   flattening tensors and their identities,
//! * [`equilibrium`]: affine steady profiles for every boundary regime,
//! * [`eigen1d`]: the one-dimensional Robin eigenproblem,
//! * [`coercivity`]: dissipation functionals, spectral gaps and audits,
//! * [`rigid_sim`] / [`moving_sim`]: time integration plus energy ledgers,
//! * [`decay`]: rate fitting and Gronwall envelopes,
//! * [`harness`]: JSON scenarios, experiment runners and output files.

pub mod coercivity;
pub mod decay;
pub mod eigen1d;
pub mod equilibrium;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod moving_sim;
pub mod rigid_sim;
pub mod spectral;
pub mod stepper;
pub mod vertical;

pub use error::{Result, SlabError};

/// Volume grid function with index order `(i1, i2, k)`; `k` runs bottom to top.
pub type Field3 = ndarray::Array3<f64>;
/// Grid function on the horizontal torus with index order `(i1, i2)`.
pub type Field2 = ndarray::Array2<f64>;
