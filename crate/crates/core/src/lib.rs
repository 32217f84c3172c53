//! Numerical core for studying the consistency of graph-based spectral
//! clustering on random point clouds.
//!
//! Everything in this crate is deterministic and `no_std` (with `alloc`):
//! sampling is driven by explicit seeds, and all floating point special
//! functions go through `libm` so results do not depend on the platform's
//! math library.
//!
//! Module map:
//!
//! * [`geometry`]: box domains, densities, seeded sampling, grid measures.
//! * [`kernel`]: radial kernel profiles and their constants.
//! * [`graph`]: similarity graphs, Laplacians, Dirichlet energies.
//! * [`eigen`]: dense and block-Krylov symmetric eigensolvers, spectra.
//! * [`kmeans`]: weighted k-means and its stability diagnostics.
//! * [`transport`]: exact optimal transport, TL² distances, matchings.
//! * [`continuum`]: continuum reference spectra and clusterings.
//! * [`pipeline`]: length-scale schedules and discrete spectral clustering.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::manual_is_multiple_of)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod continuum;
pub mod eigen;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod kernel;
pub mod kmeans;
pub mod math;
pub mod measure;
pub mod pipeline;
pub mod sparse;
pub mod transport;

mod neighbors;

pub use error::{Error, Result};
