//! Compression of Euclidean (k,z)-clustering instances into bit-exact sketches,
//! plus the tooling that builds and certifies hard instances for the matching
//! space lower bound.
//!
//! The crate is organised by subsystem:
//!
//! - [`geometry`]: datasets, center sets and exact clustering cost.
//! - [`coreset`]: approximate centers and weighted coresets fed to the codec.
//! - [`codec`]: the quantizing compressor, its wire format and bit accounting.
//! - [`anglelab`]: Haar subspace sampling and principal angles.
//! - [`coloring`]: partial colorings, adversarial centers, grid rounding,
//!   tiling and separation witnesses.
//! - [`distsim`]: coordinator-model and streaming harnesses.
//! - [`lowerbound`]: the end-to-end hard-instance pipeline with certificates.
//! - [`io`] and [`synth`]: file formats and seeded synthetic inputs.

pub mod anglelab;
pub mod codec;
pub mod coloring;
pub mod coreset;
pub mod distsim;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lowerbound;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
