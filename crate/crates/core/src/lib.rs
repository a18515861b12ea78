//! Far-field thermal radiation of silica nanofibers and the thermalization
//! dynamics of tapered optical fibers.
//!
//! The crate is organized bottom-up: [`specfun`] supplies cylinder functions,
//! [`materials`] the optical and thermal properties of fused silica,
//! [`radiometry`] blackbody and flat-interface emission, [`cylinder`] the
//! T-matrix emissivity of an infinite cylinder, [`fiber`] the taper geometry
//! and guided-mode optics, [`thermal`] the 1D heat equation, and
//! [`analysis`] the post-processing used to compare with measurements.

pub mod analysis;
pub mod cache;
pub mod constants;
pub mod cylinder;
pub mod error;
pub mod fiber;
pub mod io;
pub mod materials;
pub mod numeric;
pub mod radiometry;
pub mod specfun;
pub mod thermal;

pub use error::{Error, Result};
