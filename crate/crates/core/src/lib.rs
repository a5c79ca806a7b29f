//! Core library for equalizing projected pixel density on non-planar
//! surfaces with a phase-only spatial light modulator.
//!
//! The pipeline runs in a 2D cross-section of the projection volume:
//!
//! 1. [`geometry`] models the projector pixel fan and the piecewise-linear
//!    surface, and measures per-pixel footprints along the surface.
//! 2. [`density`] chooses uniformly spaced target points and the per-pixel
//!    ray deflections that reach them.
//! 3. [`device`] models the phase modulator (drive-to-phase response,
//!    grating equation) and calibrates a deflection lookup table from a
//!    synthetic ramp sweep.
//! 4. [`compiler`] converts deflections into per-block phase slopes,
//!    assembles a smooth piecewise-quadratic phase profile, and quantizes it
//!    into a wrapped drive-level image.
//! 5. [`simulator`] blindly re-reads that image, recovers gradients by
//!    finite differences, retraces the deflected rays, and scores uniformity
//!    before and after correction.

pub mod compiler;
pub mod density;
pub mod device;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod simulator;

pub use error::{Error, Result};
