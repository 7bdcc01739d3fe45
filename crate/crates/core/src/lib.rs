//! Numerical laboratory for a mass-conserving Navier-Stokes/Allen-Cahn
//! system on a rectangle and its sharp-interface counterpart:
//! volume-preserving mean-curvature flow with convection.
//!
//! The crate is organized around the pipeline
//! profile construction -> interface geometry -> sharp evolution ->
//! layer-ansatz assembly -> diffuse simulation -> error norms,
//! with a spectral probe of the linearized layer operator on the side.

pub mod asymptotics;
pub mod diffuse;
pub mod error;
pub mod fft;
pub mod geometry;
pub mod harness;
pub mod numerics;
pub mod potential;
pub mod profiles;
pub mod sharp;
pub mod spectral;

pub use error::{Error, Result};
pub use potential::{sigma_from_potential, Potential};
