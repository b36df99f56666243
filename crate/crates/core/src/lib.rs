//! Continuum reduction of power-grid swing dynamics.
//!
//! The discrete ground truth is the linearized, lossless swing equation on a
//! network of buses ([`network`], [`ode`]). The reduced model is a 2+1D swing
//! PDE discretized by finite volumes on a regular raster ([`grid`], [`pde`])
//! whose coefficient fields are built from the network by deposition,
//! artificial diffusion and Fourier low-pass filtering ([`fields`]). Both
//! models share one Crank–Nicolson kernel ([`stepping`]); [`analysis`] and
//! [`screening`] compare them and run batches of fault scenarios.

pub mod analysis;
pub mod error;
pub mod exec;
pub mod fields;
pub mod format;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod network;
pub mod ode;
pub mod pde;
pub mod screening;
pub mod stepping;
pub mod trajectory;

pub use error::{Error, Result};
pub use exec::Execution;
pub use fields::{Field, FieldSet, Quantity};
pub use grid::RasterGrid;
pub use network::{Branch, Bus, FaultScenario, FaultTarget, PowerNetwork};
pub use trajectory::Trajectory;
