//! Circular-track synthetic aperture radar simulation, backprojection image
//! formation, and a from-scratch convolutional classifier for the raw data
//! and the reconstructed images.
//!
//! The pipeline is:
//!
//! 1. [`scene`] renders binary reflectivity maps on a square region of interest.
//! 2. [`forward`] turns a map into raw data: circular integrals of the map
//!    around each antenna position, one per fast-time sample, optionally
//!    tapered by a smoothing window.
//! 3. [`backprojection`] spreads smoothed data back over the ground circles.
//! 4. [`cnn`] trains and evaluates the seven-layer classifier.
//! 5. [`datasets`] builds labeled datasets and owns the `SARD` container.
//! 6. [`harness`] runs the end-to-end experiments and writes reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backprojection;
pub mod cnn;
pub mod datasets;
pub mod error;
pub mod forward;
pub mod harness;
pub mod matrix;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
pub use matrix::Matrix;
