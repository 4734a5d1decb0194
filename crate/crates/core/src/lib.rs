//! Optics verification, Monte Carlo light transport and contact perception
//! for a wedge-geometry visual-tactile sensor.
//!
//! Angles are radians and lengths millimetres inside the library; config
//! files use degrees.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod control;
pub mod geom;
pub mod imaging;
pub mod optics;
pub mod phototrace;
pub mod segmentation;
