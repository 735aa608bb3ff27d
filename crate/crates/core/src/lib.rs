//! Simulator and learning pipeline for autonomously discovering where a
//! manipulation behavior succeeds on binary-state household devices.
//!
//! The crate pairs each behavior with its complement (switch on / off, drawer
//! open / close) so the robot can keep practising without resetting the world
//! by hand, and learns a class-weighted RBF SVM over image-patch features with
//! pool-based active learning.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod active;
pub mod config;
pub mod device;
pub mod error;
pub mod features;
pub mod geometry;
pub mod image;
pub mod kde;
pub mod persist;
pub mod rng;
pub mod scene;
pub mod svm;
pub mod trainer;
pub mod views;

pub use error::{Error, Result};
