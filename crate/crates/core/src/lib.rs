//! Algorithms for training classifiers under injected label noise and then
//! cleaning the labels with a budgeted oracle.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command line live in the `relabel` crate.
#![no_std]

extern crate alloc;

pub mod active;
pub mod datagen;
pub mod error;
pub mod lnl;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod train;
pub mod vog;

pub use error::{Error, Result};
pub use matrix::Matrix;
