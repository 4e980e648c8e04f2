//! Acoustic loss characterization for interdigitated piezoelectric
//! resonators.
//!
//! The crate links unit-cell finite-element eigenanalysis (energy
//! confinement η), a loss model combining piezoelectric and metal quality
//! factors through η, one-port measurement extraction, and multi-device
//! parameter fitting.

pub mod cli;
pub mod dispersion;
pub mod error;
pub mod fem;
pub mod fit;
pub mod lm;
pub mod lossmodel;
pub mod materials;
pub mod measure;
pub mod plot;
pub mod selftest;

pub use error::{Error, Result};
