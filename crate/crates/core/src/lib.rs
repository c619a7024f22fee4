//! Quantum Fourier Gaussian Network (QFGN) for implicit image representation.
//!
//! The crate bundles a statevector simulator for parameterized
//! re-uploading circuits, the Fourier-Gaussian feature front-end, classical
//! coordinate-network baselines, a full-batch training harness, image
//! metrics, and tools that check circuit outputs against their predicted
//! Fourier spectra.

pub mod checkpoint;
pub mod circuit;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fgfs;
pub mod grad;
pub mod imaging;
pub mod models;
pub mod nn;
pub mod qlayer;
pub mod qsim;
pub mod spectral;
pub mod train;

pub use error::{Error, Result};
