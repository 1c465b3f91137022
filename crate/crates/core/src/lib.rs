//! Simulation and numerical verification of the coupling between chordal
//! SLE curves and the free-boundary Gaussian free field.
//!
//! The crate simulates chordal SLE through the Loewner evolution, samples
//! the reflected circle-average process of the free-boundary GFF exactly at
//! finite probe sets, builds discretized reference measures (one-sided
//! conformal Minkowski approximants, Euclidean Minkowski neighbourhoods,
//! power-law smoothings, boundary Lebesgue approximants), applies Gaussian
//! multiplicative chaos weights to them, and packages seeded Monte Carlo
//! experiments that check the quantitative relations between these objects,
//! including the explicit quantum-length constant 2/((4-kappa)(1-kappa/8)).

pub mod chaos;
pub mod error;
pub mod field;
pub mod green;
pub mod loewner;
pub mod measures;
pub mod parallel;
pub mod params;
pub mod quad;
pub mod seeds;

pub use error::{Error, Result};
pub use params::{KappaParams, TheoremConstant};
