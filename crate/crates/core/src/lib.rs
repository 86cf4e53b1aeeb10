//! Almost-full recovery of the sparsity pattern of a d-variate signal whose
//! k-variate ANOVA components are observed in Gaussian noise, via weighted
//! chi-square statistics with water-filling extremal weights and a
//! Lepski-adaptive choice of the sparsity grid node.
//!
//! The crate is organized around the pipeline:
//!
//! 1. [`combinatorics`] - subsets, frequency lattices, shell counts;
//! 2. [`extremal`] - the constrained extremal problem defining the detection
//!    boundary a(r), its inversion, and closed-form asymptotics;
//! 3. [`model`] - experiment descriptions and sequence-space observations;
//! 4. [`selector`] - statistics, thresholds, fixed-β and adaptive selectors;
//! 5. [`risk`] - Monte Carlo Hamming-risk estimation and the phase diagram;
//! 6. [`report`] - reference tables and CSV/JSON emission.

pub mod combinatorics;
pub mod error;
pub mod extremal;
pub mod generators;
pub mod model;
pub mod report;
pub mod rng;
pub mod risk;
pub mod selector;

pub use error::{Error, Result};
