//! Reliable clustering of Bernoulli mixture data.
//!
//! The clusterer searches set partitions of the rows in order of increasing
//! cluster count and accepts the first partition whose clusters all pass a
//! purity test: the maximal total correlation over `d`-column sub-matrices
//! must not exceed a threshold `tau` derived from the user's tolerances.
//!
//! Alongside the clusterer the crate provides a seeded mixture sampler,
//! ground-truth evaluation, computable forms of the concentration bounds
//! behind the method, and a Monte Carlo harness that checks those bounds
//! empirically.

pub mod clusterer;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod info;
pub mod measures;
pub mod model;
pub mod params;
pub mod partitions;
pub mod real;
pub mod rng;
pub mod sampler;
pub mod theory;

pub mod cli;

pub use data::{DataFormat, Dataset, Labeling};
pub use error::{Error, Result};
pub use model::BmmParams;
pub use params::{derive_algo_params, AlgoParams, DimCap};
