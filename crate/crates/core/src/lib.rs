//! Sample-provisioning engine for populations of graph records (nodes, links)
//! with heavy-tailed features.
//!
//! A weighted *master sample* of the population is drawn once; every served
//! sample is a prefix (or filtered prefix) of it. Playouts are tunable in
//! size, filterable by predicate, and extendable without overlap. Served
//! samples feed Horvitz-Thompson estimators of subset sums, subset counts,
//! ordinary distributions, and mass distributions.
//!
//! Modules:
//! - [`model`]: records, features, weight specs, selection predicates, CSV I/O
//! - [`sampler`]: priority assignment, master-sample construction, thresholds
//! - [`playout`]: predicate-filtered, extendable, and cost-limited sampling
//! - [`estimate`]: Horvitz-Thompson estimators over played-out samples
//! - [`synth`]: correlated heavy-tailed synthetic populations and exact curves
//! - [`eval`]: KS-distance evaluation of estimated vs. exact distributions

pub mod error;
pub mod estimate;
pub mod eval;
pub mod model;
pub mod numeric;
pub mod playout;
pub mod sampler;
pub mod synth;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
