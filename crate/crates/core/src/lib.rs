//! Scoring of ordinal assessment outcomes as points of the standard simplex.
//!
//! An outcome over `n + 1` ordered quality classes (best first) is a point of
//! the standard `n`-simplex. Its distance from the best vertex along a
//! weighted natural path, [`delta`](geometry::delta), gives an absolute
//! score where lower is better. The [`engine`] turns that into a relative
//! *geometric score*: the probability that a randomly composed aggregate with
//! the same per-stratum demand does strictly worse.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, parallel
//! fan-out and the command line live in the `geoscore` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod engine;
mod error;
pub mod geometry;
pub mod population;
pub mod sampler;

pub use error::{Error, Result};
pub use geometry::{AssessmentPoint, ClassCount, EffortWeights, WeightPreset};
pub use population::{AggregateProfile, AreaPopulation, ClassScoreScale, StratumPopulation};
pub use sampler::{IdealAggregate, SamplerSeed};
