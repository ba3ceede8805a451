//! Bayesian Gaussian mixture modelling of bus-pair travel times.
//!
//! The crate is `no_std` (with `alloc`). Enable `std` for `std::error::Error`
//! impls and `parallel` for multi-threaded per-pair Gibbs updates.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod error;
pub mod forecast;
pub mod inference;
pub mod linalg;
pub mod metrics;
pub mod pair;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};
pub use pair::{
    build_augmented_pair, headway_constraint_row, validate_pair, BusPairObservation, Dataset, HeadwaySeries,
    LinkSlot, LinkTimeSeries, RaggedGroup, RouteSpec, RowKind,
};
pub use rng::RngState;
pub use trajectory::{assign_period, derive_link_series, pair_adjacent, PeriodConfig, Trajectory};
