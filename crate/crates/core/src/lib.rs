//! Exact finite-chain computations, q-series constants and seeded simulators
//! for non-monotone coupon collectors.
//!
//! Four models are covered:
//!
//! | model | module | completion mechanism |
//! |---|---|---|
//! | reset-button | [`reset`] | exact regeneration at the empty collection |
//! | clumsy | [`clumsy`] | stationary-entry flux `p q^n` |
//! | careless | [`careless`] | high-tail entry through the ordered lucky climb |
//! | clumsy-careless | [`combined`] | same high-tail mechanism with a refresh factor |
//!
//! The generic machinery lives in [`chain`] (count kernels, stationary laws,
//! entry flux, block moments, hitting times) and [`qseries`] (Pochhammer
//! symbols, lucky-climb weights, the limiting immigration-thinning law).
//! [`harness`] turns sample sets into limit-law reports and hypothesis audits,
//! and [`record`] defines the persisted JSON record.
//!
//! Rare quantities are carried as natural logarithms throughout; see
//! [`LogProb`].

pub mod careless;
pub mod chain;
pub mod clumsy;
pub mod combined;
mod error;
pub mod harness;
mod logspace;
pub mod qseries;
pub mod record;
pub mod reset;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod suites;

pub use error::{Error, Result};
pub use logspace::{log_add_exp, log_sum_exp, LogProb};

/// Library version, stamped into every experiment record.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
