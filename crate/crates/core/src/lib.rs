//! Sparse GLM variable selection with one-step Laplace model scores.
//!
//! `no_std` + `alloc`. The `std` feature only adds `std::error::Error`
//! plumbing through `thiserror` and is enabled by the `olap` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod cache;
pub mod chain;
pub mod coupling;
pub mod error;
pub mod glm;
pub mod metrics;
pub mod net;
pub mod olap;
pub mod rng;
pub mod sampler;
pub mod sim;
pub mod support;

pub use error::{DimensionError, Error, Result};
pub use glm::{Dataset, GlmFamily};
pub use support::Support;
