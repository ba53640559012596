//! IO, experiment orchestration and the `olap` command line for
//! [`olap_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;

pub use error::{Error, Result};
