//! File formats, index snapshots, the model service client and the
//! command line around [`convqa_core`].

pub mod cli;
pub mod client;
pub mod config;
pub mod data;
pub mod error;
pub mod report;
pub mod runner;
pub mod snapshot;
pub mod synthetic;

pub use error::{Error, Result};
