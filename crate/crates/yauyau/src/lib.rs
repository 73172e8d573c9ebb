//! Experiment harness, file formats, reference filters and the HTTP job
//! service for the yauyau grid filter. The numerics live in
//! [`yauyau_core`].

pub mod config;
mod error;
pub mod harness;
pub mod io;
pub mod oracle;
pub mod service;

pub use error::{Error, Result};
