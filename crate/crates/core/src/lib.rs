#![doc = include_str!("../README.md")]
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod density;
pub mod dst;
mod error;
pub mod expr;
pub mod filter;
pub mod grid;
pub mod kfe;
mod matrix;
pub mod model;
pub mod sim;
pub mod spectral;
pub mod time;

pub use density::{estimate_mean, initial_density, normalize, observation_update, DensityField, InitialDensity};
pub use error::{Error, Result};
pub use filter::{run_filter, FilterObserver, FilterOptions, FilterResult, PhaseTimings, Snapshot, Warning};
pub use grid::{build_grid, SpatialGrid, DEFAULT_NODE_BUDGET};
pub use kfe::{build_operator, kfe_step, DriftReactionOperator, KfeStepper, ReactionScheme};
pub use matrix::Matrix;
pub use model::ModelSpec;
pub use sim::{observation_increments, simulate_paths, simulate_paths_with, NoiseConfig, Path};
pub use spectral::{compute_lambda, SpectralDiffusion};
pub use time::TimeGrid;
