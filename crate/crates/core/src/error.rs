use alloc::string::String;
use alloc::vec::Vec;

use crate::expr::ParseError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{field}: {source}")]
    Parse {
        /// Which expression failed, e.g. `f[2]`.
        field: String,
        source: ParseError,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),
    #[error("non-finite state or observation at fine step {step} (t = {time})")]
    NonFiniteSimulation { step: usize, time: f64 },
    #[error("degenerate domain on axis {axis}: [{lo}, {hi}] with spacing {ds}")]
    DegenerateDomain { axis: usize, lo: f64, hi: f64, ds: f64 },
    #[error("grid needs {nodes} nodes, exceeding the node budget of {budget}")]
    NodeBudget { nodes: usize, budget: usize },
    #[error("non-finite {what} at node {coords:?}")]
    NonFiniteCoefficient { what: &'static str, coords: Vec<f64> },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite field value at node {node} after fine step {step}")]
    NonFiniteField { step: usize, node: usize },
    #[error("density collapse (mass underflow) at observation {}", observation.map_or_else(|| String::from("?"), |k| alloc::format!("{k}")))]
    DensityCollapse { observation: Option<usize> },
    #[error("initial density center {center:?} lies outside the grid")]
    CenterOutsideGrid { center: Vec<f64> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cancelled at observation {observation}")]
    Cancelled { observation: usize },
}
