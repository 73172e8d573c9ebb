//! Uniform tensor grids over the state space.
//!
//! Every axis carries the same `ns` nodes `lo + i * ds`, `i = 0..ns`. These
//! are the interior unknowns; the density is taken to vanish one spacing
//! beyond either end (homogeneous Dirichlet condition).
//!
//! Nodes are flattened row-major: the multi-index `(i_1, ..., i_D)` maps to
//! `sum_d i_d * ns^(D-1-d)`, so the last axis is contiguous.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Largest node count [`build_grid`] accepts unless told otherwise.
pub const DEFAULT_NODE_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    ns: usize,
    ds: f64,
    lo: f64,
}

/// Builds the grid spanning the common hull of the per-axis bounds.
///
/// The node count follows the `seq(lo, hi, by = ds)` convention,
/// `ns = floor((hi - lo) / ds) + 1`, so the last node never exceeds `hi` by
/// more than rounding.
pub fn build_grid(dim: usize, lo: &[f64], hi: &[f64], ds: f64, node_budget: usize) -> Result<SpatialGrid> {
    if dim == 0 {
        return Err(Error::InvalidArgument("grid dimension must be positive".into()));
    }
    if lo.len() != dim || hi.len() != dim {
        return Err(Error::ShapeMismatch {
            expected: dim,
            found: if lo.len() != dim { lo.len() } else { hi.len() },
        });
    }
    if !(ds.is_finite() && ds > 0.0) {
        return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {ds}")));
    }
    for axis in 0..dim {
        let (l, h) = (lo[axis], hi[axis]);
        if !(l.is_finite() && h.is_finite()) || h - l < 2.0 * ds * (1.0 - 1e-12) {
            return Err(Error::DegenerateDomain { axis, lo: l, hi: h, ds });
        }
    }
    let lo_all = lo.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_all = hi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ns = libm::floor((hi_all - lo_all) / ds + 1e-9) as usize + 1;
    SpatialGrid::new(dim, lo_all, ds, ns, node_budget)
}

impl SpatialGrid {
    pub fn new(dim: usize, lo: f64, ds: f64, ns: usize, node_budget: usize) -> Result<Self> {
        if ns < 3 {
            return Err(Error::InvalidArgument(format!("need at least 3 nodes per axis, got {ns}")));
        }
        let nodes = ns.saturating_pow(dim as u32);
        if nodes > node_budget {
            return Err(Error::NodeBudget {
                nodes,
                budget: node_budget,
            });
        }
        Ok(SpatialGrid { dim, ns, ds, lo })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn ns(&self) -> usize {
        self.ns
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    /// First node coordinate (shared by all axes).
    pub fn lo(&self) -> f64 {
        self.lo
    }

    /// Last node coordinate (shared by all axes).
    pub fn hi(&self) -> f64 {
        self.coord(self.ns - 1)
    }

    /// Total number of nodes, `ns^dim`.
    pub fn len(&self) -> usize {
        self.ns.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one grid cell, `ds^dim`.
    pub fn cell_volume(&self) -> f64 {
        libm::pow(self.ds, self.dim as f64)
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.ds
    }

    /// Node coordinates along one axis.
    pub fn axis_nodes(&self) -> Vec<f64> {
        (0..self.ns).map(|i| self.coord(i)).collect()
    }

    /// Flat-index distance between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.ns.pow((self.dim - 1 - axis) as u32)
    }

    /// Zero-based multi-index to flat index.
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim);
        multi.iter().fold(0, |acc, &i| acc * self.ns + i)
    }

    /// Flat index to zero-based multi-index.
    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = flat % self.ns;
            flat /= self.ns;
        }
    }

    /// Coordinates of the node at `flat`.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for slot in out.iter_mut().rev() {
            *slot = self.coord(rest % self.ns);
            rest /= self.ns;
        }
    }

    /// Coordinates of every node, row `i` being node `i`.
    pub fn points(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len() * self.dim];
        for (i, chunk) in out.chunks_exact_mut(self.dim).enumerate() {
            self.point(i, chunk);
        }
        out
    }

    /// Whether `x` lies in the closed bounding box of the nodes.
    pub fn contains(&self, x: &[f64]) -> bool {
        let tol = 1e-12 * self.ds;
        x.iter().all(|&v| v >= self.lo - tol && v <= self.hi() + tol)
    }
}
