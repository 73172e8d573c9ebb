//! One fine step of the Kolmogorov forward equation
//!
//! ```text
//! du/dt = (1/2) Lap u - f . grad u - (div f + |h|^2 / 2) u
//! ```
//!
//! on the grid, split into an explicit convection/reaction update with
//! central differences followed by a backward-Euler diffusion solve done
//! exactly in the DST-I basis:
//!
//! ```text
//! w  = u - dt * (sum_d f_d * (u[i+e_d] - u[i-e_d]) / (2 ds) + r * u)
//! u' = IDST( Lambda * DST(w) )        i.e. (I - (dt/2) L) u' = w
//! ```
//!
//! Values outside the grid are zero.

use alloc::vec;
use alloc::vec::Vec;

use crate::density::DensityField;
use crate::dst::{DstWork, SineTransform};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::model::ModelSpec;
use crate::spectral::SpectralDiffusion;

/// Node-wise coefficients of the explicit part, plus the observation
/// functions tabulated on the same nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReactionOperator {
    dim: usize,
    obs_dim: usize,
    nodes: usize,
    /// `drift[d * nodes + i] = f_d(s_i)`
    drift: Vec<f64>,
    /// `div f + |h|^2 / 2`
    reaction: Vec<f64>,
    /// `observation[j * nodes + i] = h_j(s_i)`
    observation: Vec<f64>,
}

/// Tabulates drift, reaction and observation values on every grid node.
pub fn build_operator(model: &ModelSpec, grid: &SpatialGrid) -> Result<DriftReactionOperator> {
    if model.dim() != grid.dim() {
        return Err(Error::ShapeMismatch {
            expected: grid.dim(),
            found: model.dim(),
        });
    }
    let dim = model.dim();
    let obs_dim = model.obs_dim();
    let nodes = grid.len();
    let divergence = crate::expr::divergence(model.drift());

    let mut drift = vec![0.0; dim * nodes];
    let mut reaction = vec![0.0; nodes];
    let mut observation = vec![0.0; obs_dim * nodes];
    let mut point = vec![0.0; dim];
    for i in 0..nodes {
        grid.point(i, &mut point);
        let bad = |what| Error::NonFiniteCoefficient {
            what,
            coords: point.clone(),
        };
        for (d, f) in model.drift().iter().enumerate() {
            let v = f.eval(&point);
            if !v.is_finite() {
                return Err(bad("drift"));
            }
            drift[d * nodes + i] = v;
        }
        let mut half_h2 = 0.0;
        for (j, h) in model.observation().iter().enumerate() {
            let v = h.eval(&point);
            if !v.is_finite() {
                return Err(bad("observation"));
            }
            observation[j * nodes + i] = v;
            half_h2 += 0.5 * v * v;
        }
        let r = divergence.eval(&point) + half_h2;
        if !r.is_finite() {
            return Err(bad("reaction"));
        }
        reaction[i] = r;
    }
    Ok(DriftReactionOperator {
        dim,
        obs_dim,
        nodes,
        drift,
        reaction,
        observation,
    })
}

impl DriftReactionOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// `f_d` on every node.
    pub fn drift(&self, d: usize) -> &[f64] {
        &self.drift[d * self.nodes..(d + 1) * self.nodes]
    }

    pub fn reaction(&self) -> &[f64] {
        &self.reaction
    }

    /// `h_j` on every node.
    pub fn observation(&self, j: usize) -> &[f64] {
        &self.observation[j * self.nodes..(j + 1) * self.nodes]
    }

    /// Largest `dt * |f| / ds` over nodes and axes.
    pub fn courant_number(&self, dt: f64, ds: f64) -> f64 {
        self.drift.iter().fold(0.0f64, |m, v| m.max(v.abs())) * dt / ds
    }

    /// Largest `dt * |r|` over nodes.
    pub fn reaction_number(&self, dt: f64) -> f64 {
        self.reaction.iter().fold(0.0f64, |m, v| m.max(v.abs())) * dt
    }

    /// `out = u - dt * (f . grad u + r u)` with zero values beyond the grid.
    pub fn apply_explicit(&self, grid: &SpatialGrid, u: &[f64], dt: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.reaction[i] * u[i];
        }
        self.add_convection(grid, u, out);
        for (o, &ui) in out.iter_mut().zip(u) {
            *o = ui - dt * *o;
        }
    }

    /// `out = decay * (u - dt * f . grad u)`.
    pub fn apply_integrating(&self, grid: &SpatialGrid, u: &[f64], dt: f64, decay: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.add_convection(grid, u, out);
        for ((o, &ui), &e) in out.iter_mut().zip(u).zip(decay) {
            *o = e * (ui - dt * *o);
        }
    }

    /// `out += f . grad u` by central differences.
    fn add_convection(&self, grid: &SpatialGrid, u: &[f64], out: &mut [f64]) {
        let ns = grid.ns();
        let inv_2ds = 0.5 / grid.ds();
        for d in 0..self.dim {
            let stride = grid.stride(d);
            let drift = self.drift(d);
            for (i, o) in out.iter_mut().enumerate() {
                let f = drift[i];
                if f == 0.0 {
                    continue;
                }
                let pos = (i / stride) % ns;
                let up = if pos + 1 < ns { u[i + stride] } else { 0.0 };
                let down = if pos > 0 { u[i - stride] } else { 0.0 };
                *o += f * (up - down) * inv_2ds;
            }
        }
    }
}

/// How the reaction term `r u` enters the explicit half of the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReactionScheme {
    /// Forward Euler: `w = u - dt (f . grad u + r u)`.
    #[default]
    Explicit,
    /// Integrating factor: `w = exp(-dt r) (u - dt f . grad u)`. Agrees with
    /// `Explicit` to `O((dt r)^2)` and stays bounded when `dt |r|` is large.
    Exponential,
}

/// Reusable stepper: owns the planned transform and scratch buffers so the
/// filter loop does not allocate per step.
#[derive(Debug, Clone)]
pub struct KfeStepper {
    transform: SineTransform,
    /// `Lambda` with the inverse-transform scale folded in.
    scaled_factors: Vec<f64>,
    explicit: Vec<f64>,
    /// `exp(-dt r)` per node when the reaction is integrated exactly.
    decay: Option<Vec<f64>>,
    work: DstWork,
}

impl KfeStepper {
    pub fn new(grid: &SpatialGrid, spectral: &SpectralDiffusion) -> Result<Self> {
        if spectral.ns() != grid.ns() || spectral.dim() != grid.dim() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                found: spectral.factors().len(),
            });
        }
        Ok(Self::with_transform(grid, spectral, SineTransform::new(grid.ns())))
    }

    /// Like [`KfeStepper::new`] with an explicit transform strategy.
    pub fn with_transform(grid: &SpatialGrid, spectral: &SpectralDiffusion, transform: SineTransform) -> Self {
        let scale = libm::pow(2.0 / (grid.ns() + 1) as f64, grid.dim() as f64);
        KfeStepper {
            transform,
            scaled_factors: spectral.factors().iter().map(|l| l * scale).collect(),
            explicit: vec![0.0; grid.len()],
            decay: None,
            work: DstWork::default(),
        }
    }

    /// Selects the reaction treatment. `op` and `dt` must be the ones later
    /// passed to [`KfeStepper::step_in_place`].
    pub fn with_reaction(mut self, scheme: ReactionScheme, op: &DriftReactionOperator, dt: f64) -> Self {
        self.decay = match scheme {
            ReactionScheme::Explicit => None,
            ReactionScheme::Exponential => Some(op.reaction().iter().map(|r| libm::exp(-dt * r)).collect()),
        };
        self
    }

    pub fn reaction_scheme(&self) -> ReactionScheme {
        if self.decay.is_some() {
            ReactionScheme::Exponential
        } else {
            ReactionScheme::Explicit
        }
    }

    /// Advances `u` in place by one fine step. Returns the flat index of the
    /// first non-finite value, if any.
    pub fn step_in_place(
        &mut self,
        u: &mut [f64],
        op: &DriftReactionOperator,
        grid: &SpatialGrid,
        dt: f64,
    ) -> core::result::Result<(), usize> {
        match &self.decay {
            None => op.apply_explicit(grid, u, dt, &mut self.explicit),
            Some(decay) => op.apply_integrating(grid, u, dt, decay, &mut self.explicit),
        }
        self.transform.apply_nd(&mut self.explicit, grid.dim(), &mut self.work);
        for (w, l) in self.explicit.iter_mut().zip(&self.scaled_factors) {
            *w *= l;
        }
        self.transform.apply_nd(&mut self.explicit, grid.dim(), &mut self.work);
        u.copy_from_slice(&self.explicit);
        match u.iter().position(|v| !v.is_finite()) {
            Some(node) => Err(node),
            None => Ok(()),
        }
    }
}

/// One semi-implicit step; the result is unnormalized.
pub fn kfe_step(
    u: &DensityField,
    op: &DriftReactionOperator,
    spectral: &SpectralDiffusion,
    grid: &SpatialGrid,
    dt: f64,
) -> Result<DensityField> {
    if u.len() != grid.len() || op.nodes() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            found: if u.len() != grid.len() { u.len() } else { op.nodes() },
        });
    }
    let mut stepper = KfeStepper::new(grid, spectral)?;
    let mut values = u.values().to_vec();
    stepper
        .step_in_place(&mut values, op, grid, dt)
        .map_err(|node| Error::NonFiniteField { step: 0, node })?;
    Ok(DensityField::new(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DEFAULT_NODE_BUDGET};
    use crate::spectral::compute_lambda;

    #[test]
    fn cubic_sensor_coefficients_at_one() {
        let m = ModelSpec::parse(1, &["cos(x1)"], &["x1^3"]).unwrap();
        let g = SpatialGrid::new(1, -1.0, 0.5, 5, DEFAULT_NODE_BUDGET).unwrap();
        let op = build_operator(&m, &g).unwrap();
        // node 4 sits at s = 1
        assert!((op.drift(0)[4] - 0.540302).abs() < 1e-6);
        assert!((op.reaction()[4] - (-0.341471)).abs() < 1e-6);
        assert_eq!(op.observation(0)[4], 1.0);
    }

    #[test]
    fn zero_model_has_zero_coefficients() {
        let m = ModelSpec::parse(2, &["0", "0"], &["0"]).unwrap();
        let g = SpatialGrid::new(2, -1.0, 0.5, 5, DEFAULT_NODE_BUDGET).unwrap();
        let op = build_operator(&m, &g).unwrap();
        assert!(op.drift(0).iter().chain(op.drift(1)).chain(op.reaction()).all(|&v| v == 0.0));
    }

    #[test]
    fn almost_linear_reaction_vanishes_at_origin() {
        let m = ModelSpec::parse(1, &["0"], &["x1*(1+0.25*cos(x1))"]).unwrap();
        let g = SpatialGrid::new(1, -1.0, 0.5, 5, DEFAULT_NODE_BUDGET).unwrap();
        let op = build_operator(&m, &g).unwrap();
        assert_eq!(op.reaction()[2], 0.0);
    }

    #[test]
    fn non_finite_coefficient_names_node() {
        let m = ModelSpec::parse(1, &["log(x1)"], &["x1"]).unwrap();
        let g = build_grid(1, &[-1.0], &[1.0], 0.5, DEFAULT_NODE_BUDGET).unwrap();
        match build_operator(&m, &g).unwrap_err() {
            Error::NonFiniteCoefficient { coords, .. } => assert_eq!(coords, [-1.0]),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn zero_field_stays_zero() {
        let m = ModelSpec::parse(1, &["cos(x1)"], &["x1^3"]).unwrap();
        let g = SpatialGrid::new(1, -2.0, 0.25, 17, DEFAULT_NODE_BUDGET).unwrap();
        let op = build_operator(&m, &g).unwrap();
        let l = compute_lambda(1, 17, 1e-3, 0.25).unwrap();
        let out = kfe_step(&DensityField::new(vec![0.0; 17]), &op, &l, &g, 1e-3).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }
}
