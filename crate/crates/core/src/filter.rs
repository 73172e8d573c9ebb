//! The filtering loop.
//!
//! For each observation interval `(tau_{k-1}, tau_k]` the density is
//! propagated `nt` fine steps with [`KfeStepper`], multiplied by
//! `exp(h . dy_k)` with `dy_k = y(tau_k) - y(tau_{k-1})`, renormalized, and
//! its mean recorded as the estimate at `tau_k`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::density::{estimate_mean, observation_update_with, DensityField};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::kfe::{build_operator, DriftReactionOperator, KfeStepper, ReactionScheme};
use crate::matrix::Matrix;
use crate::model::ModelSpec;
use crate::sim::{observation_increments, Path};
use crate::spectral::compute_lambda;
use crate::time::TimeGrid;

/// Hooks into [`run_filter`]: a clock for phase timings and a per-observation
/// callback for progress reporting and cancellation.
pub trait FilterObserver {
    /// Seconds since an arbitrary origin. The default disables timing.
    fn now(&self) -> f64 {
        0.0
    }

    /// Called after the update and estimate for observation `k` (1-based).
    /// Returning `Break` cancels the run.
    fn on_observation(&mut self, _k: usize, _ntau: usize, _density: &DensityField) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

impl FilterObserver for () {}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOptions {
    /// Number of density snapshots kept, spread evenly over the run
    /// (the initial density is always the first). 0 keeps none.
    pub snapshots: usize,
    pub reaction: ReactionScheme,
    /// Before each observation update, values below `floor * max(u)`
    /// (negative round-off included) are set to zero. The sine transforms
    /// leave noise around `1e-16 * max(u)` on every node, and the update
    /// can multiply a far node by `exp(40)` or more when `h` is steep, so
    /// untruncated noise can outweigh the real posterior. 0 disables.
    pub floor: f64,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            snapshots: 20,
            reaction: ReactionScheme::Exponential,
            floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub propagation: f64,
    pub update: f64,
    pub estimation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Observation index the density belongs to.
    pub k: usize,
    pub tau: f64,
    pub density: DensityField,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// `dt * max|f| / ds` exceeds 1; the explicit convection step can amplify.
    Courant(f64),
    /// `dt * max|r|` exceeds 1; the explicit reaction step can amplify.
    Reaction(f64),
    /// An estimate came within one spacing of the grid boundary (first
    /// occurrence only).
    NearBoundary { k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    /// Row `k` is the estimate at `tau_k`, `k = 0..=ntau`.
    pub estimates: Matrix,
    /// Per-observation RMSE against the truth, filled by
    /// [`FilterResult::attach_truth`].
    pub errors: Vec<f64>,
    pub timings: PhaseTimings,
    pub snapshots: Vec<Snapshot>,
    pub warnings: Vec<Warning>,
    /// Largest `|mass - 1|` seen right after an observation update.
    pub max_mass_error: f64,
    pub dtau: f64,
}

impl FilterResult {
    pub fn taus(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.estimates.rows()).map(move |k| k as f64 * self.dtau)
    }

    /// Computes per-step errors `sqrt(mean_d (xhat - x)^2)` against the truth
    /// sampled at observation times.
    pub fn attach_truth(&mut self, truth: &Matrix) -> Result<()> {
        if truth.rows() != self.estimates.rows() || truth.cols() != self.estimates.cols() {
            return Err(Error::ShapeMismatch {
                expected: self.estimates.rows() * self.estimates.cols(),
                found: truth.rows() * truth.cols(),
            });
        }
        self.errors = self
            .estimates
            .iter_rows()
            .zip(truth.iter_rows())
            .map(|(e, t)| {
                let ss: f64 = e.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                libm::sqrt(ss / e.len() as f64)
            })
            .collect();
        Ok(())
    }
}

fn snapshot_schedule(ntau: usize, count: usize) -> Vec<usize> {
    if count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![0];
    }
    let mut ks: Vec<usize> = (0..count)
        .map(|i| (i as f64 * ntau as f64 / (count - 1) as f64 + 0.5) as usize)
        .collect();
    ks.dedup();
    ks
}

/// Runs the filter over `obs` (rows `y(tau_0)..y(tau_ntau)`).
pub fn run_filter(
    model: &ModelSpec,
    tg: &TimeGrid,
    grid: &SpatialGrid,
    obs: &Path,
    init: &DensityField,
    options: &FilterOptions,
    observer: &mut dyn FilterObserver,
) -> Result<FilterResult> {
    if obs.len() != tg.ntau() + 1 {
        return Err(Error::ShapeMismatch {
            expected: tg.ntau() + 1,
            found: obs.len(),
        });
    }
    if obs.dim() != model.obs_dim() {
        return Err(Error::ShapeMismatch {
            expected: model.obs_dim(),
            found: obs.dim(),
        });
    }
    if init.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            found: init.len(),
        });
    }
    let op = build_operator(model, grid)?;
    let spectral = compute_lambda(grid.dim(), grid.ns(), tg.dt(), grid.ds())?;
    let stepper = KfeStepper::new(grid, &spectral)?.with_reaction(options.reaction, &op, tg.dt());
    run_filter_with(&op, stepper, tg, grid, obs, init, options, observer)
}

/// [`run_filter`] with a prebuilt operator and stepper.
#[allow(clippy::too_many_arguments)]
pub fn run_filter_with(
    op: &DriftReactionOperator,
    mut stepper: KfeStepper,
    tg: &TimeGrid,
    grid: &SpatialGrid,
    obs: &Path,
    init: &DensityField,
    options: &FilterOptions,
    observer: &mut dyn FilterObserver,
) -> Result<FilterResult> {
    let ntau = tg.ntau();
    let dt = tg.dt();
    let dim = grid.dim();

    let mut warnings = Vec::new();
    let courant = op.courant_number(dt, grid.ds());
    if courant > 1.0 {
        warnings.push(Warning::Courant(courant));
    }
    let reaction = op.reaction_number(dt);
    if reaction > 1.0 && stepper.reaction_scheme() == ReactionScheme::Explicit {
        warnings.push(Warning::Reaction(reaction));
    }

    let increments = observation_increments(obs);
    let schedule = snapshot_schedule(ntau, options.snapshots);
    let mut next_snapshot = schedule.iter().peekable();

    let mut u = crate::density::normalize(init.clone(), grid)?;
    let mut estimates = Matrix::zeros(ntau + 1, dim);
    estimates.row_mut(0).copy_from_slice(&estimate_mean(&u, grid));
    let mut snapshots = Vec::new();
    if next_snapshot.next_if_eq(&&0).is_some() {
        snapshots.push(Snapshot {
            k: 0,
            tau: 0.0,
            density: u.clone(),
        });
    }

    let mut timings = PhaseTimings::default();
    let mut exponents = vec![0.0; grid.len()];
    let mut max_mass_error: f64 = 0.0;
    let mut warned_boundary = false;
    let margin = grid.ds();

    for k in 1..=ntau {
        let t0 = observer.now();
        {
            let values = u.values_mut();
            for n in 0..tg.nt() {
                stepper
                    .step_in_place(values, op, grid, dt)
                    .map_err(|node| Error::NonFiniteField {
                        step: (k - 1) * tg.nt() + n + 1,
                        node,
                    })?;
            }
            if options.floor > 0.0 {
                let cut = options.floor * values.iter().copied().fold(0.0, f64::max);
                values.iter_mut().filter(|v| **v < cut).for_each(|v| *v = 0.0);
            }
        }
        let t1 = observer.now();
        u = observation_update_with(u, op, increments.row(k - 1), grid, &mut exponents).map_err(|e| match e {
            Error::DensityCollapse { .. } => Error::DensityCollapse { observation: Some(k) },
            Error::NonFiniteField { node, .. } => Error::NonFiniteField {
                step: k * tg.nt(),
                node,
            },
            other => other,
        })?;
        max_mass_error = max_mass_error.max(libm::fabs(u.mass(grid) - 1.0));
        let t2 = observer.now();
        let mean = estimate_mean(&u, grid);
        if !warned_boundary && mean.iter().any(|&m| m - grid.lo() < margin || grid.hi() - m < margin) {
            warned_boundary = true;
            warnings.push(Warning::NearBoundary { k });
        }
        estimates.row_mut(k).copy_from_slice(&mean);
        let t3 = observer.now();
        timings.propagation += t1 - t0;
        timings.update += t2 - t1;
        timings.estimation += t3 - t2;

        if next_snapshot.next_if_eq(&&k).is_some() {
            snapshots.push(Snapshot {
                k,
                tau: k as f64 * tg.dtau(),
                density: u.clone(),
            });
        }
        if observer.on_observation(k, ntau, &u).is_break() {
            return Err(Error::Cancelled { observation: k });
        }
    }

    Ok(FilterResult {
        estimates,
        errors: Vec::new(),
        timings,
        snapshots,
        warnings,
        max_mass_error,
        dtau: tg.dtau(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_spans_run() {
        assert_eq!(snapshot_schedule(100, 5), [0, 25, 50, 75, 100]);
        assert_eq!(snapshot_schedule(3, 20), [0, 1, 2, 3]);
        assert!(snapshot_schedule(10, 0).is_empty());
        let s = snapshot_schedule(4000, 20);
        assert_eq!((s.len(), s[0], s[19]), (20, 0, 4000));
    }
}
