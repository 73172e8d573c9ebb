//! Euler-Maruyama simulation of the signal and observation processes.
//!
//! Randomness comes from ChaCha20 seeded with `ChaCha20Rng::seed_from_u64`
//! (rand_chacha 0.9). The state and observation noises use separate
//! ChaCha streams of the same key (stream ids from [`NoiseConfig`], 0 and 1
//! by default), and standard normals are drawn with `rand_distr`'s
//! ziggurat `StandardNormal`. Other implementations will not reproduce
//! these paths bit for bit unless they use the same generator and sampler.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::expr;
use crate::matrix::Matrix;
use crate::model::ModelSpec;
use crate::time::TimeGrid;

/// Sampled path: row `n` holds the value at time `n * step`.
///
/// The state path is sampled at every fine step; the observation path at
/// every observation time `k * dtau`, starting with `y(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    step: f64,
    values: Matrix,
}

impl Path {
    pub fn new(step: f64, values: Matrix) -> Self {
        Path { step, values }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.step
    }

    pub fn row(&self, n: usize) -> &[f64] {
        self.values.row(n)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// Every `stride`-th row, starting at row 0.
    pub fn subsample(&self, stride: usize) -> Path {
        let rows: Vec<&[f64]> = (0..self.len()).step_by(stride).map(|n| self.row(n)).collect();
        Path {
            step: self.step * stride as f64,
            values: Matrix::from_rows(&rows),
        }
    }

    /// Smallest and largest entry over all rows and columns.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Noise controls for [`simulate_paths_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Multiplies the state noise; 0 gives the deterministic ODE path.
    pub state_scale: f64,
    /// Multiplies the observation noise.
    pub obs_scale: f64,
    pub state_stream: u64,
    pub obs_stream: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            state_scale: 1.0,
            obs_scale: 1.0,
            state_stream: 0,
            obs_stream: 1,
        }
    }
}

/// Simulates `(state, observation)` with unit noise.
pub fn simulate_paths(model: &ModelSpec, tg: &TimeGrid, x0: &[f64], seed: u64) -> Result<(Path, Path)> {
    simulate_paths_with(model, tg, x0, seed, &NoiseConfig::default())
}

/// Euler-Maruyama on the fine grid:
///
/// ```text
/// x[n+1] = x[n] + f(x[n]) dt + sqrt(dt) xi[n]
/// z[n+1] = z[n] + h(x[n]) dt + sqrt(dt) eta[n],   z[0] = 0
/// ```
///
/// The observation path keeps `z` at fine indices `k * nt`.
pub fn simulate_paths_with(
    model: &ModelSpec,
    tg: &TimeGrid,
    x0: &[f64],
    seed: u64,
    noise: &NoiseConfig,
) -> Result<(Path, Path)> {
    let dim = model.dim();
    let obs_dim = model.obs_dim();
    if x0.len() != dim {
        return Err(Error::ShapeMismatch {
            expected: dim,
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial state must be finite".into()));
    }

    let mut state_rng = ChaCha20Rng::seed_from_u64(seed);
    state_rng.set_stream(noise.state_stream);
    let mut obs_rng = ChaCha20Rng::seed_from_u64(seed);
    obs_rng.set_stream(noise.obs_stream);

    let dt = tg.dt();
    let sqrt_dt = libm::sqrt(dt);
    let steps = tg.total_steps();
    let nt = tg.nt();

    let mut states = Vec::with_capacity((steps + 1) * dim);
    states.extend_from_slice(x0);
    let mut observations = Vec::with_capacity((tg.ntau() + 1) * obs_dim);
    observations.extend(core::iter::repeat_n(0.0, obs_dim));

    let mut x = x0.to_vec();
    let mut z = vec![0.0; obs_dim];
    let mut drift = vec![0.0; dim];
    let mut obs = vec![0.0; obs_dim];

    for n in 0..steps {
        expr::eval_all(model.drift(), &x, &mut drift);
        expr::eval_all(model.observation(), &x, &mut obs);
        if drift.iter().chain(&obs).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSimulation { step: n, time: n as f64 * dt });
        }
        for (xi, fi) in x.iter_mut().zip(&drift) {
            let noise_draw: f64 = state_rng.sample(StandardNormal);
            *xi += fi * dt + noise.state_scale * sqrt_dt * noise_draw;
        }
        for (zj, hj) in z.iter_mut().zip(&obs) {
            let noise_draw: f64 = obs_rng.sample(StandardNormal);
            *zj += hj * dt + noise.obs_scale * sqrt_dt * noise_draw;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSimulation {
                step: n + 1,
                time: (n + 1) as f64 * dt,
            });
        }
        states.extend_from_slice(&x);
        if (n + 1) % nt == 0 {
            observations.extend_from_slice(&z);
        }
    }

    Ok((
        Path::new(dt, Matrix::from_vec(steps + 1, dim, states)),
        Path::new(tg.dtau(), Matrix::from_vec(tg.ntau() + 1, obs_dim, observations)),
    ))
}

/// Observation increments `y(tau_k) - y(tau_{k-1})` for `k = 1..=ntau`.
pub fn observation_increments(obs: &Path) -> Matrix {
    let rows = obs.len().saturating_sub(1);
    let cols = obs.dim();
    let mut out = Matrix::zeros(rows, cols);
    for k in 0..rows {
        let (prev, next) = (obs.row(k), obs.row(k + 1));
        for (o, (a, b)) in out.row_mut(k).iter_mut().zip(prev.iter().zip(next)) {
            *o = b - a;
        }
    }
    out
}
