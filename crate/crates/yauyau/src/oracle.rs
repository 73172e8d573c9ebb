//! Reference filters used to check the grid filter: a discrete Kalman
//! filter for linear models and a bootstrap particle filter for anything.
//!
//! Both consume the same observation path as the grid filter and report an
//! estimate at every observation time `tau_0..tau_ntau`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use yauyau_core::expr::Expr;
use yauyau_core::{observation_increments, Matrix, ModelSpec, Path, TimeGrid};

use crate::error::{Error, Result};

/// Root mean square of `estimates - truth` over all rows and columns.
pub fn rmse(estimates: &Matrix, truth: &Matrix) -> Result<f64> {
    if estimates.rows() != truth.rows() || estimates.cols() != truth.cols() {
        return Err(Error::Oracle(format!(
            "rmse shape mismatch: {}x{} vs {}x{}",
            estimates.rows(),
            estimates.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    let n = estimates.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    let ss: f64 = estimates
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / n as f64).sqrt())
}

/// `dx = A x dt + dv`, `dy = C x dt + dw`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl LinearModel {
    pub fn scalar(a: f64, c: f64) -> Self {
        LinearModel {
            a: DMatrix::from_element(1, 1, a),
            c: DMatrix::from_element(1, 1, c),
        }
    }

    /// Reads off `A` and `C` from a model whose drift and observation are
    /// linear, checking linearity at a few probe points.
    pub fn from_model(model: &ModelSpec) -> Result<Self> {
        let d = model.dim();
        let jacobian = |exprs: &[Expr]| -> DMatrix<f64> {
            let mut m = DMatrix::zeros(exprs.len(), d);
            for col in 0..d {
                let mut e = vec![0.0; d];
                e[col] = 1.0;
                for (row, ex) in exprs.iter().enumerate() {
                    m[(row, col)] = ex.eval(&e);
                }
            }
            m
        };
        let a = jacobian(model.drift());
        let c = jacobian(model.observation());
        let probes = [0.0, 0.7, -1.3, 2.9, -0.25];
        for shift in 0..probes.len() {
            let x: Vec<f64> = (0..d).map(|i| probes[(i + shift) % probes.len()]).collect();
            let xv = DVector::from_column_slice(&x);
            for (exprs, m) in [(model.drift(), &a), (model.observation(), &c)] {
                let lin = m * &xv;
                for (row, ex) in exprs.iter().enumerate() {
                    let v = ex.eval(&x);
                    if (v - lin[row]).abs() > 1e-9 * (1.0 + v.abs()) {
                        return Err(Error::Oracle(format!(
                            "model is not linear: component {} evaluates to {v} at {x:?}, linear part gives {}",
                            row + 1,
                            lin[row]
                        )));
                    }
                }
            }
        }
        Ok(LinearModel { a, c })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanOptions {
    pub prior_mean: Vec<f64>,
    /// Prior covariance `prior_var * I`.
    pub prior_var: f64,
    /// Scales the process noise covariance; 0 models a static state.
    pub process_noise: f64,
}

#[derive(Debug, Clone)]
pub struct KalmanOutput {
    /// Row `k` is the posterior mean at `tau_k`.
    pub means: Matrix,
    /// Posterior covariance at each `tau_k`.
    pub covariances: Vec<DMatrix<f64>>,
}

/// Kalman filter on the Euler-discretized system.
///
/// Over one observation interval the state map is `F^nt` with
/// `F = I + A dt`, and the accumulated process covariance is
/// `sum_j F^j (dt I) F^j'`. The increment `dy_k` is treated as a measurement
/// `dy_k / dtau = C x(tau_k) + noise` with covariance `I / dtau`.
pub fn kalman_oracle(model: &LinearModel, obs: &Path, tg: &TimeGrid, opts: &KalmanOptions) -> Result<KalmanOutput> {
    let d = model.a.nrows();
    let m = model.c.nrows();
    if obs.dim() != m || obs.len() != tg.ntau() + 1 || opts.prior_mean.len() != d {
        return Err(Error::Oracle("kalman_oracle: inconsistent shapes".into()));
    }
    let dt = tg.dt();
    let dtau = tg.dtau();
    let eye = DMatrix::<f64>::identity(d, d);
    let fine = &eye + &model.a * dt;
    let mut phi = eye.clone();
    let mut q = DMatrix::zeros(d, d);
    for _ in 0..tg.nt() {
        q += &phi * phi.transpose() * (dt * opts.process_noise);
        phi = &fine * phi;
    }
    let r = DMatrix::<f64>::identity(m, m) / dtau;

    let mut mean = DVector::from_column_slice(&opts.prior_mean);
    let mut cov = &eye * opts.prior_var;
    let mut means = Matrix::zeros(tg.ntau() + 1, d);
    means.row_mut(0).copy_from_slice(mean.as_slice());
    let mut covariances = vec![cov.clone()];
    let increments = observation_increments(obs);

    for k in 1..=tg.ntau() {
        mean = &phi * mean;
        cov = &phi * &cov * phi.transpose() + &q;
        let z = DVector::from_column_slice(increments.row(k - 1)) / dtau;
        let s = &model.c * &cov * model.c.transpose() + &r;
        let s_inv = s
            .cholesky()
            .ok_or_else(|| Error::Oracle(format!("innovation covariance not positive definite at step {k}")))?
            .inverse();
        let gain = &cov * model.c.transpose() * s_inv;
        mean = &mean + &gain * (z - &model.c * &mean);
        cov = (&eye - &gain * &model.c) * &cov;
        cov = (&cov + cov.transpose()) * 0.5;
        if cov.clone().cholesky().is_none() {
            return Err(Error::Oracle(format!("posterior covariance not positive definite at step {k}")));
        }
        means.row_mut(k).copy_from_slice(mean.as_slice());
        covariances.push(cov.clone());
    }
    Ok(KalmanOutput { means, covariances })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleOptions {
    pub particles: usize,
    pub seed: u64,
    /// Particles start from `N(prior_mean, prior_sigma^2 I)`.
    pub prior_mean: Vec<f64>,
    pub prior_sigma: f64,
}

/// Bootstrap particle filter.
///
/// Particles follow the model's Euler-Maruyama dynamics over each
/// observation interval, are weighted by `exp(h . dy - |h|^2 dtau / 2)` at
/// the interval's end, and are resampled systematically every interval.
/// The estimate is the weighted mean before resampling.
pub fn particle_oracle(model: &ModelSpec, obs: &Path, tg: &TimeGrid, opts: &ParticleOptions) -> Result<Matrix> {
    let d = model.dim();
    let m = model.obs_dim();
    let n = opts.particles;
    if n < 100 {
        return Err(Error::Oracle(format!("particle_oracle needs at least 100 particles, got {n}")));
    }
    if obs.dim() != m || obs.len() != tg.ntau() + 1 || opts.prior_mean.len() != d {
        return Err(Error::Oracle("particle_oracle: inconsistent shapes".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let dt = tg.dt();
    let sqrt_dt = dt.sqrt();
    let dtau = tg.dtau();

    let mut xs: Vec<f64> = (0..n)
        .flat_map(|_| opts.prior_mean.clone())
        .map(|mu| {
            let z: f64 = rng.sample(StandardNormal);
            mu + opts.prior_sigma * z
        })
        .collect();
    let mut next = vec![0.0; n * d];
    let mut logw = vec![0.0; n];
    let mut drift = vec![0.0; d];
    let mut h = vec![0.0; m];

    let mut estimates = Matrix::zeros(tg.ntau() + 1, d);
    for j in 0..d {
        estimates.row_mut(0)[j] = xs.iter().skip(j).step_by(d).sum::<f64>() / n as f64;
    }
    let increments = observation_increments(obs);

    for k in 1..=tg.ntau() {
        for p in xs.chunks_exact_mut(d) {
            for _ in 0..tg.nt() {
                yauyau_core::expr::eval_all(model.drift(), p, &mut drift);
                for (x, f) in p.iter_mut().zip(&drift) {
                    let z: f64 = rng.sample(StandardNormal);
                    *x += f * dt + sqrt_dt * z;
                }
            }
        }
        let dy = increments.row(k - 1);
        for (w, p) in logw.iter_mut().zip(xs.chunks_exact(d)) {
            yauyau_core::expr::eval_all(model.observation(), p, &mut h);
            *w = h.iter().zip(dy).map(|(hj, yj)| hj * yj - 0.5 * hj * hj * dtau).sum();
        }
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Oracle(format!("particle weights degenerate at step {k}")));
        }
        let mut total = 0.0;
        for w in logw.iter_mut() {
            *w = (*w - max).exp();
            total += *w;
        }
        if total.is_nan() || total <= 0.0 {
            return Err(Error::Oracle(format!("particle weights degenerate at step {k}")));
        }
        let row = estimates.row_mut(k);
        row.iter_mut().for_each(|v| *v = 0.0);
        for (w, p) in logw.iter().zip(xs.chunks_exact(d)) {
            for (r, x) in row.iter_mut().zip(p) {
                *r += w * x;
            }
        }
        row.iter_mut().for_each(|v| *v /= total);

        // Systematic resampling.
        let step = total / n as f64;
        let mut u = rng.random::<f64>() * step;
        let mut cumulative = logw[0];
        let mut src = 0;
        for dst in 0..n {
            while cumulative < u && src + 1 < n {
                src += 1;
                cumulative += logw[src];
            }
            next[dst * d..(dst + 1) * d].copy_from_slice(&xs[src * d..(src + 1) * d]);
            u += step;
        }
        std::mem::swap(&mut xs, &mut next);
    }
    Ok(estimates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use yauyau_core::{simulate_paths, NoiseConfig};

    #[test]
    fn rmse_basics() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b = Matrix::from_rows(&[[1.0, 2.5], [3.0, 4.5]]);
        // offset 0.5 in one of two dimensions -> 0.5 / sqrt(2)
        assert!((rmse(&a, &b).unwrap() - 0.5 / 2f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&a, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn linear_model_extraction() {
        let m = ModelSpec::parse(2, &["-0.5*x1 + x2", "2*x1"], &["x1 - x2"]).unwrap();
        let lin = LinearModel::from_model(&m).unwrap();
        assert_eq!(lin.a, DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, 2.0, 0.0]));
        assert_eq!(lin.c, DMatrix::from_row_slice(1, 2, &[1.0, -1.0]));
        let cubic = ModelSpec::parse(1, &["cos(x1)"], &["x1^3"]).unwrap();
        assert!(LinearModel::from_model(&cubic).is_err());
    }

    #[test]
    fn static_state_variance_closed_form() {
        let tg = TimeGrid::new(1.0, 0.01, 0.05).unwrap();
        let m = ModelSpec::parse(1, &["0"], &["2*x1"]).unwrap();
        let (_, y) = simulate_paths(&m, &tg, &[0.4], 3).unwrap();
        let opts = KalmanOptions {
            prior_mean: vec![0.0],
            prior_var: 1.5,
            process_noise: 0.0,
        };
        let out = kalman_oracle(&LinearModel::scalar(0.0, 2.0), &y, &tg, &opts).unwrap();
        let r = 1.0 / tg.dtau();
        for (k, cov) in out.covariances.iter().enumerate() {
            let expect = 1.5 / (1.0 + k as f64 * 1.5 * 4.0 / r);
            assert!((cov[(0, 0)] - expect).abs() < 1e-10);
        }
        assert!(out.covariances.windows(2).all(|w| w[1][(0, 0)] < w[0][(0, 0)]));
    }

    #[test]
    fn uninformative_particle_filter_follows_prior_mean() {
        let m = ModelSpec::parse(1, &["-x1"], &["0"]).unwrap();
        let tg = TimeGrid::new(0.5, 0.01, 0.05).unwrap();
        let (_, y) = simulate_paths(&m, &tg, &[2.0], 1).unwrap();
        let opts = ParticleOptions {
            particles: 20_000,
            seed: 5,
            prior_mean: vec![2.0],
            prior_sigma: 0.1,
        };
        let est = particle_oracle(&m, &y, &tg, &opts).unwrap();
        // E x(t) = 2 (1 - dt)^(t/dt) for the Euler scheme
        for k in 0..=tg.ntau() {
            let expect = 2.0 * (1.0 - tg.dt()).powi((k * tg.nt()) as i32);
            assert!((est.get(k, 0) - expect).abs() < 0.03, "k={k}");
        }
        let again = particle_oracle(&m, &y, &tg, &opts).unwrap();
        assert_eq!(est, again);
        let few = ParticleOptions { particles: 50, ..opts };
        assert!(particle_oracle(&m, &y, &tg, &few).is_err());
    }

    #[test]
    fn particle_filter_agrees_with_kalman() {
        let m = ModelSpec::parse(1, &["-0.5*x1"], &["x1"]).unwrap();
        let tg = TimeGrid::new(2.0, 0.01, 0.05).unwrap();
        let (_, y) = yauyau_core::simulate_paths_with(&m, &tg, &[0.0], 11, &NoiseConfig::default()).unwrap();
        let kf = kalman_oracle(
            &LinearModel::from_model(&m).unwrap(),
            &y,
            &tg,
            &KalmanOptions {
                prior_mean: vec![0.0],
                prior_var: 1.0,
                process_noise: 1.0,
            },
        )
        .unwrap();
        // Monte-Carlo standard error from the spread of independent runs.
        let runs: Vec<Matrix> = (0..5)
            .map(|seed| {
                let opts = ParticleOptions {
                    particles: 10_000,
                    seed,
                    prior_mean: vec![0.0],
                    prior_sigma: 1.0,
                };
                particle_oracle(&m, &y, &tg, &opts).unwrap()
            })
            .collect();
        let rows = tg.ntau() + 1;
        let mut err2 = 0.0;
        let mut se2 = 0.0;
        for k in 0..rows {
            let vals: Vec<f64> = runs.iter().map(|r| r.get(k, 0)).collect();
            let mean = vals.iter().sum::<f64>() / 5.0;
            se2 += vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            err2 += (vals[0] - kf.means.get(k, 0)).powi(2);
        }
        let (err, se) = ((err2 / rows as f64).sqrt(), (se2 / rows as f64).sqrt());
        assert!(err < 3.0 * se, "rms deviation {err} vs standard error {se}");
    }
}
