//! Implicit diffusion factors in the sine basis.
//!
//! The discrete Laplacian with homogeneous Dirichlet ends is a Kronecker sum
//! of 1-D second-difference matrices, each diagonalized by the DST-I with
//! eigenvalues `-(4/ds^2) sin^2(k pi / (2(ns+1)))`. A backward-Euler step of
//! `du/dt = (1/2) Lap u` is therefore a pointwise division in the sine
//! basis by `1 + (dt/2) * sum_d (4/ds^2) sin^2(k_d pi / (2(ns+1)))`.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Per-mode multipliers `Lambda[k_1..k_D]`, laid out like the density.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDiffusion {
    dim: usize,
    ns: usize,
    factors: Vec<f64>,
}

/// 1-D eigenvalues of `(1/ds^2) tridiag(-1, 2, -1)`, `k = 1..=ns`.
pub fn laplacian_eigenvalues(ns: usize, ds: f64) -> Vec<f64> {
    let c = 4.0 / (ds * ds);
    (1..=ns)
        .map(|k| {
            let s = libm::sin(k as f64 * core::f64::consts::PI / (2 * (ns + 1)) as f64);
            c * s * s
        })
        .collect()
}

/// Builds the spectral factors for `dim` axes of `ns` nodes.
pub fn compute_lambda(dim: usize, ns: usize, dt: f64, ds: f64) -> Result<SpectralDiffusion> {
    if dim == 0 || ns == 0 || !(dt > 0.0 && dt.is_finite()) || !(ds > 0.0 && ds.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "compute_lambda needs positive arguments (dim={dim}, ns={ns}, dt={dt}, ds={ds})"
        )));
    }
    let eig = laplacian_eigenvalues(ns, ds);
    let len = ns.pow(dim as u32);
    let half_dt = 0.5 * dt;
    let mut factors = Vec::with_capacity(len);
    for flat in 0..len {
        let mut rest = flat;
        let mut sum = 0.0;
        for _ in 0..dim {
            sum += eig[rest % ns];
            rest /= ns;
        }
        factors.push(1.0 / (1.0 + half_dt * sum));
    }
    Ok(SpectralDiffusion { dim, ns, factors })
}

impl SpectralDiffusion {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ns(&self) -> usize {
        self.ns
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    /// Factor for the zero-based mode multi-index (mode `k_d = i_d + 1`).
    pub fn factor(&self, modes: &[usize]) -> f64 {
        let flat = modes.iter().fold(0, |acc, &i| acc * self.ns + i);
        self.factors[flat]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_node_values() {
        let l = compute_lambda(1, 3, 0.001, 0.5).unwrap();
        // 1 / (1 + 0.0005 mu) with mu the eigenvalues of 4 * tridiag(-1, 2, -1),
        // computed with a dense symmetric eigensolver.
        let expect = [0.998829798, 0.996015936, 0.993217884];
        for (a, b) in l.factors().iter().zip(expect) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn bounds_and_limit() {
        let l = compute_lambda(2, 10, 0.01, 0.1).unwrap();
        assert!(l.factors().iter().all(|&x| x > 0.0 && x < 1.0));
        let tiny = compute_lambda(2, 10, 1e-9, 0.1).unwrap();
        assert!(tiny.factors().iter().all(|&x| x > 1.0 - 1e-6));
        // symmetric under swapping equal-size axes
        assert_eq!(l.factor(&[2, 7]), l.factor(&[7, 2]));
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(compute_lambda(1, 3, 0.0, 0.5).is_err());
        assert!(compute_lambda(0, 3, 0.1, 0.5).is_err());
    }
}
