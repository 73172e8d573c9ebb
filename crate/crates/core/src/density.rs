//! Discrete densities on the grid and the pointwise operations on them.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::kfe::DriftReactionOperator;

/// Density values in grid flattening order.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    values: Vec<f64>,
    normalized: bool,
}

impl DensityField {
    /// Unnormalized field.
    pub fn new(values: Vec<f64>) -> Self {
        DensityField {
            values,
            normalized: false,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.normalized = false;
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `sum u * ds^D`.
    pub fn mass(&self, grid: &SpatialGrid) -> f64 {
        self.values.iter().sum::<f64>() * grid.cell_volume()
    }
}

/// Starting density for the filter.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDensity {
    Uniform,
    /// Isotropic Gaussian bump `exp(-|s - center|^2 / (2 sigma^2))`.
    Gaussian { center: Vec<f64>, sigma: f64 },
}

pub fn initial_density(grid: &SpatialGrid, kind: &InitialDensity) -> Result<DensityField> {
    let values = match kind {
        InitialDensity::Uniform => vec![1.0; grid.len()],
        InitialDensity::Gaussian { center, sigma } => {
            if !(*sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidArgument(alloc::format!("sigma must be positive, got {sigma}")));
            }
            if center.len() != grid.dim() {
                return Err(Error::ShapeMismatch {
                    expected: grid.dim(),
                    found: center.len(),
                });
            }
            if !grid.contains(center) {
                return Err(Error::CenterOutsideGrid { center: center.clone() });
            }
            let inv = 1.0 / (2.0 * sigma * sigma);
            let mut point = vec![0.0; grid.dim()];
            (0..grid.len())
                .map(|i| {
                    grid.point(i, &mut point);
                    let r2: f64 = point.iter().zip(center).map(|(s, c)| (s - c) * (s - c)).sum();
                    libm::exp(-r2 * inv)
                })
                .collect()
        }
    };
    normalize(DensityField::new(values), grid)
}

/// Rescales to unit discrete mass. Idempotent.
pub fn normalize(mut u: DensityField, grid: &SpatialGrid) -> Result<DensityField> {
    let mass = u.mass(grid);
    if !mass.is_finite() {
        let node = u.values.iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(Error::NonFiniteField { step: 0, node });
    }
    if mass <= 0.0 {
        return Err(Error::DensityCollapse { observation: None });
    }
    let scale = 1.0 / mass;
    u.values.iter_mut().for_each(|v| *v *= scale);
    u.normalized = true;
    Ok(u)
}

/// Multiplies by `exp(h(s) . dy - K)`, `K` the largest exponent on the grid,
/// then normalizes.
pub fn observation_update(
    u: DensityField,
    op: &DriftReactionOperator,
    dy: &[f64],
    grid: &SpatialGrid,
) -> Result<DensityField> {
    let mut exponents = vec![0.0; u.len()];
    observation_update_with(u, op, dy, grid, &mut exponents)
}

pub(crate) fn observation_update_with(
    mut u: DensityField,
    op: &DriftReactionOperator,
    dy: &[f64],
    grid: &SpatialGrid,
    exponents: &mut [f64],
) -> Result<DensityField> {
    if dy.len() != op.obs_dim() {
        return Err(Error::ShapeMismatch {
            expected: op.obs_dim(),
            found: dy.len(),
        });
    }
    if u.len() != op.nodes() {
        return Err(Error::ShapeMismatch {
            expected: op.nodes(),
            found: u.len(),
        });
    }
    exponents.iter_mut().for_each(|e| *e = 0.0);
    for (j, &dyj) in dy.iter().enumerate() {
        for (e, &h) in exponents.iter_mut().zip(op.observation(j)) {
            *e += h * dyj;
        }
    }
    let k = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (v, &e) in u.values.iter_mut().zip(exponents.iter()) {
        *v *= libm::exp(e - k);
    }
    normalize(u, grid)
}

/// Posterior mean `sum_i s_i u_i ds^D`.
pub fn estimate_mean(u: &DensityField, grid: &SpatialGrid) -> Vec<f64> {
    let dim = grid.dim();
    let ns = grid.ns();
    // Marginal weight of each coordinate index along each axis.
    let mut marginals = vec![0.0; dim * ns];
    let mut rest;
    for (i, &v) in u.values().iter().enumerate() {
        rest = i;
        for d in (0..dim).rev() {
            marginals[d * ns + rest % ns] += v;
            rest /= ns;
        }
    }
    let vol = grid.cell_volume();
    (0..dim)
        .map(|d| {
            marginals[d * ns..(d + 1) * ns]
                .iter()
                .enumerate()
                .map(|(i, w)| grid.coord(i) * w)
                .sum::<f64>()
                * vol
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DEFAULT_NODE_BUDGET;
    use crate::kfe::build_operator;
    use crate::model::ModelSpec;

    fn line(lo: f64, ds: f64, ns: usize) -> SpatialGrid {
        SpatialGrid::new(1, lo, ds, ns, DEFAULT_NODE_BUDGET).unwrap()
    }

    #[test]
    fn uniform_three_nodes() {
        let g = line(0.0, 0.5, 3);
        let u = initial_density(&g, &InitialDensity::Uniform).unwrap();
        assert!(u.is_normalized());
        for v in u.values() {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_is_symmetric_and_centered() {
        let g = line(-3.0, 0.25, 25);
        let u = initial_density(
            &g,
            &InitialDensity::Gaussian {
                center: vec![0.0],
                sigma: 1.0,
            },
        )
        .unwrap();
        let v = u.values();
        for i in 0..12 {
            assert!((v[i] - v[24 - i]).abs() < 1e-15);
        }
        assert!(estimate_mean(&u, &g)[0].abs() < 1e-10);

        let off = initial_density(
            &g,
            &InitialDensity::Gaussian {
                center: vec![0.8],
                sigma: 0.5,
            },
        )
        .unwrap();
        assert!((estimate_mean(&off, &g)[0] - 0.8).abs() < g.ds() / 2.0);
    }

    #[test]
    fn gaussian_center_must_be_inside() {
        let g = line(0.0, 0.5, 5);
        let kind = InitialDensity::Gaussian {
            center: vec![5.0],
            sigma: 1.0,
        };
        assert!(matches!(initial_density(&g, &kind), Err(Error::CenterOutsideGrid { .. })));
    }

    #[test]
    fn normalize_is_idempotent_and_scale_free() {
        let g = line(0.0, 0.1, 7);
        let raw = DensityField::new(vec![0.3, 1.0, 2.5, 0.2, 0.9, 4.0, 0.01]);
        let a = normalize(raw.clone(), &g).unwrap();
        assert!((a.mass(&g) - 1.0).abs() < 1e-12);
        let b = normalize(a.clone(), &g).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-15);
        }
        let big = DensityField::new(raw.values().iter().map(|v| v * 1e6).collect());
        let c = normalize(big, &g).unwrap();
        for (x, y) in a.values().iter().zip(c.values()) {
            assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
        }
        assert!(matches!(
            normalize(DensityField::new(vec![0.0; 7]), &g),
            Err(Error::DensityCollapse { .. })
        ));
    }

    #[test]
    fn two_node_bayes_factor() {
        // Nodes at 0 and 1 (plus a third so the grid is valid; it carries no mass).
        let g = line(0.0, 1.0, 3);
        let m = ModelSpec::parse(1, &["0"], &["x1"]).unwrap();
        let op = build_operator(&m, &g).unwrap();
        let u = DensityField::new(vec![0.5, 0.5, 0.0]);
        let post = observation_update(u, &op, &[core::f64::consts::LN_2], &g).unwrap();
        let v = post.values();
        assert!((v[1] / v[0] - 2.0).abs() < 1e-14);
        assert!((post.mass(&g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uninformative_updates() {
        let g = line(-1.0, 0.5, 5);
        let m = ModelSpec::parse(1, &["0"], &["x1^3"]).unwrap();
        let op = build_operator(&m, &g).unwrap();
        let u = normalize(DensityField::new(vec![1.0, 2.0, 3.0, 2.0, 0.5]), &g).unwrap();
        let same = observation_update(u.clone(), &op, &[0.0], &g).unwrap();
        assert_eq!(same.values(), u.values());

        let flat = ModelSpec::parse(1, &["0"], &["2.5"]).unwrap();
        let op = build_operator(&flat, &g).unwrap();
        let same = observation_update(u.clone(), &op, &[0.7], &g).unwrap();
        for (x, y) in same.values().iter().zip(u.values()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn extreme_exponents_stay_finite() {
        let g = line(-10.0, 0.5, 41);
        let m = ModelSpec::parse(1, &["0"], &["x1^3"]).unwrap();
        let op = build_operator(&m, &g).unwrap();
        let u = initial_density(&g, &InitialDensity::Uniform).unwrap();
        // |h dy| reaches 700 at the edges
        let post = observation_update(u, &op, &[0.7], &g).unwrap();
        assert!(post.values().iter().all(|v| v.is_finite()));
        assert!((post.mass(&g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_of_delta_is_the_node() {
        let g = SpatialGrid::new(2, -1.0, 0.5, 5, DEFAULT_NODE_BUDGET).unwrap();
        let mut v = vec![0.0; 25];
        v[g.flat_index(&[3, 1])] = 1.0;
        let u = normalize(DensityField::new(v), &g).unwrap();
        let m = estimate_mean(&u, &g);
        assert_eq!(m, [0.5, -0.5]);
    }
}
