//! The fine step against explicitly assembled dense operators.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use yauyau_core::dst::dst_nd;
use yauyau_core::spectral::laplacian_eigenvalues;
use yauyau_core::{
    build_operator, compute_lambda, kfe_step, DensityField, ModelSpec, SpatialGrid, DEFAULT_NODE_BUDGET,
};

fn grid(dim: usize, ns: usize, ds: f64) -> SpatialGrid {
    SpatialGrid::new(dim, -0.5 * ds * (ns - 1) as f64, ds, ns, DEFAULT_NODE_BUDGET).unwrap()
}

fn laplacian_1d(ns: usize, ds: f64) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(ns, ns);
    for i in 0..ns {
        l[(i, i)] = -2.0 / (ds * ds);
        if i > 0 {
            l[(i, i - 1)] = 1.0 / (ds * ds);
        }
        if i + 1 < ns {
            l[(i, i + 1)] = 1.0 / (ds * ds);
        }
    }
    l
}

fn step(model: &ModelSpec, g: &SpatialGrid, dt: f64, u: &[f64]) -> Vec<f64> {
    let op = build_operator(model, g).unwrap();
    let spectral = compute_lambda(g.dim(), g.ns(), dt, g.ds()).unwrap();
    kfe_step(&DensityField::new(u.to_vec()), &op, &spectral, g, dt)
        .unwrap()
        .into_values()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `(I - dt/2 L)^-1 (I + dt C) u` with `C u = -(f u' + r u)` by central
/// differences and zero values outside the grid.
fn dense_step(l: &DMatrix<f64>, c: &DMatrix<f64>, dt: f64, u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let eye = DMatrix::<f64>::identity(n, n);
    let rhs = (&eye + c * dt) * DVector::from_column_slice(u);
    let lhs = &eye - l * (0.5 * dt);
    lhs.lu().solve(&rhs).unwrap().as_slice().to_vec()
}

#[test]
fn one_dimensional_step_matches_dense_operators() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let dt = 1e-3;
    for _ in 0..5 {
        let (a, b, c0) = (rng.random_range(-2.0..2.0), rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0));
        let (d, e) = (rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
        let model = ModelSpec::parse(
            1,
            &[format!("{a}*sin({b}*x1) + {c0}")],
            &[format!("{d}*x1 + {e}*cos(x1)")],
        )
        .unwrap();
        let ns = rng.random_range(5..=32);
        let ds = rng.random_range(0.05..0.5);
        let g = grid(1, ns, ds);

        // coefficients from hand-derived formulas, not the symbolic engine
        let mut cm = DMatrix::zeros(ns, ns);
        for i in 0..ns {
            let x = g.coord(i);
            let f = a * (b * x).sin() + c0;
            let div = a * b * (b * x).cos();
            let h = d * x + e * x.cos();
            cm[(i, i)] = -(div + 0.5 * h * h);
            if i > 0 {
                cm[(i, i - 1)] = f / (2.0 * ds);
            }
            if i + 1 < ns {
                cm[(i, i + 1)] = -f / (2.0 * ds);
            }
        }
        let l = laplacian_1d(ns, ds);
        for _ in 0..50 {
            let u: Vec<f64> = (0..ns).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = step(&model, &g, dt, &u);
            let want = dense_step(&l, &cm, dt, &u);
            let err = got.iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8 * max_abs(&u).max(1.0), "ns={ns} err={err:e}");
        }
    }
}

#[test]
fn two_dimensional_step_matches_kronecker_operators() {
    let ns = 7;
    let ds = 0.3;
    let dt = 1e-3;
    let g = grid(2, ns, ds);
    let model = ModelSpec::parse(2, &["sin(x1)*cos(x2)", "0.3*x1 - x2"], &["x1*x2", "x2"]).unwrap();
    let n = ns * ns;
    let l1 = laplacian_1d(ns, ds);
    let eye = DMatrix::<f64>::identity(ns, ns);
    // row-major: node (i, j) is i * ns + j, so axis 1 is the fast one
    let l = l1.kronecker(&eye) + eye.kronecker(&l1);
    let mut cm = DMatrix::zeros(n, n);
    for i in 0..ns {
        for j in 0..ns {
            let (x1, x2) = (g.coord(i), g.coord(j));
            let f1 = x1.sin() * x2.cos();
            let f2 = 0.3 * x1 - x2;
            let div = x1.cos() * x2.cos() - 1.0;
            let r = div + 0.5 * ((x1 * x2).powi(2) + x2 * x2);
            let p = i * ns + j;
            cm[(p, p)] = -r;
            if i > 0 {
                cm[(p, p - ns)] = f1 / (2.0 * ds);
            }
            if i + 1 < ns {
                cm[(p, p + ns)] = -f1 / (2.0 * ds);
            }
            if j > 0 {
                cm[(p, p - 1)] = f2 / (2.0 * ds);
            }
            if j + 1 < ns {
                cm[(p, p + 1)] = -f2 / (2.0 * ds);
            }
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..10 {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = step(&model, &g, dt, &u);
        let want = dense_step(&l, &cm, dt, &u);
        let err = got.iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "err={err:e}");
    }
}

fn zero_model(dim: usize) -> ModelSpec {
    ModelSpec::parse(dim, &vec!["0"; dim], &["0"]).unwrap()
}

fn sine_mode(g: &SpatialGrid, modes: &[usize]) -> Vec<f64> {
    let ns = g.ns();
    let mut idx = vec![0; g.dim()];
    (0..g.len())
        .map(|p| {
            g.multi_index(p, &mut idx);
            idx.iter()
                .zip(modes)
                .map(|(&i, &k)| ((i + 1) as f64 * k as f64 * std::f64::consts::PI / (ns + 1) as f64).sin())
                .product()
        })
        .collect()
}

#[test]
fn sine_modes_scale_by_their_factor() {
    let dt = 1e-3;
    for (dim, ns, ds) in [(1, 16, 0.25), (1, 65, 0.1), (2, 6, 0.5), (3, 5, 0.4)] {
        let g = grid(dim, ns, ds);
        let spectral = compute_lambda(dim, ns, dt, ds).unwrap();
        let model = zero_model(dim);
        let picks: Vec<Vec<usize>> = match dim {
            1 => (1..=ns).map(|k| vec![k]).collect(),
            2 => vec![vec![1, 1], vec![2, 5], vec![6, 3]],
            _ => vec![vec![1, 1, 1], vec![1, 3, 5], vec![4, 2, 2]],
        };
        for modes in picks {
            let u = sine_mode(&g, &modes);
            let factor = spectral.factor(&modes.iter().map(|k| k - 1).collect::<Vec<_>>());
            let got = step(&model, &g, dt, &u);
            for (x, y) in got.iter().zip(&u) {
                assert!((x - factor * y).abs() < 1e-12, "dim={dim} modes={modes:?}");
            }
        }
    }
}

#[test]
fn factors_match_dense_laplacian_eigenvalues() {
    let dt = 1e-3;
    for ns in 1..=32 {
        let ds = 0.5;
        let mut eig: Vec<f64> = (-laplacian_1d(ns, ds)).symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let want: Vec<f64> = eig.iter().map(|mu| 1.0 / (1.0 + 0.5 * dt * mu)).collect();
        let got = compute_lambda(1, ns, dt, ds).unwrap();
        for (g, w) in got.factors().iter().zip(&want) {
            assert!(((g - w) / w).abs() < 1e-10, "ns={ns}: {g} vs {w}");
        }
    }
}

#[test]
fn two_dimensional_factors_are_a_kronecker_sum() {
    let (ns, dt, ds) = (9, 2e-3, 0.2);
    let one = compute_lambda(1, ns, dt, ds).unwrap();
    let two = compute_lambda(2, ns, dt, ds).unwrap();
    for a in 0..ns {
        for b in 0..ns {
            let lhs = 1.0 / two.factor(&[a, b]) - 1.0;
            let rhs = (1.0 / one.factor(&[a]) - 1.0) + (1.0 / one.factor(&[b]) - 1.0);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
    let eig = laplacian_eigenvalues(ns, ds);
    assert!(eig.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn pure_diffusion_loses_little_mass_and_matches_banded_solve() {
    let (ns, ds, dt) = (64, 0.1, 1e-3);
    let g = grid(1, ns, ds);
    let u: Vec<f64> = (0..ns).map(|i| (-(g.coord(i) / 0.5).powi(2) / 2.0).exp()).collect();
    let got = step(&zero_model(1), &g, dt, &u);
    let mass = |v: &[f64]| v.iter().sum::<f64>() * ds;
    assert!(mass(&got) <= mass(&u));
    assert!((mass(&u) - mass(&got)) / mass(&u) < 1e-3);
    let want = dense_step(&laplacian_1d(ns, ds), &DMatrix::zeros(ns, ns), dt, &u);
    for (x, y) in got.iter().zip(&want) {
        assert!((x - y).abs() < 1e-8);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_is_linear(
        u1 in prop::collection::vec(-1.0f64..1.0, 12),
        u2 in prop::collection::vec(-1.0f64..1.0, 12),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let g = grid(1, 12, 0.3);
        let model = ModelSpec::parse(1, &["cos(x1)"], &["x1^3"]).unwrap();
        let mixed: Vec<f64> = u1.iter().zip(&u2).map(|(x, y)| a * x + b * y).collect();
        let lhs = step(&model, &g, 1e-3, &mixed);
        let s1 = step(&model, &g, 1e-3, &u1);
        let s2 = step(&model, &g, 1e-3, &u2);
        let scale = max_abs(&lhs).max(1e-300);
        for i in 0..12 {
            prop_assert!((lhs[i] - (a * s1[i] + b * s2[i])).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn pure_diffusion_never_grows(
        dim in 1usize..=3,
        ns in 3usize..=7,
        seed in any::<u64>(),
        dt in 1e-4f64..1.0,
    ) {
        let g = grid(dim, ns, 0.5);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = step(&zero_model(dim), &g, dt, &u);
        prop_assert!(norm(&out) <= norm(&u) * (1.0 + 1e-12));
    }

    #[test]
    fn sine_transform_round_trips(dim in 1usize..=3, ns in 1usize..=9, seed in any::<u64>()) {
        let g = SpatialGrid::new(dim, 0.0, 1.0, ns.max(3), DEFAULT_NODE_BUDGET).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = dst_nd(&dst_nd(&u, &g, false).unwrap(), &g, true).unwrap();
        for (x, y) in back.iter().zip(&u) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }
}
