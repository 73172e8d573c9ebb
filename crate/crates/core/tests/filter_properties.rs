use yauyau_core::{
    initial_density, run_filter, simulate_paths, DensityField, FilterOptions, InitialDensity, Matrix, ModelSpec, Path,
    ReactionScheme, SpatialGrid, TimeGrid, DEFAULT_NODE_BUDGET,
};

fn cubic() -> (ModelSpec, TimeGrid, SpatialGrid, Path) {
    let model = ModelSpec::parse(1, &["cos(x1)"], &["x1^3"]).unwrap();
    let tg = TimeGrid::new(2.0, 1e-3, 5e-3).unwrap();
    let (_, obs) = simulate_paths(&model, &tg, &[0.0], 3).unwrap();
    let grid = SpatialGrid::new(1, -3.0, 0.25, 25, DEFAULT_NODE_BUDGET).unwrap();
    (model, tg, grid, obs)
}

fn gaussian(grid: &SpatialGrid) -> DensityField {
    initial_density(
        grid,
        &InitialDensity::Gaussian {
            center: vec![0.0],
            sigma: 1.0,
        },
    )
    .unwrap()
}

#[test]
fn repeated_runs_are_bit_identical() {
    let (model, tg, grid, obs) = cubic();
    let init = gaussian(&grid);
    let a = run_filter(&model, &tg, &grid, &obs, &init, &FilterOptions::default(), &mut ()).unwrap();
    let b = run_filter(&model, &tg, &grid, &obs, &init, &FilterOptions::default(), &mut ()).unwrap();
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.estimates), bits(&b.estimates));
}

#[test]
fn scaling_the_initial_density_changes_nothing() {
    let (model, tg, grid, obs) = cubic();
    let init = gaussian(&grid);
    let scaled = DensityField::new(init.values().iter().map(|v| v * 1e6).collect());
    let a = run_filter(&model, &tg, &grid, &obs, &init, &FilterOptions::default(), &mut ()).unwrap();
    let b = run_filter(&model, &tg, &grid, &obs, &scaled, &FilterOptions::default(), &mut ()).unwrap();
    for (x, y) in a.estimates.as_slice().iter().zip(b.estimates.as_slice()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn estimates_stay_in_the_grid_and_mass_is_kept() {
    let (model, tg, grid, obs) = cubic();
    for reaction in [ReactionScheme::Explicit, ReactionScheme::Exponential] {
        let options = FilterOptions {
            reaction,
            ..FilterOptions::default()
        };
        let r = run_filter(&model, &tg, &grid, &obs, &gaussian(&grid), &options, &mut ()).unwrap();
        assert_eq!(r.estimates.rows(), tg.ntau() + 1);
        assert!(r.estimates.as_slice().iter().all(|&x| x >= grid.lo() && x <= grid.hi()));
        assert!(r.max_mass_error < 1e-12);
        for s in &r.snapshots {
            assert!((s.density.mass(&grid) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn without_dynamics_or_information_the_mean_stays_put() {
    let model = ModelSpec::parse(1, &["0"], &["0"]).unwrap();
    let tg = TimeGrid::new(1.0, 1e-3, 1e-2).unwrap();
    let grid = SpatialGrid::new(1, -4.0, 0.2, 41, DEFAULT_NODE_BUDGET).unwrap();
    let obs = Path::new(tg.dtau(), Matrix::zeros(tg.ntau() + 1, 1));
    let r = run_filter(&model, &tg, &grid, &obs, &gaussian(&grid), &FilterOptions::default(), &mut ()).unwrap();
    for k in 0..=tg.ntau() {
        assert!(r.estimates.get(k, 0).abs() < grid.ds());
    }
}

#[test]
fn uniform_start_in_two_dimensions() {
    let model = ModelSpec::parse(2, &["-x1", "-x2"], &["x1", "x2"]).unwrap();
    let tg = TimeGrid::new(0.5, 1e-3, 5e-3).unwrap();
    let (states, obs) = simulate_paths(&model, &tg, &[0.5, -0.5], 9).unwrap();
    let grid = SpatialGrid::new(2, -3.0, 0.25, 25, DEFAULT_NODE_BUDGET).unwrap();
    let init = initial_density(&grid, &InitialDensity::Uniform).unwrap();
    let mut r = run_filter(&model, &tg, &grid, &obs, &init, &FilterOptions::default(), &mut ()).unwrap();
    r.attach_truth(states.subsample(tg.nt()).values()).unwrap();
    assert_eq!(r.errors.len(), tg.ntau() + 1);
    assert!(r.max_mass_error < 1e-12);
    assert!(r.estimates.row(0).iter().all(|m| m.abs() < 1e-12));
}
