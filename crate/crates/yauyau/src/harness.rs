//! End-to-end experiment runs: simulate, build the grid, filter, score and
//! write artifacts.

use std::fs;
use std::ops::ControlFlow;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use yauyau_core::{
    build_grid, initial_density, run_filter, simulate_paths, DensityField, FilterObserver, FilterOptions,
    FilterResult, InitialDensity, Matrix, ModelSpec, Path, SpatialGrid, TimeGrid, Warning, DEFAULT_NODE_BUDGET,
};

use crate::config::{Bounds, ExperimentConfig, InitConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::oracle::{self, KalmanOptions, LinearModel, ParticleOptions};

/// Environment variable overriding [`DEFAULT_NODE_BUDGET`].
pub const NODE_BUDGET_VAR: &str = "YAUYAU_NODE_BUDGET";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub node_budget: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

impl RunOptions {
    pub fn from_env() -> Result<Self> {
        match std::env::var(NODE_BUDGET_VAR) {
            Ok(text) => {
                let node_budget = text.trim().parse().map_err(|_| Error::Format {
                    what: NODE_BUDGET_VAR,
                    message: format!("expected a node count, got '{text}'"),
                })?;
                Ok(RunOptions { node_budget })
            }
            Err(_) => Ok(RunOptions::default()),
        }
    }
}

/// Simulated data and the grid it will be filtered on.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ExperimentConfig,
    pub model: ModelSpec,
    pub time: TimeGrid,
    pub grid: SpatialGrid,
    pub states: Path,
    pub observations: Path,
    /// States at the observation times, `ntau + 1` rows.
    pub truth: Matrix,
    pub init: InitialDensity,
    pub simulation_seconds: f64,
}

impl Scenario {
    pub fn new(config: &ExperimentConfig, options: &RunOptions) -> Result<Self> {
        let valid = config.validate().map_err(Error::Invalid)?;
        let clock = Instant::now();
        let (states, observations) = simulate_paths(&valid.model, &valid.time, &valid.x0, config.seed)?;
        let simulation_seconds = clock.elapsed().as_secs_f64();
        let dim = valid.model.dim();
        let ds = config.space.ds;
        let (lo, hi) = match &config.space.bounds {
            Bounds::Fixed { lo, hi } => (lo.clone(), hi.clone()),
            Bounds::DataDriven => {
                let values = states.values();
                let mut lo: Vec<f64> = (0..dim)
                    .map(|d| values.iter_rows().map(|r| r[d]).fold(f64::INFINITY, f64::min))
                    .collect();
                let mut hi: Vec<f64> = (0..dim)
                    .map(|d| values.iter_rows().map(|r| r[d]).fold(f64::NEG_INFINITY, f64::max) + ds)
                    .collect();
                // a short path can leave no interior node; pad around its centre
                for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
                    if *h - *l < 2.0 * ds {
                        let mid = 0.5 * (*l + *h);
                        (*l, *h) = (mid - ds, mid + ds);
                    }
                }
                (lo, hi)
            }
        };
        let grid = build_grid(dim, &lo, &hi, ds, options.node_budget)?;
        let truth = states.subsample(valid.time.nt()).values().clone();
        let init = match &config.init {
            InitConfig::Uniform => InitialDensity::Uniform,
            InitConfig::Gaussian { sigma, center } => InitialDensity::Gaussian {
                center: center.clone().unwrap_or_else(|| valid.x0.clone()),
                sigma: *sigma,
            },
        };
        Ok(Scenario {
            config: config.clone(),
            model: valid.model,
            time: valid.time,
            grid,
            states,
            observations,
            truth,
            init,
            simulation_seconds,
        })
    }

    fn prior(&self) -> (Vec<f64>, Option<f64>) {
        match &self.init {
            InitialDensity::Gaussian { center, sigma } => (center.clone(), Some(*sigma)),
            InitialDensity::Uniform => (self.config.x0(), None),
        }
    }
}

/// Progress callback: `(k, ntau, density after observation k)`.
pub type Progress<'a> = dyn FnMut(usize, usize, &DensityField) -> ControlFlow<()> + Send + 'a;

struct Clocked<'a, 'b> {
    origin: Instant,
    progress: &'a mut Progress<'b>,
}

impl FilterObserver for Clocked<'_, '_> {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }

    fn on_observation(&mut self, k: usize, ntau: usize, density: &DensityField) -> ControlFlow<()> {
        (self.progress)(k, ntau, density)
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenario: Scenario,
    pub result: FilterResult,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub dim: usize,
    pub ns: usize,
    pub nodes: usize,
    pub ds: f64,
    pub lo: f64,
    pub hi: f64,
}

impl From<&SpatialGrid> for GridSummary {
    fn from(g: &SpatialGrid) -> Self {
        GridSummary {
            dim: g.dim(),
            ns: g.ns(),
            nodes: g.len(),
            ds: g.ds(),
            lo: g.lo(),
            hi: g.hi(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub simulation: f64,
    pub propagation: f64,
    pub update: f64,
    pub estimation: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotInfo {
    pub k: usize,
    pub tau: f64,
    pub file: String,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub seed: u64,
    /// RMSE over all observation times and coordinates.
    pub rmse: f64,
    /// RMSE of the constant estimate 0, for scale.
    pub zero_rmse: f64,
    pub ntau: usize,
    pub total_steps: usize,
    pub grid: GridSummary,
    pub timings: Timings,
    pub max_mass_error: f64,
    pub warnings: Vec<String>,
    pub snapshots: Vec<SnapshotInfo>,
    pub config: ExperimentConfig,
}

fn describe(w: &Warning) -> String {
    match w {
        Warning::Courant(c) => format!("Courant number {c:.3} exceeds 1"),
        Warning::Reaction(r) => format!("dt * max|reaction| = {r:.3} exceeds 1"),
        Warning::NearBoundary { k } => format!("estimate within one spacing of the grid boundary at observation {k}"),
    }
}

pub fn snapshot_file(index: usize) -> String {
    format!("density_{index:04}.bin")
}

/// Runs the filter on a prepared scenario.
pub fn run_scenario(scenario: Scenario, progress: &mut Progress<'_>) -> Result<Experiment> {
    let origin = Instant::now();
    let init = initial_density(&scenario.grid, &scenario.init)?;
    let options = FilterOptions {
        snapshots: scenario.config.snapshots,
        ..FilterOptions::default()
    };
    let mut observer = Clocked { origin, progress };
    let mut result = run_filter(
        &scenario.model,
        &scenario.time,
        &scenario.grid,
        &scenario.observations,
        &init,
        &options,
        &mut observer,
    )?;
    result.attach_truth(&scenario.truth)?;
    let rmse = oracle::rmse(&result.estimates, &scenario.truth)?;
    let zero_rmse = oracle::rmse(&Matrix::zeros(scenario.truth.rows(), scenario.truth.cols()), &scenario.truth)?;
    let t = &result.timings;
    let summary = Summary {
        preset: scenario.config.preset.clone(),
        seed: scenario.config.seed,
        rmse,
        zero_rmse,
        ntau: scenario.time.ntau(),
        total_steps: scenario.time.total_steps(),
        grid: GridSummary::from(&scenario.grid),
        timings: Timings {
            simulation: scenario.simulation_seconds,
            propagation: t.propagation,
            update: t.update,
            estimation: t.estimation,
            total: scenario.simulation_seconds + origin.elapsed().as_secs_f64(),
        },
        max_mass_error: result.max_mass_error,
        warnings: result.warnings.iter().map(describe).collect(),
        snapshots: result
            .snapshots
            .iter()
            .enumerate()
            .map(|(i, s)| SnapshotInfo {
                k: s.k,
                tau: s.tau,
                file: snapshot_file(i),
            })
            .collect(),
        config: scenario.config.clone(),
    };
    Ok(Experiment {
        scenario,
        result,
        summary,
    })
}

pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions, progress: &mut Progress<'_>) -> Result<Experiment> {
    run_scenario(Scenario::new(config, options)?, progress)
}

impl Experiment {
    pub fn taus(&self) -> Vec<f64> {
        self.result.taus().collect()
    }

    pub fn estimates_csv(&self) -> String {
        io::estimates_csv(&self.taus(), &self.scenario.truth, &self.result.estimates, &self.result.errors)
    }

    /// Writes every artifact into `dir`, creating it if needed.
    pub fn write_artifacts(&self, dir: &FsPath) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
        let mut written = Vec::new();
        let mut put = |name: &str, text: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, text).map_err(Error::io(&path))?;
            written.push(path);
            Ok(())
        };
        put("config.json", self.scenario.config.to_json())?;
        put("states.csv", io::states_csv(&self.scenario.states))?;
        put("observations.csv", io::observations_csv(&self.scenario.observations))?;
        put("estimates.csv", self.estimates_csv())?;
        put("summary.json", serde_json::to_string_pretty(&self.summary).expect("summary serializes"))?;
        for (info, snap) in self.summary.snapshots.iter().zip(&self.result.snapshots) {
            let path = dir.join(&info.file);
            io::write_density(&path, &self.scenario.grid, &snap.density)?;
            written.push(path);
        }
        Ok(written)
    }

    /// Writes each snapshot as `density_####.csv` next to the binary dumps.
    pub fn write_density_csvs(&self, dir: &FsPath) -> Result<()> {
        for (info, snap) in self.summary.snapshots.iter().zip(&self.result.snapshots) {
            let path = dir.join(info.file.replace(".bin", ".csv"));
            fs::write(&path, io::density_csv(&self.scenario.grid, &snap.density)).map_err(Error::io(&path))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Particle,
    Kalman,
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub estimates: Matrix,
    pub rmse: f64,
}

/// Runs a reference filter on the same simulated data as `scenario`.
/// `particles` and `seed` apply to the particle filter only.
pub fn run_oracle(scenario: &Scenario, kind: OracleKind, particles: usize, seed: u64) -> Result<OracleRun> {
    let (prior_mean, sigma) = scenario.prior();
    let estimates = match kind {
        OracleKind::Particle => oracle::particle_oracle(
            &scenario.model,
            &scenario.observations,
            &scenario.time,
            &ParticleOptions {
                particles,
                seed,
                prior_mean,
                prior_sigma: sigma.unwrap_or(1.0),
            },
        )?,
        OracleKind::Kalman => {
            let linear = LinearModel::from_model(&scenario.model)?;
            let sigma = sigma.ok_or_else(|| Error::Oracle("the Kalman oracle needs a gaussian prior".into()))?;
            oracle::kalman_oracle(
                &linear,
                &scenario.observations,
                &scenario.time,
                &KalmanOptions {
                    prior_mean,
                    prior_var: sigma * sigma,
                    process_noise: 1.0,
                },
            )?
            .means
        }
    };
    let rmse = oracle::rmse(&estimates, &scenario.truth)?;
    Ok(OracleRun { estimates, rmse })
}
