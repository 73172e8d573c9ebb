use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use yauyau::config::{find_preset, ExperimentConfig, PRESETS};
use yauyau::harness::{run_oracle, run_scenario, OracleKind, RunOptions, Scenario};
use yauyau::io;
use yauyau::service::{router, Service, ServiceConfig};
use yauyau_core::DensityField;

#[derive(Parser)]
#[command(name = "yauyau", version, about = "Grid-based nonlinear filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a model, filter it and write the run artifacts.
    Run(RunArgs),
    /// List the built-in presets, or print one as a config file.
    Presets {
        /// Print this preset's JSON config.
        #[arg(long)]
        show: Option<String>,
    },
    /// Run a reference filter on the same simulated data as a config.
    Oracle(OracleArgs),
    /// Start the HTTP job service.
    Serve(ServeArgs),
}

#[derive(clap::Args)]
struct Source {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name; repeat to run several.
    #[arg(long)]
    preset: Vec<String>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Source {
    fn configs(&self) -> anyhow::Result<Vec<ExperimentConfig>> {
        let mut configs = match (&self.config, self.preset.is_empty()) {
            (Some(path), _) => vec![ExperimentConfig::load(path)?],
            (None, false) => self.preset.iter().map(|p| find_preset(p)).collect::<Result<_, _>>()?,
            (None, true) => bail!("give --config <file> or --preset <name>"),
        };
        if let Some(seed) = self.seed {
            configs.iter_mut().for_each(|c| c.seed = seed);
        }
        Ok(configs)
    }
}

#[derive(clap::Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory. With several presets each gets a subdirectory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Presets run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write each density snapshot as CSV.
    #[arg(long)]
    density_csv: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Pf,
    Kalman,
}

#[derive(clap::Args)]
struct OracleArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 5000)]
    particles: usize,
    /// Seed of the particle filter's own randomness.
    #[arg(long, default_value_t = 0)]
    pf_seed: u64,
    /// Also run the grid filter and report both errors.
    #[arg(long)]
    compare: bool,
    /// Directory for `oracle_estimates.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 2)]
    workers: usize,
    #[arg(long, default_value_t = 8)]
    queue_depth: usize,
    /// Keep finished runs here and reload them on start.
    #[arg(long)]
    persist_dir: Option<PathBuf>,
    /// Built web UI served at `/`.
    #[arg(long, default_value = "web-ui/dist")]
    static_dir: PathBuf,
}

fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>, several: bool) -> PathBuf {
    let name = cfg.preset.clone().unwrap_or_else(|| "run".into());
    match (out, &cfg.output_dir) {
        (Some(dir), _) if several => dir.join(name),
        (Some(dir), _) => dir.to_path_buf(),
        (None, Some(dir)) => dir.clone(),
        (None, None) => Path::new("out").join(name),
    }
}

fn run_one(cfg: &ExperimentConfig, dir: &Path, options: &RunOptions, density_csv: bool) -> anyhow::Result<()> {
    let label = cfg.preset.clone().unwrap_or_else(|| "run".into());
    let scenario = Scenario::new(cfg, options).with_context(|| format!("{label}: setting up"))?;
    let g = &scenario.grid;
    log::info!(
        "{label}: D={} Ns={} ({} nodes) on [{}, {}], {} observations",
        g.dim(),
        g.ns(),
        g.len(),
        g.lo(),
        g.hi(),
        scenario.time.ntau()
    );
    let mut last = 0;
    let mut progress = |k: usize, ntau: usize, _: &DensityField| {
        let pct = 100 * k / ntau;
        if pct >= last + 10 {
            last = pct;
            log::info!("{label}: {pct}%");
        }
        ControlFlow::Continue(())
    };
    let exp = run_scenario(scenario, &mut progress).with_context(|| format!("{label}: filtering"))?;
    exp.write_artifacts(dir)
        .with_context(|| format!("{label}: writing artifacts"))?;
    if density_csv {
        exp.write_density_csvs(dir)?;
    }
    let s = &exp.summary;
    println!(
        "{label}: rmse {:.6} (zero estimator {:.6}), {:.2}s, artifacts in {}",
        s.rmse,
        s.zero_rmse,
        s.timings.total,
        dir.display()
    );
    for w in &s.warnings {
        log::warn!("{label}: {w}");
    }
    Ok(())
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let configs = args.source.configs()?;
    let options = RunOptions::from_env()?;
    let several = configs.len() > 1;
    let pending = Mutex::new(configs.iter());
    let failures = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..args.jobs.clamp(1, configs.len()) {
            s.spawn(|| loop {
                let Some(cfg) = pending.lock().unwrap().next() else { break };
                let dir = output_dir(cfg, args.out.as_deref(), several);
                if let Err(e) = run_one(cfg, &dir, &options, args.density_csv) {
                    failures.lock().unwrap().push(e);
                }
            });
        }
    });
    let failures = failures.into_inner().unwrap();
    for e in &failures {
        eprintln!("error: {e:#}");
    }
    if failures.is_empty() {
        Ok(())
    } else {
        bail!("{} of {} runs failed", failures.len(), configs.len())
    }
}

fn oracle(args: OracleArgs) -> anyhow::Result<()> {
    let options = RunOptions::from_env()?;
    for cfg in args.source.configs()? {
        let scenario = Scenario::new(&cfg, &options)?;
        let kind = match args.kind {
            Kind::Pf => OracleKind::Particle,
            Kind::Kalman => OracleKind::Kalman,
        };
        let run = run_oracle(&scenario, kind, args.particles, args.pf_seed)?;
        let label = cfg.preset.clone().unwrap_or_else(|| "run".into());
        let mut report = serde_json::json!({ "config": label, "oracle_rmse": run.rmse });
        if let Some(dir) = &args.out {
            std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
            let taus: Vec<f64> = (0..run.estimates.rows()).map(|k| k as f64 * scenario.time.dtau()).collect();
            let errors: Vec<f64> = run
                .estimates
                .iter_rows()
                .zip(scenario.truth.iter_rows())
                .map(|(e, t)| {
                    let ss: f64 = e.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                    (ss / e.len() as f64).sqrt()
                })
                .collect();
            io::write_estimates(&dir.join("oracle_estimates.csv"), &taus, &scenario.truth, &run.estimates, &errors)?;
        }
        if args.compare {
            let exp = run_scenario(scenario, &mut |_, _, _| ControlFlow::Continue(()))?;
            report["grid_rmse"] = exp.summary.rmse.into();
            report["zero_rmse"] = exp.summary.zero_rmse.into();
            report["ratio"] = (exp.summary.rmse / run.rmse).into();
        }
        println!("{report}");
    }
    Ok(())
}

fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let config = ServiceConfig {
        workers: args.workers.max(1),
        queue_depth: args.queue_depth.max(1),
        persist_dir: args.persist_dir,
        static_dir: Some(args.static_dir),
        run: RunOptions::from_env()?,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        log::info!("listening on http://{}", listener.local_addr()?);
        let app = router(Service::start(config));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Presets { show: Some(name) } => find_preset(&name)
            .map(|cfg| println!("{}", cfg.to_json()))
            .map_err(Into::into),
        Command::Presets { show: None } => {
            for p in PRESETS {
                println!("{:<16} {}", p.name, p.description);
            }
            Ok(())
        }
        Command::Oracle(args) => oracle(args),
        Command::Serve(args) => serve(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
