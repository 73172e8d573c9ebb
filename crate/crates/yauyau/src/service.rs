//! HTTP job service: a bounded worker pool running experiments, with
//! progress polling, cooperative cancellation, density slices and optional
//! persistence of finished runs.

use std::collections::BTreeMap;
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::mpsc;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;
use yauyau_core::{DensityField, Matrix};

use crate::config::{ExperimentConfig, FieldError, PRESETS};
use crate::error::{Error, Result};
use crate::harness::{run_experiment, Experiment, RunOptions, Summary};
use crate::io;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Jobs running at once.
    pub workers: usize,
    /// Unfinished (queued or running) jobs accepted at once.
    pub queue_depth: usize,
    pub persist_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub run: RunOptions,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            workers: 2,
            queue_depth: 8,
            persist_dir: None,
            static_dir: None,
            run: RunOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    fn finished(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

/// What `GET /api/jobs/{id}` returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub id: String,
    pub state: JobState,
    /// Fraction of observation steps completed, in `[0, 1]`.
    pub progress: f64,
    /// Seconds since the Unix epoch.
    pub created_at: f64,
    pub started_at: Option<f64>,
    pub finished_at: Option<f64>,
    pub error: Option<String>,
    pub summary: Option<Summary>,
    pub config: ExperimentConfig,
}

/// What `GET /api/jobs/{id}/result` returns. `truth` and `estimates` hold
/// one row per observation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub id: String,
    pub taus: Vec<f64>,
    pub truth: Vec<Vec<f64>>,
    pub estimates: Vec<Vec<f64>>,
    pub errors: Vec<f64>,
    pub rmse: f64,
}

#[derive(Debug, Clone)]
struct StoredSnapshot {
    k: usize,
    tau: f64,
    values: Vec<f64>,
}

/// Finished-run data kept in memory.
#[derive(Debug, Clone)]
struct Output {
    summary: Summary,
    taus: Vec<f64>,
    truth: Matrix,
    estimates: Matrix,
    errors: Vec<f64>,
    snapshots: Vec<StoredSnapshot>,
}

impl From<&Experiment> for Output {
    fn from(exp: &Experiment) -> Self {
        Output {
            summary: exp.summary.clone(),
            taus: exp.taus(),
            truth: exp.scenario.truth.clone(),
            estimates: exp.result.estimates.clone(),
            errors: exp.result.errors.clone(),
            snapshots: exp
                .result
                .snapshots
                .iter()
                .map(|s| StoredSnapshot {
                    k: s.k,
                    tau: s.tau,
                    values: s.density.values().to_vec(),
                })
                .collect(),
        }
    }
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

struct Job {
    view: JobView,
    cancel: Arc<AtomicBool>,
    output: Option<Arc<Output>>,
}

/// Shared state behind every handler and worker.
pub struct Service {
    config: ServiceConfig,
    jobs: Mutex<BTreeMap<String, Job>>,
    queue: mpsc::UnboundedSender<String>,
    counter: AtomicU64,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

#[derive(Debug)]
pub enum SubmitError {
    Invalid(Vec<FieldError>),
    QueueFull { depth: usize },
}

impl Service {
    /// Creates the service and spawns its workers on the current tokio
    /// runtime. Persisted runs found in `persist_dir` are loaded as done jobs.
    pub fn start(config: ServiceConfig) -> Arc<Service> {
        let (tx, rx) = mpsc::unbounded_channel();
        let service = Arc::new(Service {
            jobs: Mutex::new(BTreeMap::new()),
            queue: tx,
            counter: AtomicU64::new(0),
            config,
        });
        if let Some(dir) = &service.config.persist_dir {
            let loaded = service.load_persisted(dir);
            log::info!("loaded {loaded} persisted jobs from {}", dir.display());
        }
        let rx = Arc::new(tokio::sync::Mutex::new(rx));
        for _ in 0..service.config.workers.max(1) {
            let service = Arc::clone(&service);
            let rx = Arc::clone(&rx);
            tokio::spawn(async move {
                loop {
                    let Some(id) = rx.lock().await.recv().await else { break };
                    let svc = Arc::clone(&service);
                    let joined = tokio::task::spawn_blocking(move || svc.execute(&id)).await;
                    if let Err(e) = joined {
                        log::error!("worker task failed: {e}");
                    }
                }
            });
        }
        service
    }

    fn next_id(&self) -> String {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_micros() as u64);
        format!("{stamp:x}-{n}")
    }

    pub fn submit(&self, mut config: ExperimentConfig) -> Result<String, SubmitError> {
        config.validate().map_err(SubmitError::Invalid)?;
        config.output_dir = None;
        let id = {
            let mut jobs = self.jobs.lock().unwrap();
            let active = jobs.values().filter(|j| !j.view.state.finished()).count();
            if active >= self.config.queue_depth {
                return Err(SubmitError::QueueFull {
                    depth: self.config.queue_depth,
                });
            }
            let id = self.next_id();
            jobs.insert(
                id.clone(),
                Job {
                    view: JobView {
                        id: id.clone(),
                        state: JobState::Queued,
                        progress: 0.0,
                        created_at: now(),
                        started_at: None,
                        finished_at: None,
                        error: None,
                        summary: None,
                        config,
                    },
                    cancel: Arc::new(AtomicBool::new(false)),
                    output: None,
                },
            );
            id
        };
        self.queue.send(id.clone()).expect("workers outlive the service");
        Ok(id)
    }

    fn execute(&self, id: &str) {
        let (config, cancel) = {
            let mut jobs = self.jobs.lock().unwrap();
            let Some(job) = jobs.get_mut(id) else { return };
            if job.cancel.load(Ordering::Relaxed) {
                job.view.state = JobState::Failed;
                job.view.error = Some("cancelled before start".into());
                job.view.finished_at = Some(now());
                return;
            }
            job.view.state = JobState::Running;
            job.view.started_at = Some(now());
            (job.view.config.clone(), Arc::clone(&job.cancel))
        };
        let mut progress = |k: usize, ntau: usize, _: &DensityField| {
            if let Some(job) = self.jobs.lock().unwrap().get_mut(id) {
                job.view.progress = job.view.progress.max(k as f64 / ntau as f64);
            }
            if cancel.load(Ordering::Relaxed) {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        };
        let outcome = run_experiment(&config, &self.config.run, &mut progress);
        let outcome = outcome.and_then(|exp| {
            if let Some(dir) = &self.config.persist_dir {
                self.persist(id, &dir.join(id), &exp)?;
            }
            Ok(exp)
        });
        let mut jobs = self.jobs.lock().unwrap();
        let Some(job) = jobs.get_mut(id) else { return };
        job.view.finished_at = Some(now());
        match outcome {
            Ok(exp) => {
                job.view.state = JobState::Done;
                job.view.progress = 1.0;
                job.view.summary = Some(exp.summary.clone());
                job.output = Some(Arc::new(Output::from(&exp)));
            }
            Err(e) => {
                log::warn!("job {id} failed: {e}");
                job.view.state = JobState::Failed;
                job.view.error = Some(e.to_string());
            }
        }
    }

    fn persist(&self, id: &str, dir: &FsPath, exp: &Experiment) -> Result<()> {
        exp.write_artifacts(dir)?;
        let view = self.status(id);
        if let Some(mut view) = view {
            view.state = JobState::Done;
            view.progress = 1.0;
            view.finished_at = Some(now());
            view.summary = Some(exp.summary.clone());
            let path = dir.join("job.json");
            fs::write(&path, serde_json::to_string_pretty(&view).expect("view serializes")).map_err(Error::io(&path))?;
        }
        Ok(())
    }

    fn load_persisted(&self, dir: &FsPath) -> usize {
        let Ok(entries) = fs::read_dir(dir) else { return 0 };
        let mut jobs = self.jobs.lock().unwrap();
        let mut loaded = 0;
        for entry in entries.flatten() {
            match load_job(&entry.path()) {
                Ok((view, output)) => {
                    jobs.insert(
                        view.id.clone(),
                        Job {
                            view,
                            cancel: Arc::new(AtomicBool::new(false)),
                            output: Some(Arc::new(output)),
                        },
                    );
                    loaded += 1;
                }
                Err(e) => log::warn!("skipping {}: {e}", entry.path().display()),
            }
        }
        loaded
    }

    pub fn list(&self) -> Vec<JobView> {
        let mut views: Vec<JobView> = self.jobs.lock().unwrap().values().map(|j| j.view.clone()).collect();
        views.sort_by(|a, b| a.created_at.total_cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        views
    }

    pub fn status(&self, id: &str) -> Option<JobView> {
        self.jobs.lock().unwrap().get(id).map(|j| j.view.clone())
    }

    fn output(&self, id: &str) -> Result<Arc<Output>, ApiError> {
        let jobs = self.jobs.lock().unwrap();
        let job = jobs.get(id).ok_or_else(|| ApiError::not_found(id))?;
        match (&job.output, job.view.state) {
            (Some(out), _) => Ok(Arc::clone(out)),
            (None, JobState::Failed) => Err(ApiError::conflict(
                job.view.state,
                job.view.error.clone().unwrap_or_else(|| "job failed".into()),
            )),
            (None, state) => Err(ApiError::conflict(state, "job has not finished".into())),
        }
    }

    pub fn result(&self, id: &str) -> Result<JobResult, ApiError> {
        let out = self.output(id)?;
        Ok(JobResult {
            id: id.to_string(),
            taus: out.taus.clone(),
            truth: rows(&out.truth),
            estimates: rows(&out.estimates),
            errors: out.errors.clone(),
            rmse: out.summary.rmse,
        })
    }

    /// Requests cancellation of an unfinished job, or forgets a finished one.
    /// Returns the view and whether the job was removed.
    pub fn delete(&self, id: &str) -> Option<(JobView, bool)> {
        let mut jobs = self.jobs.lock().unwrap();
        let job = jobs.get(id)?;
        if job.view.state.finished() {
            let job = jobs.remove(id)?;
            if let Some(root) = &self.config.persist_dir {
                let dir = root.join(id);
                if dir.is_dir() {
                    if let Err(e) = fs::remove_dir_all(&dir) {
                        log::warn!("could not remove {}: {e}", dir.display());
                    }
                }
            }
            return Some((job.view, true));
        }
        job.cancel.store(true, Ordering::Relaxed);
        Some((job.view.clone(), false))
    }
}

fn load_job(dir: &FsPath) -> Result<(JobView, Output)> {
    let path = dir.join("job.json");
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    let view: JobView = serde_json::from_str(&text).map_err(|source| Error::Json { path, source })?;
    let summary = view.summary.clone().ok_or_else(|| Error::Format {
        what: "job.json",
        message: "missing summary".into(),
    })?;
    let table = io::read_csv(&dir.join("estimates.csv"))?;
    let d = summary.grid.dim;
    let column = |name: String| {
        table.column(&name).ok_or_else(|| Error::Format {
            what: "estimates.csv",
            message: format!("missing column {name}"),
        })
    };
    let gather = |prefix: &str| -> Result<Matrix> {
        let cols = (1..=d).map(|i| column(format!("{prefix}{i}"))).collect::<Result<Vec<_>>>()?;
        let n = table.rows.rows();
        Ok(Matrix::from_vec(n, d, (0..n).flat_map(|k| cols.iter().map(move |c| c[k])).collect()))
    };
    let snapshots = summary
        .snapshots
        .iter()
        .map(|info| {
            let dump = io::read_density(&dir.join(&info.file))?;
            Ok(StoredSnapshot {
                k: info.k,
                tau: info.tau,
                values: dump.values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let output = Output {
        taus: column("tau".into())?,
        truth: gather("x")?,
        estimates: gather("xhat")?,
        errors: column("err".into())?,
        snapshots,
        summary,
    };
    Ok((view, output))
}

/// A slice of a density snapshot along one or two axes, other axes held at
/// fixed node indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySlice {
    pub snapshot: usize,
    pub snapshots: usize,
    pub k: usize,
    pub tau: f64,
    /// 1-based axes spanned by the slice.
    pub axes: Vec<usize>,
    /// `(axis, index, coordinate)` for every other axis.
    pub fixed: Vec<FixedAxis>,
    pub ns: usize,
    pub ds: f64,
    /// Node coordinates along each sliced axis (shared by all axes).
    pub coords: Vec<f64>,
    /// `Ns` values for a 1-axis slice, `Ns` rows of `Ns` for a 2-axis slice
    /// (row index along the first axis).
    pub values: serde_json::Value,
    /// Sum of the values times `ds` per sliced axis.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedAxis {
    pub axis: usize,
    pub index: usize,
    pub coord: f64,
}

/// Query of `GET /api/jobs/{id}/density`: `snapshot` (default last),
/// `axes` such as `1,2` (default `1,2`, or `1` in one dimension) and
/// `fixed` node indices for the remaining axes in increasing axis order
/// (default the middle node).
#[derive(Debug, Clone, Default, Deserialize)]
pub struct DensityQuery {
    pub snapshot: Option<usize>,
    pub axes: Option<String>,
    pub fixed: Option<String>,
}

fn parse_list(field: &str, text: &str) -> Result<Vec<usize>, Vec<FieldError>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim().parse().map_err(|_| {
                vec![FieldError {
                    field: field.into(),
                    message: format!("'{s}' is not a non-negative integer"),
                    offset: None,
                }]
            })
        })
        .collect()
}

fn slice(out: &Output, q: &DensityQuery) -> Result<DensitySlice, Vec<FieldError>> {
    let bad = |field: &str, message: String| {
        vec![FieldError {
            field: field.into(),
            message,
            offset: None,
        }]
    };
    let g = &out.summary.grid;
    let (d, ns) = (g.dim, g.ns);
    if out.snapshots.is_empty() {
        return Err(bad("snapshot", "this job kept no density snapshots".into()));
    }
    let s = q.snapshot.unwrap_or(out.snapshots.len() - 1);
    let snap = out
        .snapshots
        .get(s)
        .ok_or_else(|| bad("snapshot", format!("index {s} out of range 0..{}", out.snapshots.len())))?;
    let axes = match &q.axes {
        Some(text) => parse_list("axes", text)?,
        None if d == 1 => vec![1],
        None => vec![1, 2],
    };
    if axes.is_empty() || axes.len() > 2 {
        return Err(bad("axes", "give one or two axes".into()));
    }
    if axes.iter().any(|&a| a == 0 || a > d) || (axes.len() == 2 && axes[0] == axes[1]) {
        return Err(bad("axes", format!("axes must be distinct and between 1 and {d}")));
    }
    let others: Vec<usize> = (1..=d).filter(|a| !axes.contains(a)).collect();
    let fixed_idx = match &q.fixed {
        Some(text) => parse_list("fixed", text)?,
        None => vec![ns / 2; others.len()],
    };
    if fixed_idx.len() != others.len() {
        return Err(bad("fixed", format!("expected {} indices, found {}", others.len(), fixed_idx.len())));
    }
    if let Some(&i) = fixed_idx.iter().find(|&&i| i >= ns) {
        return Err(bad("fixed", format!("index {i} out of range 0..{ns}")));
    }
    let stride = |axis: usize| ns.pow((d - axis) as u32);
    let base: usize = others.iter().zip(&fixed_idx).map(|(&a, &i)| i * stride(a)).sum();
    let coord = |i: usize| g.lo + i as f64 * g.ds;
    let (values, sum) = if axes.len() == 1 {
        let line: Vec<f64> = (0..ns).map(|i| snap.values[base + i * stride(axes[0])]).collect();
        let sum = line.iter().sum::<f64>();
        (json!(line), sum)
    } else {
        let grid: Vec<Vec<f64>> = (0..ns)
            .map(|i| {
                (0..ns)
                    .map(|j| snap.values[base + i * stride(axes[0]) + j * stride(axes[1])])
                    .collect()
            })
            .collect();
        let sum = grid.iter().flatten().sum::<f64>();
        (json!(grid), sum)
    };
    Ok(DensitySlice {
        snapshot: s,
        snapshots: out.snapshots.len(),
        k: snap.k,
        tau: snap.tau,
        fixed: others
            .iter()
            .zip(&fixed_idx)
            .map(|(&axis, &index)| FixedAxis {
                axis,
                index,
                coord: coord(index),
            })
            .collect(),
        mass: sum * g.ds.powi(axes.len() as i32),
        axes,
        ns,
        ds: g.ds,
        coords: (0..ns).map(coord).collect(),
        values,
    })
}

/// A JSON error response.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn not_found(id: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            body: json!({"error": "not_found", "message": format!("no job with id '{id}'")}),
        }
    }

    fn conflict(state: JobState, message: String) -> Self {
        ApiError {
            status: StatusCode::CONFLICT,
            body: json!({"error": "conflict", "state": state, "message": message}),
        }
    }

    fn invalid(fields: Vec<FieldError>) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({"error": "validation", "fields": fields}),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type Shared = State<Arc<Service>>;

async fn submit(State(svc): Shared, body: Bytes) -> Result<Response, ApiError> {
    let config: ExperimentConfig = serde_json::from_slice(&body).map_err(|e| {
        ApiError::invalid(vec![FieldError {
            field: "body".into(),
            message: e.to_string(),
            offset: None,
        }])
    })?;
    match svc.submit(config) {
        Ok(id) => {
            let view = svc.status(&id).expect("just inserted");
            Ok((StatusCode::ACCEPTED, Json(view)).into_response())
        }
        Err(SubmitError::Invalid(fields)) => Err(ApiError::invalid(fields)),
        Err(SubmitError::QueueFull { depth }) => Err(ApiError {
            status: StatusCode::TOO_MANY_REQUESTS,
            body: json!({"error": "queue_full", "message": format!("{depth} jobs are already queued or running")}),
        }),
    }
}

async fn list(State(svc): Shared) -> Json<Vec<JobView>> {
    Json(svc.list())
}

async fn status(State(svc): Shared, Path(id): Path<String>) -> Result<Json<JobView>, ApiError> {
    svc.status(&id).map(Json).ok_or_else(|| ApiError::not_found(&id))
}

async fn result(State(svc): Shared, Path(id): Path<String>) -> Result<Json<JobResult>, ApiError> {
    svc.result(&id).map(Json)
}

async fn density(State(svc): Shared, Path(id): Path<String>, Query(q): Query<DensityQuery>) -> Result<Json<DensitySlice>, ApiError> {
    let out = svc.output(&id)?;
    slice(&out, &q).map(Json).map_err(ApiError::invalid)
}

async fn delete(State(svc): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    match svc.delete(&id) {
        Some((view, true)) => Ok((StatusCode::OK, Json(json!({"removed": true, "job": view}))).into_response()),
        Some((view, false)) => Ok((StatusCode::ACCEPTED, Json(json!({"removed": false, "job": view}))).into_response()),
        None => Err(ApiError::not_found(&id)),
    }
}

#[derive(Serialize)]
struct PresetView {
    name: &'static str,
    description: &'static str,
    config: ExperimentConfig,
}

async fn presets() -> Json<Vec<PresetView>> {
    Json(
        PRESETS
            .iter()
            .map(|p| PresetView {
                name: p.name,
                description: p.description,
                config: p.config(),
            })
            .collect(),
    )
}

async fn health(State(svc): Shared) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "workers": svc.config.workers,
        "queue_depth": svc.config.queue_depth,
    }))
}

const PLACEHOLDER: &str = "<!doctype html><title>yauyau</title>\
<p>The web UI is not built. The JSON API is under <code>/api</code>; \
try <a href=\"/api/presets\">/api/presets</a>.</p>";

pub fn router(service: Arc<Service>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/presets", get(presets))
        .route("/api/jobs", get(list).post(submit))
        .route("/api/jobs/{id}", get(status).delete(delete))
        .route("/api/jobs/{id}/result", get(result))
        .route("/api/jobs/{id}/density", get(density));
    let static_dir = service.config.static_dir.clone().filter(|d| d.is_dir());
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    };
    app.layer(CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any))
        .with_state(service)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::GridSummary;

    fn output(dim: usize, ns: usize) -> Output {
        let n = ns.pow(dim as u32);
        let values: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 50.0).collect();
        Output {
            summary: Summary {
                preset: None,
                seed: 0,
                rmse: 0.0,
                zero_rmse: 0.0,
                ntau: 1,
                total_steps: 1,
                grid: GridSummary {
                    dim,
                    ns,
                    nodes: n,
                    ds: 0.5,
                    lo: -1.0,
                    hi: -1.0 + 0.5 * (ns - 1) as f64,
                },
                timings: crate::harness::Timings {
                    simulation: 0.0,
                    propagation: 0.0,
                    update: 0.0,
                    estimation: 0.0,
                    total: 0.0,
                },
                max_mass_error: 0.0,
                warnings: vec![],
                snapshots: vec![],
                config: crate::config::find_preset("cubic1d").unwrap(),
            },
            taus: vec![],
            truth: Matrix::zeros(0, dim),
            estimates: Matrix::zeros(0, dim),
            errors: vec![],
            snapshots: vec![StoredSnapshot { k: 0, tau: 0.0, values }],
        }
    }

    fn query(axes: &str, fixed: Option<&str>) -> DensityQuery {
        DensityQuery {
            snapshot: None,
            axes: Some(axes.into()),
            fixed: fixed.map(Into::into),
        }
    }

    #[test]
    fn one_dimensional_slice_is_the_whole_field() {
        let out = output(1, 9);
        let s = slice(&out, &DensityQuery::default()).unwrap();
        assert_eq!(s.axes, [1]);
        assert_eq!(s.values.as_array().unwrap().len(), 9);
        assert_eq!(s.coords[0], -1.0);
        let total: f64 = out.snapshots[0].values.iter().sum::<f64>() * 0.5;
        assert!((s.mass - total).abs() < 1e-12);
    }

    #[test]
    fn slices_along_fixed_axis_recover_total_mass() {
        let out = output(3, 6);
        let total: f64 = out.snapshots[0].values.iter().sum::<f64>() * 0.125;
        for axes in ["1,2", "1,3", "2,3"] {
            let sum: f64 = (0..6)
                .map(|i| slice(&out, &query(axes, Some(&i.to_string()))).unwrap().mass * 0.5)
                .sum();
            assert!((sum - total).abs() < 1e-10, "{axes}");
        }
    }

    #[test]
    fn slice_matches_flat_indexing() {
        let out = output(3, 4);
        let s = slice(&out, &query("3,1", Some("2"))).unwrap();
        let v = &out.snapshots[0].values;
        let grid: Vec<Vec<f64>> = serde_json::from_value(s.values).unwrap();
        // axes (3, 1) with axis 2 at index 2: value at (i3, j1) is u[j1, 2, i3]
        assert_eq!(grid[1][3], v[3 * 16 + 2 * 4 + 1]);
        assert_eq!(s.fixed, [FixedAxis { axis: 2, index: 2, coord: 0.0 }]);
    }

    #[test]
    fn rejects_bad_queries() {
        let out = output(3, 4);
        for (q, field) in [
            (query("1,1", None), "axes"),
            (query("0", None), "axes"),
            (query("1,2,3", None), "axes"),
            (query("1,2", Some("4")), "fixed"),
            (query("1,2", Some("1,1")), "fixed"),
            (query("x", None), "axes"),
        ] {
            assert_eq!(slice(&out, &q).unwrap_err()[0].field, field);
        }
        let q = DensityQuery {
            snapshot: Some(1),
            ..DensityQuery::default()
        };
        assert_eq!(slice(&out, &q).unwrap_err()[0].field, "snapshot");
    }
}
