//! Experiment configuration: the JSON document accepted by `yauyau run
//! --config` and by `POST /api/jobs`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use yauyau_core::expr::{self, ParseError};
use yauyau_core::{ModelSpec, TimeGrid};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name of the preset this configuration came from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub model: ModelConfig,
    pub time: TimeConfig,
    pub space: SpaceConfig,
    #[serde(default)]
    pub seed: u64,
    /// Initial state of the simulated signal; zero when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Density snapshots to keep (evenly spaced, initial density included).
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn default_snapshots() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub obs_dim: usize,
    pub f: Vec<String>,
    pub h: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    pub dt: f64,
    pub dtau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub ds: f64,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Bounds {
    /// `[min(x), max(x) + ds]` over every coordinate of the simulated path,
    /// widened to two spacings around its centre when narrower.
    DataDriven,
    Fixed { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Uniform,
    /// Centered at `center`, or at the simulation's `x0` when omitted.
    Gaussian {
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig::Gaussian { sigma: 1.0, center: None }
    }
}

/// One validation problem, addressed by a dotted field path such as
/// `model.f[2]`. Expression errors carry the byte offset into the text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            field: field.into(),
            message: message.into(),
            offset: None,
        }
    }

    fn parse(field: String, err: &ParseError) -> Self {
        FieldError {
            field,
            message: err.to_string(),
            offset: Some(err.offset),
        }
    }
}

/// Engine objects built from a valid configuration.
#[derive(Debug, Clone)]
pub struct Validated {
    pub model: ModelSpec,
    pub time: TimeGrid,
    pub x0: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn x0(&self) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| vec![0.0; self.model.dim])
    }

    /// Checks every field, collecting all problems rather than stopping at
    /// the first.
    pub fn validate(&self) -> Result<Validated, Vec<FieldError>> {
        let mut errors = Vec::new();
        let m = &self.model;
        if m.dim == 0 || m.dim > 6 {
            errors.push(FieldError::new("model.dim", format!("must be between 1 and 6, got {}", m.dim)));
        }
        if m.obs_dim == 0 {
            errors.push(FieldError::new("model.obs_dim", "must be positive"));
        }
        if m.f.len() != m.dim {
            errors.push(FieldError::new(
                "model.f",
                format!("expected {} expressions, found {}", m.dim, m.f.len()),
            ));
        }
        if m.h.len() != m.obs_dim {
            errors.push(FieldError::new(
                "model.h",
                format!("expected {} expressions, found {}", m.obs_dim, m.h.len()),
            ));
        }
        let mut parsed = |name: &str, texts: &[String]| -> Vec<expr::Expr> {
            texts
                .iter()
                .enumerate()
                .filter_map(|(i, t)| {
                    let field = format!("model.{name}[{}]", i + 1);
                    if t.trim().is_empty() {
                        errors.push(FieldError::new(field, "expression is empty"));
                        return None;
                    }
                    expr::parse(t, m.dim.max(1))
                        .map_err(|e| errors.push(FieldError::parse(field, &e)))
                        .ok()
                })
                .collect()
        };
        let drift = parsed("f", &m.f);
        let observation = parsed("h", &m.h);

        let time = TimeGrid::new(self.time.t_end, self.time.dt, self.time.dtau)
            .map_err(|e| errors.push(FieldError::new("time", e.to_string())))
            .ok();

        let ds = self.space.ds;
        if !(ds.is_finite() && ds > 0.0) {
            errors.push(FieldError::new("space.ds", format!("must be positive, got {ds}")));
        }
        if let Bounds::Fixed { lo, hi } = &self.space.bounds {
            if lo.len() != m.dim || hi.len() != m.dim {
                errors.push(FieldError::new(
                    "space.bounds",
                    format!("lo and hi need {} entries each", m.dim),
                ));
            } else {
                for (d, (l, h)) in lo.iter().zip(hi).enumerate() {
                    if (h - l).is_nan() || h - l < 2.0 * ds {
                        errors.push(FieldError::new(
                            format!("space.bounds.hi[{}]", d + 1),
                            format!("axis {} spans [{l}, {h}], need at least two spacings", d + 1),
                        ));
                    }
                }
            }
        }

        let x0 = self.x0();
        if x0.len() != m.dim || x0.iter().any(|v| !v.is_finite()) {
            errors.push(FieldError::new("x0", format!("needs {} finite values", m.dim)));
        }
        if let InitConfig::Gaussian { sigma, center } = &self.init {
            if !(sigma.is_finite() && *sigma > 0.0) {
                errors.push(FieldError::new("init.sigma", "must be positive"));
            }
            if center.as_ref().is_some_and(|c| c.len() != m.dim) {
                errors.push(FieldError::new("init.center", format!("needs {} values", m.dim)));
            }
        }

        if !errors.is_empty() {
            return Err(errors);
        }
        let model = ModelSpec::new(drift, observation).map_err(|e| vec![FieldError::new("model", e.to_string())])?;
        Ok(Validated {
            model,
            time: time.expect("time validated"),
            x0,
        })
    }
}

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> ExperimentConfig,
}

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        (self.build)()
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn preset(name: &str, dim: usize, f: &[&str], h: &[&str], time: (f64, f64, f64), ds: f64) -> ExperimentConfig {
    ExperimentConfig {
        preset: Some(name.into()),
        model: ModelConfig {
            dim,
            obs_dim: h.len(),
            f: strings(f),
            h: strings(h),
        },
        time: TimeConfig {
            t_end: time.0,
            dt: time.1,
            dtau: time.2,
        },
        space: SpaceConfig {
            ds,
            bounds: Bounds::DataDriven,
        },
        seed: 42,
        x0: None,
        init: InitConfig::default(),
        output_dir: None,
        snapshots: default_snapshots(),
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "cubic1d",
        description: "scalar cubic sensor: dx = cos(x) dt + dv, dy = x^3 dt + dw; T=20, dt=1e-3, dtau=5e-3, ds=0.5",
        build: || preset("cubic1d", 1, &["cos(x1)"], &["x1^3"], (20.0, 0.001, 0.005), 0.5),
    },
    Preset {
        // T=20 gives 4000 observations and 20000 fine steps, as for cubic1d.
        name: "cubic3d",
        description: "three independent cubic sensors on a 3-D grid; T=20, dt=1e-3, dtau=5e-3, ds=0.5",
        build: || {
            preset(
                "cubic3d",
                3,
                &["cos(x1)", "cos(x2)", "cos(x3)"],
                &["x1^3", "x2^3", "x3^3"],
                (20.0, 0.001, 0.005),
                0.5,
            )
        },
    },
    Preset {
        name: "almostlinear",
        description: "almost-linear sensor: dx = dv, dy = x(1 + 0.25 cos x) dt + dw; T=50, dt=1e-4, dtau=5e-4, ds=0.5",
        build: || preset("almostlinear", 1, &["0"], &["x1*(1+0.25*cos(x1))"], (50.0, 0.0001, 0.0005), 0.5),
    },
    Preset {
        // Three uncoupled copies of the scalar problem. Slow: the 3-D grid
        // is stepped 500,000 times.
        name: "almostlinear3d",
        description: "three uncoupled almost-linear sensors on a 3-D grid; same time and space steps as almostlinear",
        build: || {
            preset(
                "almostlinear3d",
                3,
                &["0", "0", "0"],
                &["x1*(1+0.25*cos(x1))", "x2*(1+0.25*cos(x2))", "x3*(1+0.25*cos(x3))"],
                (50.0, 0.0001, 0.0005),
                0.5,
            )
        },
    },
    Preset {
        name: "linear1d",
        description: "linear-Gaussian check: dx = -0.5 x dt + dv, dy = x dt + dw on [-5, 5]; T=10, dt=1e-3, dtau=5e-3, ds=0.1",
        build: || {
            let mut cfg = preset("linear1d", 1, &["-0.5*x1"], &["x1"], (10.0, 0.001, 0.005), 0.1);
            cfg.space.bounds = Bounds::Fixed {
                lo: vec![-5.0],
                hi: vec![5.0],
            };
            cfg
        },
    },
];

pub fn find_preset(name: &str) -> Result<ExperimentConfig> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .map(Preset::config)
        .ok_or_else(|| Error::UnknownPreset(name.into()))
}
