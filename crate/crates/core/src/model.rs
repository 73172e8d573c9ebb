use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::{self, Expr};

/// Signal/observation model `dx = f(x) dt + dv`, `dy = h(x) dt + dw` with
/// independent standard Brownian motions `v` and `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    drift: Vec<Expr>,
    observation: Vec<Expr>,
}

impl ModelSpec {
    /// State dimension is `drift.len()`, observation dimension is
    /// `observation.len()`.
    pub fn new(drift: Vec<Expr>, observation: Vec<Expr>) -> Result<Self> {
        let dim = drift.len();
        if dim == 0 {
            return Err(Error::InvalidModel("state dimension must be positive".into()));
        }
        if observation.is_empty() {
            return Err(Error::InvalidModel("observation dimension must be positive".into()));
        }
        for (name, list) in [("f", &drift), ("h", &observation)] {
            for (i, e) in list.iter().enumerate() {
                if e.arity() > dim {
                    return Err(Error::InvalidModel(format!(
                        "{name}[{}] references x{} but the state dimension is {dim}",
                        i + 1,
                        e.arity()
                    )));
                }
            }
        }
        Ok(ModelSpec { drift, observation })
    }

    /// Parses drift and observation texts under dimension `dim`.
    pub fn parse<S: AsRef<str>>(dim: usize, drift: &[S], observation: &[S]) -> Result<Self> {
        if drift.len() != dim {
            return Err(Error::InvalidModel(format!(
                "expected {dim} drift expressions, found {}",
                drift.len()
            )));
        }
        let parse_all = |name: &str, texts: &[S]| -> Result<Vec<Expr>> {
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    expr::parse(t.as_ref(), dim).map_err(|source| Error::Parse {
                        field: format!("{name}[{}]", i + 1),
                        source,
                    })
                })
                .collect()
        };
        ModelSpec::new(parse_all("f", drift)?, parse_all("h", observation)?)
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.observation.len()
    }

    pub fn drift(&self) -> &[Expr] {
        &self.drift
    }

    pub fn observation(&self) -> &[Expr] {
        &self.observation
    }

    /// `div f + |h|^2 / 2` as an expression.
    pub fn reaction(&self) -> Expr {
        use crate::expr::BinaryOp;
        let half_h2 = self
            .observation
            .iter()
            .map(|h| Expr::binary(BinaryOp::Pow, h.clone(), Expr::Const(2.0)))
            .reduce(|a, b| Expr::binary(BinaryOp::Add, a, b))
            .expect("non-empty observation");
        Expr::binary(
            BinaryOp::Add,
            expr::divergence(&self.drift),
            Expr::binary(BinaryOp::Mul, Expr::Const(0.5), half_h2),
        )
    }
}
