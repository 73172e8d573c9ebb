use alloc::format;

use crate::error::{Error, Result};

/// Nested time discretization: `ntau` observation intervals of length
/// `dtau`, each split into `nt` fine steps of length `dt`.
///
/// `dtau` is always exactly `nt * dt` and the horizon is `ntau * dtau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    nt: usize,
    ntau: usize,
}

const RATIO_TOL: f64 = 1e-9;

fn integral_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let r = num / den;
    let n = libm::round(r);
    if n.is_nan() || n < 1.0 || libm::fabs(r - n) > RATIO_TOL * n.max(1.0) {
        return Err(Error::InvalidTimeGrid(format!("{what} = {r} is not a positive integer")));
    }
    Ok(n as usize)
}

impl TimeGrid {
    /// Builds from the horizon `t_end`, fine step `dt` and observation step
    /// `dtau`. Both `dtau / dt` and `t_end / dtau` must be integers.
    pub fn new(t_end: f64, dt: f64, dtau: f64) -> Result<Self> {
        for (name, v) in [("T", t_end), ("dt", dt), ("dtau", dtau)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidTimeGrid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let nt = integral_ratio(dtau, dt, "dtau/dt")?;
        let ntau = integral_ratio(t_end, dtau, "T/dtau")?;
        Ok(TimeGrid { dt, nt, ntau })
    }

    pub fn from_counts(dt: f64, nt: usize, ntau: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) || nt == 0 || ntau == 0 {
            return Err(Error::InvalidTimeGrid(format!("dt={dt}, nt={nt}, ntau={ntau}")));
        }
        Ok(TimeGrid { dt, nt, ntau })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dtau(&self) -> f64 {
        self.nt as f64 * self.dt
    }

    /// Fine steps per observation interval.
    pub fn nt(&self) -> usize {
        self.nt
    }

    /// Number of observation intervals.
    pub fn ntau(&self) -> usize {
        self.ntau
    }

    /// Total fine steps, `nt * ntau`.
    pub fn total_steps(&self) -> usize {
        self.nt * self.ntau
    }

    pub fn t_end(&self) -> f64 {
        self.ntau as f64 * self.dtau()
    }
}
