//! Discrete sine transform of type I.
//!
//! `S[k] = sum_{j=1..N} v[j] sin(j k pi / (N+1))` for `k = 1..N`
//! (unnormalized). The transform is its own inverse up to the factor
//! `2 / (N+1)`. Its basis vectors are the eigenvectors of the
//! second-difference matrix with homogeneous Dirichlet ends, which is what
//! makes the implicit diffusion solve diagonal.
//!
//! Two evaluation strategies sit behind [`SineTransform`]: a table-driven
//! matrix-vector product (exact reference, O(N^2)) and, with the `std`
//! feature, an FFT of the odd extension of length `2(N+1)`.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "std")]
use alloc::sync::Arc;
#[cfg(feature = "std")]
use rustfft::{num_complex::Complex, Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Axis length from which [`SineTransform::new`] switches to the FFT.
pub const FFT_THRESHOLD: usize = 48;

/// `sin(m pi / (n + 1))` for `m = 0..2(n+1)`; indices are reduced modulo
/// the period so large `j * k` stay exact.
fn sine_table(n: usize) -> Vec<f64> {
    let period = 2 * (n + 1);
    let h = core::f64::consts::PI / (n + 1) as f64;
    (0..period).map(|m| libm::sin(m as f64 * h)).collect()
}

/// Forward DST-I by direct summation.
pub fn dst_1d(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let table = sine_table(n);
    let period = table.len();
    (1..=n)
        .map(|k| {
            v.iter()
                .enumerate()
                .map(|(j, &vj)| vj * table[((j + 1) * k) % period])
                .sum()
        })
        .collect()
}

/// Inverse DST-I, `2/(N+1) * dst_1d(s)`.
pub fn idst_1d(s: &[f64]) -> Vec<f64> {
    let scale = 2.0 / (s.len() + 1) as f64;
    dst_1d(s).into_iter().map(|x| x * scale).collect()
}

#[derive(Clone)]
enum Strategy {
    /// Row-major `n x n` sine matrix.
    Table(Vec<f64>),
    #[cfg(feature = "std")]
    Fft(Arc<dyn Fft<f64>>),
}

/// Planned DST-I for one axis length. Immutable and shareable; scratch
/// space lives in [`DstWork`].
#[derive(Clone)]
pub struct SineTransform {
    n: usize,
    strategy: Strategy,
}

impl core::fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let kind = match self.strategy {
            Strategy::Table(_) => "table",
            #[cfg(feature = "std")]
            Strategy::Fft(_) => "fft",
        };
        f.debug_struct("SineTransform").field("n", &self.n).field("strategy", &kind).finish()
    }
}

/// Scratch buffers for [`SineTransform`].
#[derive(Debug, Default, Clone)]
pub struct DstWork {
    line: Vec<f64>,
    out: Vec<f64>,
    #[cfg(feature = "std")]
    buf: Vec<Complex<f64>>,
    #[cfg(feature = "std")]
    scratch: Vec<Complex<f64>>,
}

impl SineTransform {
    /// Picks the FFT for `n >= FFT_THRESHOLD` when available.
    pub fn new(n: usize) -> Self {
        #[cfg(feature = "std")]
        if n >= FFT_THRESHOLD {
            return Self::fft(n);
        }
        Self::table(n)
    }

    pub fn table(n: usize) -> Self {
        let sines = sine_table(n);
        let period = sines.len();
        let mut m = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                m[k * n + j] = sines[((j + 1) * (k + 1)) % period];
            }
        }
        SineTransform {
            n,
            strategy: Strategy::Table(m),
        }
    }

    #[cfg(feature = "std")]
    pub fn fft(n: usize) -> Self {
        let plan = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        SineTransform {
            n,
            strategy: Strategy::Fft(plan),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn uses_fft(&self) -> bool {
        !matches!(self.strategy, Strategy::Table(_))
    }

    /// Unnormalized forward transform of `line` in place.
    pub fn apply(&self, line: &mut [f64], work: &mut DstWork) {
        debug_assert_eq!(line.len(), self.n);
        let n = self.n;
        match &self.strategy {
            Strategy::Table(m) => {
                work.out.clear();
                work.out.extend(m.chunks_exact(n).map(|row| {
                    row.iter().zip(line.iter()).map(|(a, b)| a * b).sum::<f64>()
                }));
                line.copy_from_slice(&work.out);
            }
            #[cfg(feature = "std")]
            Strategy::Fft(plan) => {
                let len = 2 * (n + 1);
                work.buf.clear();
                work.buf.resize(len, Complex::new(0.0, 0.0));
                for (j, &v) in line.iter().enumerate() {
                    work.buf[j + 1].re = v;
                    work.buf[len - 1 - j].re = -v;
                }
                let need = plan.get_inplace_scratch_len();
                if work.scratch.len() < need {
                    work.scratch.resize(need, Complex::new(0.0, 0.0));
                }
                plan.process_with_scratch(&mut work.buf, &mut work.scratch[..need]);
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = -0.5 * work.buf[k + 1].im;
                }
            }
        }
    }

    /// Unnormalized forward transform along every axis of a `dim`-dimensional
    /// row-major array with this transform's length on each axis.
    pub fn apply_nd(&self, data: &mut [f64], dim: usize, work: &mut DstWork) {
        let n = self.n;
        debug_assert_eq!(data.len(), n.pow(dim as u32));
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    self.apply(chunk, work);
                }
                continue;
            }
            let block = stride * n;
            let mut line = core::mem::take(&mut work.line);
            line.resize(n, 0.0);
            for base in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let start = base + inner;
                    for (i, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + i * stride];
                    }
                    self.apply(&mut line, work);
                    for (i, &v) in line.iter().enumerate() {
                        data[start + i * stride] = v;
                    }
                }
            }
            work.line = line;
        }
    }
}

/// Separable DST-I over the grid (forward, or inverse with the
/// `(2/(N+1))^D` factor).
pub fn dst_nd(field: &[f64], grid: &SpatialGrid, inverse: bool) -> Result<Vec<f64>> {
    if field.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            found: field.len(),
        });
    }
    let transform = SineTransform::new(grid.ns());
    let mut out = field.to_vec();
    transform.apply_nd(&mut out, grid.dim(), &mut DstWork::default());
    if inverse {
        let scale = libm::pow(2.0 / (grid.ns() + 1) as f64, grid.dim() as f64);
        out.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}
