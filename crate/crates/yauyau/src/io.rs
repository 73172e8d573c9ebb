//! Run artifacts: CSV tables and the binary density dump.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a CSV back yields the exact values that were written.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path as FsPath;

use yauyau_core::{DensityField, Matrix, Path, SpatialGrid};

use crate::error::{Error, Result};

/// First eight bytes of every density file.
pub const DENSITY_MAGIC: [u8; 8] = *b"YYDENS\x00\x01";

fn header(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}{i}"))
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        write!(out, "{v}").unwrap();
    }
    out.push('\n');
}

fn write_text(path: &FsPath, text: &str) -> Result<()> {
    fs::write(path, text).map_err(Error::io(path))
}

/// `t,x1..xD`, one row per fine time step.
pub fn states_csv(states: &Path) -> String {
    path_csv("t", "x", states)
}

/// `tau,y1..yM`, one row per observation time.
pub fn observations_csv(obs: &Path) -> String {
    path_csv("tau", "y", obs)
}

fn path_csv(time: &str, prefix: &str, path: &Path) -> String {
    let mut out = String::with_capacity(path.len() * (path.dim() + 1) * 12);
    out.push_str(time);
    for h in header(prefix, path.dim()) {
        out.push(',');
        out.push_str(&h);
    }
    out.push('\n');
    for n in 0..path.len() {
        push_row(&mut out, std::iter::once(path.time(n)).chain(path.row(n).iter().copied()));
    }
    out
}

/// `tau,x1..xD,xhat1..xhatD,err`, one row per observation time.
pub fn estimates_csv(taus: &[f64], truth: &Matrix, estimates: &Matrix, errors: &[f64]) -> String {
    let d = estimates.cols();
    let mut out = String::new();
    let cols: Vec<String> = std::iter::once("tau".to_string())
        .chain(header("x", d))
        .chain(header("xhat", d))
        .chain(std::iter::once("err".to_string()))
        .collect();
    out.push_str(&cols.join(","));
    out.push('\n');
    for (k, tau) in taus.iter().enumerate() {
        let err = errors.get(k).copied().unwrap_or(f64::NAN);
        push_row(
            &mut out,
            std::iter::once(*tau)
                .chain(truth.row(k).iter().copied())
                .chain(estimates.row(k).iter().copied())
                .chain(std::iter::once(err)),
        );
    }
    out
}

pub fn write_states(path: &FsPath, states: &Path) -> Result<()> {
    write_text(path, &states_csv(states))
}

pub fn write_observations(path: &FsPath, obs: &Path) -> Result<()> {
    write_text(path, &observations_csv(obs))
}

pub fn write_estimates(path: &FsPath, taus: &[f64], truth: &Matrix, estimates: &Matrix, errors: &[f64]) -> Result<()> {
    write_text(path, &estimates_csv(taus, truth, estimates, errors))
}

/// `x1..xD,value`, one row per node in flattening order.
pub fn density_csv(grid: &SpatialGrid, density: &DensityField) -> String {
    let mut out = header("x", grid.dim()).collect::<Vec<_>>().join(",");
    out.push_str(",value\n");
    let mut point = vec![0.0; grid.dim()];
    for (i, v) in density.values().iter().enumerate() {
        grid.point(i, &mut point);
        push_row(&mut out, point.iter().copied().chain(std::iter::once(*v)));
    }
    out
}

/// A numeric CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Matrix,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.column(j))
    }
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let bad = |message: String| Error::Format { what: "csv", message };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let columns: Vec<String> = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .split(',')
        .map(|c| c.trim().to_string())
        .collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let before = data.len();
        for cell in line.split(',') {
            data.push(
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("line {}: {e}", i + 2)))?,
            );
        }
        if data.len() - before != columns.len() {
            return Err(bad(format!(
                "line {} has {} cells, expected {}",
                i + 2,
                data.len() - before,
                columns.len()
            )));
        }
        rows += 1;
    }
    let rows = Matrix::from_vec(rows, columns.len(), data);
    Ok(Table { columns, rows })
}

pub fn read_csv(path: &FsPath) -> Result<Table> {
    parse_csv(&fs::read_to_string(path).map_err(Error::io(path))?)
}

/// Encodes a density on `grid`: magic, `D` and `Ns` as little-endian u32,
/// then `ds`, `lo[0..D]`, `hi[0..D]` and the `Ns^D` values (row-major, last
/// axis fastest) as little-endian f64.
pub fn encode_density(grid: &SpatialGrid, density: &DensityField) -> Vec<u8> {
    let d = grid.dim();
    let mut out = Vec::with_capacity(16 + 8 * (1 + 2 * d + density.len()));
    out.extend_from_slice(&DENSITY_MAGIC);
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(grid.ns() as u32).to_le_bytes());
    out.extend_from_slice(&grid.ds().to_le_bytes());
    for v in std::iter::repeat_n(grid.lo(), d).chain(std::iter::repeat_n(grid.hi(), d)) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in density.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// A decoded density file.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityDump {
    pub dim: usize,
    pub ns: usize,
    pub ds: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn decode_density(bytes: &[u8]) -> Result<DensityDump> {
    let bad = |message: &str| Error::Format {
        what: "density file",
        message: message.into(),
    };
    if bytes.len() < 24 || bytes[..8] != DENSITY_MAGIC {
        return Err(bad("missing magic header"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let dim = u32_at(8);
    let ns = u32_at(12);
    let count = ns
        .checked_pow(dim as u32)
        .ok_or_else(|| bad("node count overflows"))?;
    let floats = &bytes[16..];
    if floats.len() != 8 * (1 + 2 * dim + count) {
        return Err(bad("length does not match header"));
    }
    let mut it = floats.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let ds = it.next().unwrap();
    let lo = it.by_ref().take(dim).collect();
    let hi = it.by_ref().take(dim).collect();
    Ok(DensityDump {
        dim,
        ns,
        ds,
        lo,
        hi,
        values: it.collect(),
    })
}

pub fn write_density(path: &FsPath, grid: &SpatialGrid, density: &DensityField) -> Result<()> {
    let mut file = fs::File::create(path).map_err(Error::io(path))?;
    file.write_all(&encode_density(grid, density)).map_err(Error::io(path))
}

pub fn read_density(path: &FsPath) -> Result<DensityDump> {
    decode_density(&fs::read(path).map_err(Error::io(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use yauyau_core::DEFAULT_NODE_BUDGET;

    #[test]
    fn csv_round_trips_exactly() {
        let values = Matrix::from_rows(&[vec![0.1, -1.0 / 3.0], vec![1e-300, 2.5e10]]);
        let path = Path::new(0.005, values.clone());
        let text = observations_csv(&path);
        assert!(text.starts_with("tau,y1,y2\n0,0.1,"));
        let table = parse_csv(&text).unwrap();
        assert_eq!(table.columns, ["tau", "y1", "y2"]);
        assert_eq!(table.column("y1").unwrap(), values.column(0));
        assert_eq!(table.column("y2").unwrap(), values.column(1));
        assert_eq!(table.column("tau").unwrap(), [0.0, 0.005]);
    }

    #[test]
    fn estimates_header() {
        let m = Matrix::zeros(2, 2);
        let text = estimates_csv(&[0.0, 0.5], &m, &m, &[0.0, 0.0]);
        assert_eq!(text.lines().next().unwrap(), "tau,x1,x2,xhat1,xhat2,err");
        assert_eq!(parse_csv(&text).unwrap().rows.rows(), 2);
    }

    #[test]
    fn ragged_csv_is_rejected() {
        assert!(parse_csv("a,b\n1,2\n3\n").is_err());
        assert!(parse_csv("a\nx\n").is_err());
        assert!(parse_csv("").is_err());
    }

    #[test]
    fn density_round_trip() {
        let grid = SpatialGrid::new(2, -1.0, 0.5, 5, DEFAULT_NODE_BUDGET).unwrap();
        let field = DensityField::new((0..25).map(|i| i as f64 / 7.0).collect());
        let bytes = encode_density(&grid, &field);
        assert_eq!(bytes.len(), 16 + 8 * (1 + 4 + 25));
        let dump = decode_density(&bytes).unwrap();
        assert_eq!((dump.dim, dump.ns, dump.ds), (2, 5, 0.5));
        assert_eq!(dump.lo, [-1.0, -1.0]);
        assert_eq!(dump.hi, [1.0, 1.0]);
        assert_eq!(dump.values, field.values());
        assert!(decode_density(&bytes[..bytes.len() - 1]).is_err());
        let csv = parse_csv(&density_csv(&grid, &field)).unwrap();
        assert_eq!(csv.columns, ["x1", "x2", "value"]);
        assert_eq!(csv.rows.row(6), [-0.5, -0.5, 6.0 / 7.0]);
        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(decode_density(&corrupt).is_err());
    }
}
