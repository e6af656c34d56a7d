//! Uniform periodic grids on T^n (n = 1, 2) and the fields sampled on them.
//!
//! Grid points are `x_i = i * h` for `i = 0..N` along every axis. In two
//! dimensions the flat index is row-major with axis 0 slowest, so point
//! `(i0, i1)` lives at `i0 * N + i1`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &str = "TOPOFLOCK-FIELD v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    period: f64,
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, period: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::arg(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(Error::arg(format!(
                "points per axis must be a power of two >= 8, got {points_per_axis}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::arg(format!("period must be positive, got {period}")));
        }
        Ok(Grid {
            dim,
            n: points_per_axis,
            period,
        })
    }

    /// `N` points per axis on `[0, 2*pi)^dim`.
    pub fn periodic(dim: usize, points_per_axis: usize) -> Result<Self> {
        Grid::new(dim, points_per_axis, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    /// `h^n`, the volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of grid points, `N^n`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of the torus, `L^n`.
    pub fn volume(&self) -> f64 {
        self.period.powi(self.dim as i32)
    }

    /// Conversion factor from integer wavenumbers to physical ones.
    pub fn k_scale(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Per-axis integer indices of a flat index.
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            let bits = self.n.trailing_zeros();
            [idx >> bits, idx & (self.n - 1)]
        }
    }

    pub fn flatten(&self, i: [usize; 2]) -> usize {
        if self.dim == 1 {
            i[0]
        } else {
            i[0] * self.n + i[1]
        }
    }

    /// Flat index of `idx` shifted by the integer offset `m` with wrap-around.
    pub fn shifted(&self, idx: usize, m: [i64; 2]) -> usize {
        // N is a power of two, so masking wraps negative offsets too.
        let mask = self.n as i64 - 1;
        let i = self.unflatten(idx);
        let j0 = ((i[0] as i64 + m[0]) & mask) as usize;
        if self.dim == 1 {
            j0
        } else {
            let j1 = ((i[1] as i64 + m[1]) & mask) as usize;
            (j0 << self.n.trailing_zeros()) | j1
        }
    }

    /// Physical coordinates of a grid point (unused axes are zero).
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        let i = self.unflatten(idx);
        if self.dim == 1 {
            [i[0] as f64 * h, 0.0]
        } else {
            [i[0] as f64 * h, i[1] as f64 * h]
        }
    }

    /// Signed integer wavenumber of FFT bin `i`; the Nyquist bin maps to `+N/2`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Integer wavevector of a flat spectral index.
    pub fn wavevector(&self, idx: usize) -> [i64; 2] {
        let i = self.unflatten(idx);
        if self.dim == 1 {
            [self.wavenumber(i[0]), 0]
        } else {
            [self.wavenumber(i[0]), self.wavenumber(i[1])]
        }
    }

    /// Minimal periodic image of a coordinate difference, in `[-L/2, L/2)`.
    pub fn min_image(&self, d: f64) -> f64 {
        let l = self.period;
        d - l * (d / l + 0.5).floor()
    }
}

/// A scalar or vector function sampled on a grid.
///
/// Components are stored separately; the snapshot format interleaves them.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

impl Field {
    pub fn zeros(grid: &Grid, components: usize) -> Self {
        assert!(components >= 1, "a field needs at least one component");
        Field {
            grid: grid.clone(),
            comps: vec![vec![0.0; grid.len()]; components],
        }
    }

    pub fn constant(grid: &Grid, components: usize, value: f64) -> Self {
        Field {
            grid: grid.clone(),
            comps: vec![vec![value; grid.len()]; components],
        }
    }

    pub fn from_components(grid: &Grid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::arg("a field needs at least one component"));
        }
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::arg(format!(
                    "component has {} values, grid has {} points",
                    c.len(),
                    grid.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::arg("field values must be finite"));
            }
        }
        Ok(Field {
            grid: grid.clone(),
            comps,
        })
    }

    /// Shape-checked only; used by internal kernels whose non-finite output
    /// is detected later as a blow-up.
    pub(crate) fn from_components_unchecked(grid: &Grid, comps: Vec<Vec<f64>>) -> Self {
        debug_assert!(!comps.is_empty() && comps.iter().all(|c| c.len() == grid.len()));
        Field {
            grid: grid.clone(),
            comps,
        }
    }

    pub fn scalar(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        Field::from_components(grid, vec![values])
    }

    /// Samples `f(x)` at every grid point.
    pub fn scalar_from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Field {
            grid: grid.clone(),
            comps: vec![values],
        }
    }

    /// Samples `f(x, c)` for every component `c` at every grid point.
    pub fn vector_from_fn(grid: &Grid, components: usize, f: impl Fn([f64; 2], usize) -> f64) -> Self {
        let comps = (0..components)
            .map(|c| (0..grid.len()).map(|i| f(grid.coords(i), c)).collect())
            .collect();
        Field {
            grid: grid.clone(),
            comps,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_components(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.comps
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.comps.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.comps.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self, c: usize) -> f64 {
        self.comps[c].iter().sum::<f64>() / self.grid.len() as f64
    }

    /// `∫ f_c dx` by the periodic rectangle rule.
    pub fn integral(&self, c: usize) -> f64 {
        self.comps[c].iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Mean-normalised L2 norm `sqrt((1/L^n) ∫ |f|^2)`, summed over components.
    pub fn l2_norm(&self) -> f64 {
        let n = self.grid.len() as f64;
        (self.comps.iter().flatten().map(|v| v * v).sum::<f64>() / n).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    /// `self + a * other`, componentwise.
    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        debug_assert_eq!(self.comps.len(), other.comps.len());
        Field {
            grid: self.grid.clone(),
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(x, y)| x.iter().zip(y).map(|(x, y)| x + a * y).collect())
                .collect(),
        }
    }

    /// `a * self + b * other`, componentwise.
    pub fn lincomb(a: f64, x: &Field, b: f64, y: &Field) -> Field {
        debug_assert_eq!(x.comps.len(), y.comps.len());
        Field {
            grid: x.grid.clone(),
            comps: x
                .comps
                .iter()
                .zip(&y.comps)
                .map(|(x, y)| x.iter().zip(y).map(|(x, y)| a * x + b * y).collect())
                .collect(),
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(-1.0, other)
    }

    /// Shifts the field by an integer number of cells: `g(x) = f(x + m h)`.
    pub fn shifted(&self, m: [i64; 2]) -> Field {
        let grid = &self.grid;
        Field {
            grid: grid.clone(),
            comps: self
                .comps
                .iter()
                .map(|c| (0..grid.len()).map(|i| c[grid.shifted(i, m)]).collect())
                .collect(),
        }
    }

    /// Writes the snapshot format: one ASCII header line followed by
    /// little-endian f64 values in grid order, component fastest.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        writeln!(
            w,
            "{SNAPSHOT_MAGIC}; dim={}; N={}; L={}; components={}",
            g.dim,
            g.n,
            g.period,
            self.comps.len()
        )?;
        let mut buf = Vec::with_capacity(g.len() * self.comps.len() * 8);
        for i in 0..g.len() {
            for c in &self.comps {
                buf.extend_from_slice(&c[i].to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(mut r: R) -> Result<Field> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let header = header.trim_end_matches('\n');
        let mut parts = header.split("; ");
        if parts.next() != Some(SNAPSHOT_MAGIC) {
            return Err(Error::Format(format!("bad magic in header {header:?}")));
        }
        let mut dim = None;
        let mut n = None;
        let mut period = None;
        let mut comps = None;
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("malformed header entry {part:?}")))?;
            let bad = || Error::Format(format!("bad value for {key}: {value:?}"));
            match key {
                "dim" => dim = Some(value.parse::<usize>().map_err(|_| bad())?),
                "N" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
                "L" => period = Some(value.parse::<f64>().map_err(|_| bad())?),
                "components" => comps = Some(value.parse::<usize>().map_err(|_| bad())?),
                _ => return Err(Error::Format(format!("unknown header key {key:?}"))),
            }
        }
        let missing = |k: &str| Error::Format(format!("header is missing {k}"));
        let grid = Grid::new(
            dim.ok_or_else(|| missing("dim"))?,
            n.ok_or_else(|| missing("N"))?,
            period.ok_or_else(|| missing("L"))?,
        )?;
        let ncomp = comps.ok_or_else(|| missing("components"))?;
        if ncomp == 0 {
            return Err(Error::Format("components must be positive".into()));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != grid.len() * ncomp * 8 {
            return Err(Error::Format(format!(
                "expected {} payload bytes, found {}",
                grid.len() * ncomp * 8,
                bytes.len()
            )));
        }
        let mut values = vec![vec![0.0; grid.len()]; ncomp];
        for (k, chunk) in bytes.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
            values[k % ncomp][k / ncomp] = v;
        }
        Field::from_components(&grid, values)
    }
}
