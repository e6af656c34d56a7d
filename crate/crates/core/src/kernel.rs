//! The topological communication kernel
//! `φ(x, y) = h(|x - y|) / (|x - y|^{n+α-τ} d(x, y)^τ)` and its per-stage cache.

use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use crate::domain::{self, DensityAccumulator, DomainShape};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::operator::StencilRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BumpProfile {
    /// `exp(1 - 1/(1 - (r/r0)^2))` on `r < r0`.
    #[default]
    Mollifier,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub alpha: f64,
    pub tau: f64,
    pub r0: f64,
    pub bump: BumpProfile,
}

impl KernelParams {
    pub fn new(alpha: f64, tau: f64, r0: f64) -> Result<Self> {
        let p = KernelParams {
            alpha,
            tau,
            r0,
            bump: BumpProfile::Mollifier,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::arg(format!("alpha must lie in (0,2), got {}", self.alpha)));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::arg(format!("tau must be >= 0, got {}", self.tau)));
        }
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(Error::arg(format!("r0 must be positive, got {}", self.r0)));
        }
        Ok(())
    }

    /// Checks the cutoff against a grid: `h <= r0 <= L/4`.
    pub fn validate_for(&self, grid: &Grid) -> Result<()> {
        self.validate()?;
        if self.r0 > grid.period() / 4.0 {
            return Err(Error::arg(format!(
                "r0 = {} exceeds a quarter period ({})",
                self.r0,
                grid.period() / 4.0
            )));
        }
        if self.r0 < grid.spacing() {
            return Err(Error::arg(format!(
                "r0 = {} is below the grid spacing {}",
                self.r0,
                grid.spacing()
            )));
        }
        Ok(())
    }

    /// Metric part `h(r) / r^{n+α-τ}` of the kernel.
    pub fn radial_factor(&self, r: f64, dim: usize) -> f64 {
        let hr = bump_h(r, self);
        if hr == 0.0 {
            return 0.0;
        }
        hr / r.powf(dim as f64 + self.alpha - self.tau)
    }
}

pub fn bump_h(r: f64, params: &KernelParams) -> f64 {
    match params.bump {
        BumpProfile::Mollifier => {
            let q = r / params.r0;
            if q >= 1.0 {
                0.0
            } else {
                (1.0 - 1.0 / (1.0 - q * q)).exp()
            }
        }
    }
}

/// `d^τ` from an `Ω`-mass: `mass^{τ/n}`.
fn distance_power(mass: f64, tau: f64, dim: usize) -> f64 {
    if tau == 0.0 {
        return 1.0;
    }
    let e = tau / dim as f64;
    if e == 1.0 {
        mass
    } else {
        mass.powf(e)
    }
}

/// Direct evaluation of `φ(x, y)` at arbitrary points.
pub fn phi(
    x: [f64; 2],
    y: [f64; 2],
    acc: &DensityAccumulator,
    shape: &DomainShape,
    params: &KernelParams,
) -> Result<f64> {
    let grid = acc.grid();
    let dim = grid.dim();
    let d0 = grid.min_image(y[0] - x[0]);
    let d1 = if dim == 2 { grid.min_image(y[1] - x[1]) } else { 0.0 };
    let r = (d0 * d0 + d1 * d1).sqrt();
    if r == 0.0 {
        return Err(Error::SingularPoint);
    }
    let radial = params.radial_factor(r, dim);
    if radial == 0.0 {
        return Ok(0.0);
    }
    if params.tau == 0.0 {
        return Ok(radial);
    }
    let mass = domain::omega_mass(acc, shape, x, y)?;
    domain::mass_to_distance(mass, dim, acc.floor(), x)?;
    Ok(radial / distance_power(mass, params.tau, dim))
}

/// Hash of the exact bit patterns of a density field.
pub fn fingerprint(rho: &Field) -> u64 {
    let mut hasher = std::hash::DefaultHasher::new();
    rho.grid().points_per_axis().hash(&mut hasher);
    rho.grid().dim().hash(&mut hasher);
    for v in rho.component(0) {
        v.to_bits().hash(&mut hasher);
    }
    hasher.finish()
}

/// `φ(x_i, x_i + z_j)` for every grid point and stencil offset.
///
/// Rows are grid points; columns follow the stencil's interleaved
/// `[+z_0, -z_0, +z_1, -z_1, ...]` order.
#[derive(Clone, Debug)]
pub struct KernelCache {
    grid: Grid,
    params: KernelParams,
    width: usize,
    table: Vec<f64>,
    fingerprint: u64,
}

impl KernelCache {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.table[i * self.width..(i + 1) * self.width]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.table[i * self.width + j]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Fails unless the cache was built from exactly this density.
    pub fn ensure_current(&self, rho: &Field) -> Result<()> {
        if rho.grid() != &self.grid {
            return Err(Error::StaleCache("density lives on a different grid".into()));
        }
        if self.table.len() != self.grid.len() * self.width || fingerprint(rho) != self.fingerprint {
            return Err(Error::StaleCache(
                "density changed since the kernel table was built".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn ensure_stencil(&self, stencil: &StencilRule) -> Result<()> {
        if stencil.grid() != &self.grid || stencil.len() != self.width {
            return Err(Error::StaleCache("stencil does not match the kernel table".into()));
        }
        Ok(())
    }
}

pub fn build_kernel_cache(
    rho: &Field,
    shape: &DomainShape,
    params: &KernelParams,
    stencil: &StencilRule,
    floor: f64,
) -> Result<KernelCache> {
    KernelBuilder::new(shape, params, stencil).build(rho, stencil, floor)
}

/// Density-independent parts of the kernel table, reused across rebuilds.
#[derive(Clone, Debug)]
pub struct KernelBuilder {
    grid: Grid,
    params: KernelParams,
    radial: Vec<f64>,
    /// Per positive offset, `Ω`-mass as weights on shifted density values (2D).
    lens: Vec<Vec<([i64; 2], f64)>>,
}

impl KernelBuilder {
    pub fn new(shape: &DomainShape, params: &KernelParams, stencil: &StencilRule) -> Self {
        let grid = stencil.grid().clone();
        let dim = grid.dim();
        let radial = (0..stencil.pairs())
            .map(|p| params.radial_factor(stencil.radius(p), dim))
            .collect();
        let lens = if dim == 2 && params.tau != 0.0 {
            (0..stencil.pairs())
                .map(|p| domain::lens_mass_stencil(&grid, shape, stencil.offset(2 * p)))
                .collect()
        } else {
            Vec::new()
        };
        KernelBuilder {
            grid,
            params: *params,
            radial,
            lens,
        }
    }

    pub fn build(&self, rho: &Field, stencil: &StencilRule, floor: f64) -> Result<KernelCache> {
        let mut table = Vec::new();
        self.fill(&mut table, rho, stencil, floor)?;
        Ok(KernelCache {
            grid: self.grid.clone(),
            params: self.params,
            width: stencil.len(),
            table,
            fingerprint: fingerprint(rho),
        })
    }

    /// Rebuilds `cache` for `rho` in place, reusing its storage. On failure
    /// the cache is left empty and reports itself stale.
    pub fn rebuild(
        &self,
        cache: &mut KernelCache,
        rho: &Field,
        stencil: &StencilRule,
        floor: f64,
    ) -> Result<()> {
        let mut table = std::mem::take(&mut cache.table);
        self.fill(&mut table, rho, stencil, floor)?;
        *cache = KernelCache {
            grid: self.grid.clone(),
            params: self.params,
            width: stencil.len(),
            table,
            fingerprint: fingerprint(rho),
        };
        Ok(())
    }

    fn fill(&self, table: &mut Vec<f64>, rho: &Field, stencil: &StencilRule, floor: f64) -> Result<()> {
        let grid = &self.grid;
        let dim = grid.dim();
        if rho.grid() != grid || stencil.grid() != grid || stencil.pairs() != self.radial.len() {
            return Err(Error::arg("density, stencil and kernel builder disagree on the grid"));
        }
        let params = &self.params;
        let acc = DensityAccumulator::new(rho, floor)?;
        let pairs = stencil.pairs();
        let width = stencil.len();
        let rho_v = rho.component(0);

        if table.len() != grid.len() * width {
            table.clear();
            table.resize(grid.len() * width, 0.0);
        }
        let e = if params.tau == 0.0 { 0.0 } else { params.tau / dim as f64 };
        let scale = |coef: f64, mass: f64| -> f64 {
            if e == 0.0 {
                coef
            } else if e == 1.0 {
                coef / mass
            } else {
                coef / mass.powf(e)
            }
        };
        let n = grid.len();
        if dim == 1 {
            // Both members of a pair are arcs of the same prefix table, so
            // φ(x, x - z) = φ(x - z, x) holds bitwise.
            let cells: Vec<usize> = (0..pairs).map(|p| stencil.offset(2 * p)[0] as usize).collect();
            table
                .par_chunks_mut(width)
                .with_min_len(64)
                .enumerate()
                .try_for_each(|(i, row)| -> Result<()> {
                    let mut lightest = f64::INFINITY;
                    for (p, &c) in cells.iter().enumerate() {
                        let ahead = acc.arc_mass_cells(i, c);
                        let behind = acc.arc_mass_cells(if i >= c { i - c } else { i + n - c }, c);
                        lightest = lightest.min(ahead).min(behind);
                        row[2 * p] = scale(self.radial[p], ahead);
                        row[2 * p + 1] = scale(self.radial[p], behind);
                    }
                    if e != 0.0 && !(lightest > 0.0) {
                        domain::mass_to_distance(lightest, dim, floor, grid.coords(i))?;
                    }
                    Ok(())
                })?;
            return Ok(());
        }

        table
            .par_chunks_mut(width)
            .with_min_len(16)
            .enumerate()
            .try_for_each(|(i, row)| -> Result<()> {
                for p in 0..pairs {
                    let mass = if e == 0.0 {
                        1.0
                    } else {
                        self.lens[p].iter().map(|(s, w)| w * rho_v[grid.shifted(i, *s)]).sum()
                    };
                    if !(mass > 0.0) {
                        domain::mass_to_distance(mass, dim, floor, grid.coords(i))?;
                    }
                    row[2 * p] = scale(self.radial[p], mass);
                }
                Ok(())
            })?;
        // φ(x, x - z) = φ(x - z, x), which is the +z entry of the row at x - z.
        for i in 0..n {
            let nb = stencil.neighbor_row(i);
            for p in 0..pairs {
                table[i * width + 2 * p + 1] = table[nb[2 * p + 1] as usize * width + 2 * p];
            }
        }
        Ok(())
    }
}
