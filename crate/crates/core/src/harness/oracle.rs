//! The symbol of the frozen-coefficient alignment operator.
//!
//! With `ρ ≡ 1` the discrete kernel depends on `|z|` only, so `L_φ` acts on
//! `e^{ik·x}` as multiplication by `-g m(k)` with
//! `m(k) = Σ_j w h(|z_j|) (1 - cos(k·z_j)) / |z_j|^{n+α}` and the geometry
//! factor `g = c_Ω^{-τ/n}`, `c_Ω` being the `Ω_0`-mass per unit `|z|^n`.
//! The sums here enumerate the offsets on their own, independently of
//! [`StencilRule`](crate::operator::StencilRule).

use crate::domain::DomainShape;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{bump_h, KernelParams};

#[derive(Clone, Debug)]
pub struct MultiplierOracle {
    grid: Grid,
    params: KernelParams,
    geometry: f64,
    /// `(z, w h(|z|) / |z|^{n+α})` over the full cutoff ball.
    terms: Vec<([f64; 2], f64)>,
    /// `|z|^{1-n-α} w h(|z|)`, weights of the remainder sum.
    remainder_terms: Vec<([f64; 2], f64)>,
    symbol: Vec<f64>,
}

/// Tabulates `m(k)` for `k = 0..=max_mode` along `e1`.
pub fn multiplier_oracle(
    params: &KernelParams,
    grid: &Grid,
    shape: &DomainShape,
    max_mode: usize,
) -> Result<MultiplierOracle> {
    params.validate_for(grid)?;
    if max_mode > grid.points_per_axis() / 2 {
        return Err(Error::arg(format!(
            "oracle modes must not exceed N/2 = {}, got {max_mode}",
            grid.points_per_axis() / 2
        )));
    }
    if shape.dim() != grid.dim() {
        return Err(Error::arg("domain shape and grid dimensions differ"));
    }
    let n = grid.dim();
    let h = grid.spacing();
    let w = h.powi(n as i32);
    let reach = (params.r0 / h).floor() as i64;
    let side = if n == 2 { reach } else { 0 };
    let mut terms = Vec::new();
    let mut remainder_terms = Vec::new();
    for a in -reach..=reach {
        for b in -side..=side {
            let z = [a as f64 * h, b as f64 * h];
            let r = z[0].hypot(z[1]);
            if r == 0.0 || r > params.r0 {
                continue;
            }
            let bump = bump_h(r, params);
            terms.push((z, w * bump / r.powf(n as f64 + params.alpha)));
            remainder_terms.push((z, w * bump / r.powf(n as f64 + params.alpha - 1.0)));
        }
    }
    let mass_per_volume = match n {
        1 => 1.0,
        _ => shape.quadrature().iter().map(|q| q.1).sum::<f64>() / 4.0,
    };
    let geometry = if params.tau == 0.0 {
        1.0
    } else {
        mass_per_volume.powf(-params.tau / n as f64)
    };
    let mut oracle = MultiplierOracle {
        grid: grid.clone(),
        params: *params,
        geometry,
        terms,
        remainder_terms,
        symbol: Vec::new(),
    };
    oracle.symbol = (0..=max_mode).map(|k| oracle.symbol_at([k as f64, 0.0])).collect();
    Ok(oracle)
}

impl MultiplierOracle {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    /// `c_Ω^{-τ/n}`: the kernel at `ρ ≡ 1` is `g h(r)/r^{n+α}`.
    pub fn geometry_factor(&self) -> f64 {
        self.geometry
    }

    pub fn max_mode(&self) -> usize {
        self.symbol.len() - 1
    }

    /// Tabulated `m(k e1)`.
    pub fn symbol(&self, k: usize) -> f64 {
        self.symbol[k]
    }

    /// `m` at an arbitrary integer wavevector.
    pub fn symbol_at(&self, k: [f64; 2]) -> f64 {
        let s = self.grid.k_scale();
        self.terms
            .iter()
            .map(|(z, c)| c * (1.0 - (s * (k[0] * z[0] + k[1] * z[1])).cos()))
            .sum()
    }

    /// Physical wavenumber of the integer mode `k`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        self.grid.k_scale() * k as f64
    }

    /// `m(k)/|k|^α`.
    pub fn normalised(&self, k: usize) -> f64 {
        self.symbol[k] / self.wavenumber(k).powf(self.params.alpha)
    }

    /// Integer modes `[4, N/8]`, the calibration band.
    pub fn band(&self) -> std::ops::RangeInclusive<usize> {
        4..=(self.grid.points_per_axis() / 8).min(self.max_mode())
    }

    /// `(c_*, C_*)`: extremes of `m(k)/|k|^α` over the band.
    pub fn band_constants(&self) -> (f64, f64) {
        self.band().map(|k| self.normalised(k)).fold((f64::INFINITY, 0.0), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    }

    /// `‖Σ_z w h |z|^{1-n-α} |δ_z f|‖ / ‖f‖_{Ḣ^{α/2}}` maximised over the band
    /// modes `cos(k x1)`. Bounds the first-order effect of a density
    /// gradient on the kernel.
    pub fn remainder_constant(&self) -> f64 {
        let grid = &self.grid;
        let s = grid.k_scale();
        let mut best: f64 = 0.0;
        for k in self.band() {
            let kf = k as f64;
            let mut sq = 0.0;
            for i in 0..grid.len() {
                let x = grid.coords(i);
                let fx = (s * kf * x[0]).cos();
                let v: f64 = self
                    .remainder_terms
                    .iter()
                    .map(|(z, c)| c * ((s * kf * (x[0] + z[0])).cos() - fx).abs())
                    .sum();
                sq += v * v;
            }
            let norm = (sq / grid.len() as f64).sqrt();
            // ‖cos(kx)‖ = 1/√2 in the mean-normalised norm.
            let hs = self.wavenumber(k).powf(self.params.alpha / 2.0) * std::f64::consts::FRAC_1_SQRT_2;
            best = best.max(norm / hs);
        }
        best
    }
}
