//! Directional Sobolev-type seminorms along `∂Ω_0`.
//!
//! For `θ ∈ ∂Ω_0` and the rotation `U_z` taking `e1` to `z/|z|`, with
//! displacement `w = |z| U_z θ`:
//!
//! ```text
//! D_s(g)        = ∫∫ h(|z|) |g(x + w) - g(x)|² / |z|^{n+s} dz dx
//! S_{ijl}(g)(x) = ∫ [g(x + w) + g(x - w) - 2 g(x)] h(|z|) z_i U_z^{jl} / |z|^{n+α+1} dz
//! ```
//!
//! Both are evaluated twice: in real space from exact trigonometric
//! translates of `g`, and on the Fourier side mode by mode. The bounds
//! `D_s(g) <= C_s ‖g‖²_{Ḣ^{s/2}}` and `‖S_{ijl} g‖ <= C ‖g‖_{Ḣ^α}` use constants
//! tabulated from the same `z` quadrature.

use crate::domain::{make_domain_shape, DomainShape};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::harness::quadrature::{ball_rule, graded_radial_rule, BallNode};
use crate::harness::{CheckRow, Verdict};
use crate::kernel::{bump_h, KernelParams};
use crate::random;
use crate::spectral::{self, SpectralCoefficients};

const RADIAL_PANELS: usize = 6;
const RADIAL_POINTS: usize = 8;
const RADIAL_RATIO: f64 = 0.5;
const ANGLES: usize = 16;
/// Relative rounding allowance on bounds that can be attained exactly.
const ROUNDING: f64 = 1e-9;
pub const DUAL_PATH_TOL: f64 = 1e-6;

/// Quadrature, directions and mode table shared by the appendix checks.
#[derive(Clone, Debug)]
pub struct AppendixSetup {
    grid: Grid,
    params: KernelParams,
    thetas: Vec<[f64; 2]>,
    /// Nodes with `z` in a half space; each stands for the pair `±z`.
    half_nodes: Vec<BallNode>,
    /// Integer modes over which the constants are tabulated.
    table: Vec<[i64; 2]>,
}

/// Directions modulo `θ -> -θ`: both quantities are invariant under it.
fn distinct_directions(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::new();
    for p in points {
        let seen = out
            .iter()
            .any(|q| (q[0] + p[0]).abs() < 1e-12 && (q[1] + p[1]).abs() < 1e-12);
        if !seen {
            out.push(*p);
        }
    }
    out
}

impl AppendixSetup {
    /// `max_mode` bounds `|k_j|` in the constant table.
    pub fn new(grid: &Grid, shape: &DomainShape, params: &KernelParams, max_mode: i64) -> Result<Self> {
        params.validate()?;
        if shape.dim() != grid.dim() {
            return Err(Error::arg("domain shape and grid dimensions differ"));
        }
        if max_mode < 1 || 4 * max_mode >= grid.points_per_axis() as i64 {
            return Err(Error::arg(format!(
                "mode table bound {max_mode} must lie in [1, N/4)"
            )));
        }
        let radial = graded_radial_rule(params.r0, RADIAL_PANELS, RADIAL_POINTS, RADIAL_RATIO);
        let nodes = ball_rule(grid.dim(), params.r0, &radial, ANGLES)?;
        let half_nodes = nodes.chunks(2).map(|p| p[0]).collect();
        let span = if grid.dim() == 2 { max_mode } else { 0 };
        let mut table = Vec::new();
        for a in -max_mode..=max_mode {
            for b in -span..=span {
                if (a, b) != (0, 0) {
                    table.push([a, b]);
                }
            }
        }
        Ok(AppendixSetup {
            grid: grid.clone(),
            params: *params,
            thetas: distinct_directions(&shape.boundary_points()),
            half_nodes,
            table,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn directions(&self) -> &[[f64; 2]] {
        &self.thetas
    }

    /// `|z| U_z θ`.
    fn displacement(&self, node: &BallNode, theta: [f64; 2]) -> [f64; 2] {
        if self.grid.dim() == 1 {
            return [node.z[0] * theta[0], 0.0];
        }
        let (c, s) = (node.z[0] / node.r, node.z[1] / node.r);
        [
            node.r * (c * theta[0] - s * theta[1]),
            node.r * (s * theta[0] + c * theta[1]),
        ]
    }

    /// `U_z^{jl}` for the rotation taking `e1` to `z/|z|`.
    fn rotation_entry(&self, node: &BallNode, j: usize, l: usize) -> f64 {
        if self.grid.dim() == 1 {
            return node.z[0].signum();
        }
        let (c, s) = (node.z[0] / node.r, node.z[1] / node.r);
        [[c, -s], [s, c]][j][l]
    }

    fn index_choices(&self) -> Vec<[usize; 3]> {
        let n = self.grid.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    out.push([i, j, l]);
                }
            }
        }
        out
    }

    fn weight(&self, node: &BallNode, power: f64) -> f64 {
        node.weight * bump_h(node.r, &self.params) / node.r.powf(power)
    }

    fn dot(&self, k: [i64; 2], w: [f64; 2]) -> f64 {
        self.grid.k_scale() * (k[0] as f64 * w[0] + k[1] as f64 * w[1])
    }

    fn k_norm(&self, k: [i64; 2]) -> f64 {
        spectral::k_squared(&self.grid, k).sqrt()
    }

    /// `D_s(g)` averaged over the directions, from real-space translates.
    pub fn ds_real(&self, g: &Field, s: f64) -> Result<f64> {
        let g0 = self.scalar(g)?;
        let coeffs = SpectralCoefficients::of(&self.grid, g0);
        let n = self.grid.dim() as f64;
        let volume = self.grid.volume();
        let mut total = 0.0;
        for &theta in &self.thetas {
            let mut d = 0.0;
            for node in &self.half_nodes {
                let w = self.displacement(node, theta);
                let plus = coeffs.translated(w);
                let minus = coeffs.translated([-w[0], -w[1]]);
                let sq = |t: &[f64]| -> f64 {
                    t.iter().zip(g0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / g0.len() as f64
                };
                d += self.weight(node, n + s) * (sq(&plus) + sq(&minus));
            }
            total += volume * d;
        }
        Ok(total / self.thetas.len() as f64)
    }

    /// `∫ h |e^{ik·w} - 1|² / |z|^{n+s} dz` averaged over the directions.
    pub fn ds_symbol(&self, k: [i64; 2], s: f64) -> f64 {
        let n = self.grid.dim() as f64;
        let mut total = 0.0;
        for &theta in &self.thetas {
            for node in &self.half_nodes {
                let a = self.dot(k, self.displacement(node, theta));
                // Both members of the pair contribute 2 - 2cos(±a).
                total += self.weight(node, n + s) * 2.0 * (2.0 - 2.0 * a.cos());
            }
        }
        total / self.thetas.len() as f64
    }

    /// `D_s(g)` from `Σ_k |ĝ(k)|² ∫ h |e^{ik·w} - 1|² / |z|^{n+s} dz`.
    pub fn ds_fourier(&self, g: &Field, s: f64) -> Result<f64> {
        let g0 = self.scalar(g)?;
        let volume = self.grid.volume();
        Ok(volume
            * self
                .active_modes(g0)
                .iter()
                .map(|(k, c2)| c2 * self.ds_symbol(*k, s))
                .sum::<f64>())
    }

    /// `C_s = L^n max_k ds_symbol(k)/|k|^s` over the mode table.
    pub fn ds_constant(&self, s: f64) -> f64 {
        let volume = self.grid.volume();
        self.table
            .iter()
            .map(|&k| volume * self.ds_symbol(k, s) / self.k_norm(k).powf(s))
            .fold(0.0, f64::max)
    }

    /// `‖S_{ijl}(g)‖_{L²}` for every direction (rows) and index choice
    /// (columns), from real-space translates.
    pub fn second_difference_real(&self, g: &Field) -> Result<Vec<Vec<f64>>> {
        Ok(self.real_space(g, None)?.1)
    }

    /// One pass over the translates of `g` yielding `D_s(g)` (when `s` is
    /// given) and the second-difference norms.
    pub fn real_space(&self, g: &Field, s: Option<f64>) -> Result<(f64, Vec<Vec<f64>>)> {
        let g0 = self.scalar(g)?;
        let coeffs = SpectralCoefficients::of(&self.grid, g0);
        let n = self.grid.dim() as f64;
        let alpha = self.params.alpha;
        let choices = self.index_choices();
        let len = g0.len();
        let volume = self.grid.volume();
        let mut ds = 0.0;
        let mut out = Vec::with_capacity(self.thetas.len());
        for &theta in &self.thetas {
            let mut fields = vec![vec![0.0; len]; choices.len()];
            for node in &self.half_nodes {
                let w = self.displacement(node, theta);
                let plus = coeffs.translated(w);
                let minus = coeffs.translated([-w[0], -w[1]]);
                if let Some(s) = s {
                    let sq = |t: &[f64]| -> f64 {
                        t.iter().zip(g0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / len as f64
                    };
                    ds += volume * self.weight(node, n + s) * (sq(&plus) + sq(&minus));
                }
                let second: Vec<f64> = (0..len).map(|x| plus[x] + minus[x] - 2.0 * g0[x]).collect();
                let base = self.weight(node, n + alpha + 1.0);
                for (field, &[i, j, l]) in fields.iter_mut().zip(&choices) {
                    // The members z and -z carry the same kernel value.
                    let c = 2.0 * base * node.z[i] * self.rotation_entry(node, j, l);
                    for (f, d) in field.iter_mut().zip(&second) {
                        *f += c * d;
                    }
                }
            }
            out.push(
                fields
                    .iter()
                    .map(|f| (volume * f.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt())
                    .collect(),
            );
        }
        Ok((ds / self.thetas.len() as f64, out))
    }

    /// Multiplier of `S_{ijl}` at mode `k` for direction `theta`.
    pub fn second_difference_symbol(&self, k: [i64; 2], theta: [f64; 2], index: [usize; 3]) -> f64 {
        let n = self.grid.dim() as f64;
        let [i, j, l] = index;
        self.half_nodes
            .iter()
            .map(|node| {
                let a = self.dot(k, self.displacement(node, theta));
                2.0 * self.weight(node, n + self.params.alpha + 1.0)
                    * node.z[i]
                    * self.rotation_entry(node, j, l)
                    * (2.0 * a.cos() - 2.0)
            })
            .sum()
    }

    /// Fourier-side counterpart of [`AppendixSetup::second_difference_real`].
    pub fn second_difference_fourier(&self, g: &Field) -> Result<Vec<Vec<f64>>> {
        let g0 = self.scalar(g)?;
        let modes = self.active_modes(g0);
        let volume = self.grid.volume();
        Ok(self
            .thetas
            .iter()
            .map(|&theta| {
                self.index_choices()
                    .into_iter()
                    .map(|idx| {
                        let sq: f64 = modes
                            .iter()
                            .map(|(k, c2)| c2 * self.second_difference_symbol(*k, theta, idx).powi(2))
                            .sum();
                        (volume * sq).sqrt()
                    })
                    .collect()
            })
            .collect())
    }

    /// `∫ min{4, |z|²|k|²} h / |z|^{n+α} dz`, which dominates every
    /// `|second_difference_symbol(k, θ, ·)|` because `|z_i U_z^{jl}| <= |z|`,
    /// `|θ| <= 1` and `|2cos a - 2| <= min{4, a²}`.
    pub fn second_difference_majorant(&self, k: [i64; 2]) -> f64 {
        let n = self.grid.dim() as f64;
        let k2 = spectral::k_squared(&self.grid, k);
        self.half_nodes
            .iter()
            .map(|node| 2.0 * self.weight(node, n + self.params.alpha) * (node.r * node.r * k2).min(4.0))
            .sum()
    }

    /// `C` with `‖S_{ijl} g‖_{L²} <= C ‖g‖_{Ḣ^α}` on the mode table.
    pub fn second_difference_constant(&self) -> f64 {
        let alpha = self.params.alpha;
        self.grid.volume().sqrt()
            * self
                .table
                .iter()
                .map(|&k| self.second_difference_majorant(k) / self.k_norm(k).powf(alpha))
                .fold(0.0, f64::max)
    }

    fn scalar<'a>(&self, g: &'a Field) -> Result<&'a [f64]> {
        if g.grid() != &self.grid || g.n_components() != 1 {
            return Err(Error::arg("appendix checks take a scalar field on the setup grid"));
        }
        Ok(g.component(0))
    }

    /// Nonzero modes `k` with `|ĝ(k)|²`.
    fn active_modes(&self, g: &[f64]) -> Vec<([i64; 2], f64)> {
        let modes = spectral::forward(&self.grid, g);
        let peak = modes.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        modes
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let k = self.grid.wavevector(i);
                let c2 = c.norm_sqr();
                (k != [0, 0] && c2 > 1e-28 * peak).then_some((k, c2))
            })
            .collect()
    }
}

/// `D_s(g)` averaged over the boundary directions of `shape`, with the
/// cutoff profile of `params`.
pub fn ds_seminorm(g: &Field, s: f64, shape: &DomainShape, params: &KernelParams) -> Result<f64> {
    if !(s > 0.0 && s < 2.0) {
        return Err(Error::arg(format!("s must lie in (0,2), got {s}")));
    }
    let max_mode = ((g.grid().points_per_axis() as i64 - 1) / 4).max(1);
    AppendixSetup::new(g.grid(), shape, params, max_mode)?.ds_real(g, s)
}

/// Outcome of the second-difference bound for one function: the worst
/// direction and index choice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondDifferenceOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

pub fn second_difference_check(setup: &AppendixSetup, g: &Field) -> Result<SecondDifferenceOutcome> {
    let norms = setup.second_difference_real(g)?;
    Ok(second_difference_outcome(setup, g, &norms))
}

fn second_difference_outcome(setup: &AppendixSetup, g: &Field, norms: &[Vec<f64>]) -> SecondDifferenceOutcome {
    let worst = norms.iter().flatten().copied().fold(0.0, f64::max);
    let rhs = setup.second_difference_constant() * spectral::sobolev_seminorm(g, setup.params.alpha);
    SecondDifferenceOutcome {
        lhs: worst,
        rhs,
        passed: worst <= rhs * (1.0 + ROUNDING),
    }
}

/// The scan over seeded random trigonometric polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct AppendixSuite {
    pub dim: usize,
    pub points_per_axis: usize,
    pub period: f64,
    pub params: KernelParams,
    pub lens_half_angle: f64,
    pub quad_points: usize,
    pub samples: usize,
    pub max_mode: i64,
    pub seed: u64,
}

impl AppendixSuite {
    pub fn new(dim: usize, params: KernelParams, seed: u64) -> Self {
        AppendixSuite {
            dim,
            points_per_axis: 64,
            period: 2.0 * std::f64::consts::PI,
            params,
            lens_half_angle: crate::domain::DEFAULT_LENS_HALF_ANGLE,
            quad_points: crate::domain::MIN_QUAD_POINTS,
            samples: 50,
            max_mode: if dim == 1 { 6 } else { 4 },
            seed,
        }
    }

    pub fn run(&self) -> Result<AppendixReport> {
        let grid = Grid::new(self.dim, self.points_per_axis, self.period)?;
        let shape = make_domain_shape(self.dim, self.lens_half_angle, self.quad_points)?;
        let setup = AppendixSetup::new(&grid, &shape, &self.params, self.max_mode)?;
        let s = self.params.alpha;
        let suite = format!("appendix-{}d", self.dim);
        let mut rows = Vec::new();

        let c_s = setup.ds_constant(s);
        let c_2 = setup.second_difference_constant();

        let constant = Field::constant(&grid, 1, 0.7);
        rows.push(CheckRow::upper(&suite, "ds_constant", "g=const", setup.ds_real(&constant, s)?, 0.0));
        let sd = second_difference_check(&setup, &constant)?;
        rows.push(CheckRow::upper(&suite, "second_difference_constant", "g=const", sd.lhs, 0.0));

        let probes: Vec<[i64; 2]> = if self.dim == 1 {
            (1..=self.max_mode).map(|k| [k, 0]).collect()
        } else {
            vec![[1, 0], [0, 2], [2, 3], [self.max_mode, -1]]
        };
        for k in probes {
            let g = Field::scalar_from_fn(&grid, |x| {
                (grid.k_scale() * (k[0] as f64 * x[0] + k[1] as f64 * x[1])).sin()
            });
            let case = format!("sin k=({} {})", k[0], k[1]);
            let (real_ds, real) = setup.real_space(&g, Some(s))?;
            let fourier = setup.ds_fourier(&g, s)?;
            rows.push(CheckRow::upper(&suite, "ds_dual_path", &case, rel_gap(real_ds, fourier), DUAL_PATH_TOL));
            let fourier = setup.second_difference_fourier(&g)?;
            let gap = real
                .iter()
                .flatten()
                .zip(fourier.iter().flatten())
                .map(|(a, b)| abs_gap(*a, *b, real.iter().flatten().copied().fold(0.0, f64::max)))
                .fold(0.0, f64::max);
            rows.push(CheckRow::upper(&suite, "second_difference_dual_path", &case, gap, DUAL_PATH_TOL));
        }

        let mut rng = random::seeded(self.seed);
        for sample in 0..self.samples {
            let g = random::trig_polynomial(&grid, &mut rng, self.max_mode);
            let case = format!("poly {sample}");
            let (d, norms) = setup.real_space(&g, Some(s))?;
            let bound = c_s * spectral::sobolev_seminorm(&g, s / 2.0).powi(2);
            rows.push(CheckRow::new(
                &suite,
                "ds_bound",
                &case,
                d,
                bound,
                Verdict::from_bool(d <= bound * (1.0 + ROUNDING)),
            ));
            if sample == 0 {
                let shifted = g.shifted([3, if self.dim == 2 { -5 } else { 0 }]);
                let ds = setup.ds_real(&shifted, s)?;
                rows.push(CheckRow::upper(&suite, "ds_translation_invariance", &case, rel_gap(ds, d), 1e-12));
            }
            let sd = second_difference_outcome(&setup, &g, &norms);
            rows.push(CheckRow::new(
                &suite,
                "second_difference_bound",
                &case,
                sd.lhs,
                sd.rhs,
                Verdict::from_bool(sd.passed),
            ));
        }
        Ok(AppendixReport { rows, ds_constant: c_s, second_difference_constant: c_2 })
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Gap relative to the largest entry of the family, so entries that vanish
/// by symmetry do not inflate it.
fn abs_gap(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AppendixReport {
    pub rows: Vec<CheckRow>,
    pub ds_constant: f64,
    pub second_difference_constant: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup(dim: usize, n: usize, alpha: f64) -> AppendixSetup {
        let g = Grid::periodic(dim, n).unwrap();
        let shape = make_domain_shape(dim, PI / 4.0, 16).unwrap();
        let p = KernelParams::new(alpha, 1.0, PI / 4.0).unwrap();
        AppendixSetup::new(&g, &shape, &p, if dim == 1 { 6 } else { 2 }).unwrap()
    }

    #[test]
    fn directions_are_taken_modulo_sign() {
        assert_eq!(setup(1, 32, 1.0).directions().len(), 1);
        assert_eq!(setup(2, 16, 1.0).directions().len(), 8);
    }

    #[test]
    fn one_dimensional_symbol_matches_a_direct_integral() {
        // ∫_{-r0}^{r0} h(|z|)(2 - 2cos kz)/|z|^{1+s} dz by an independent
        // substitution z = r0 t^2 on [0, 1].
        let st = setup(1, 32, 1.0);
        let s = 0.8;
        let r0 = PI / 4.0;
        let (t, w) = crate::domain::gauss_legendre(200);
        for k in [1i64, 4] {
            let mut direct = 0.0;
            for (ti, wi) in t.iter().zip(&w) {
                let u = 0.5 * (ti + 1.0);
                let z = r0 * u * u;
                let q = z / r0;
                let bump = (1.0 - 1.0 / (1.0 - q * q)).exp();
                let f = bump * (2.0 - 2.0 * (k as f64 * z).cos()) / z.powf(1.0 + s);
                direct += 2.0 * f * 0.5 * wi * 2.0 * r0 * u;
            }
            let got = st.ds_symbol([k, 0], s);
            assert!((got - direct).abs() < 1e-5 * direct, "k {k}: {got} vs {direct}");
        }
    }

    #[test]
    fn constants_vanish_on_constants() {
        let st = setup(2, 16, 1.2);
        let g = Field::constant(st.grid(), 1, 2.0);
        assert_eq!(st.ds_real(&g, 1.2).unwrap(), 0.0);
        assert!(st.second_difference_real(&g).unwrap().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn paths_agree_on_a_two_dimensional_mode() {
        let st = setup(2, 16, 1.2);
        let grid = st.grid().clone();
        let g = Field::scalar_from_fn(&grid, |x| (x[0] + 2.0 * x[1]).cos() + 0.3 * (x[1] - x[0]).sin());
        let a = st.ds_real(&g, 1.2).unwrap();
        let b = st.ds_fourier(&g, 1.2).unwrap();
        assert!((a - b).abs() < 1e-8 * b, "{a} {b}");
        let a = st.second_difference_real(&g).unwrap();
        let b = st.second_difference_fourier(&g).unwrap();
        let scale = b.iter().flatten().copied().fold(0.0, f64::max);
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            assert!((x - y).abs() < 1e-8 * scale, "{x} {y} {scale}");
        }
    }

    #[test]
    fn majorant_dominates_every_symbol() {
        let st = setup(2, 16, 0.7);
        for k in [[1, 0], [1, 1], [2, -1]] {
            let m = st.second_difference_majorant(k);
            for &theta in st.directions() {
                for idx in st.index_choices() {
                    assert!(st.second_difference_symbol(k, theta, idx).abs() <= m);
                }
            }
        }
    }

    #[test]
    fn seminorm_is_translation_invariant() {
        let g = Grid::periodic(1, 32).unwrap();
        let shape = make_domain_shape(1, PI / 4.0, 16).unwrap();
        let p = KernelParams::new(1.0, 1.0, PI / 4.0).unwrap();
        let f = random::trig_polynomial(&g, &mut random::seeded(9), 5);
        let a = ds_seminorm(&f, 1.0, &shape, &p).unwrap();
        let b = ds_seminorm(&f.shifted([7, 0]), 1.0, &shape, &p).unwrap();
        assert!((a - b).abs() <= 1e-13 * a);
    }

    #[test]
    fn one_dimensional_suite_passes() {
        let p = KernelParams::new(1.0, 1.0, PI / 4.0).unwrap();
        let mut suite = AppendixSuite::new(1, p, 5);
        suite.samples = 5;
        let report = suite.run().unwrap();
        for r in &report.rows {
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        }
    }
}
