//! Fourier transforms and multipliers on periodic grids.
//!
//! Coefficients are normalised by `1/N^n`, so `f̂(0)` is the mean of `f` and
//! `Σ_{k≠0} |f̂(k)|^2 = (1/L^n) ∫ |f - f̄|^2`. With this convention
//! `‖f‖²_{Ḣ^s} = Σ_{k≠0} |k|^{2s} |f̂(k)|^2`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let forward = direction == FftDirection::Forward;
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((n, forward))
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction))
        .clone()
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

fn fft_in_place(grid: &Grid, buf: &mut [Complex64], direction: FftDirection) {
    let n = grid.points_per_axis();
    let fft = plan(n, direction);
    // process() walks the buffer in chunks of n: every row along the last axis.
    fft.process(buf);
    if grid.dim() == 2 {
        transpose(buf, n);
        fft.process(buf);
        transpose(buf, n);
    }
}

/// Normalised forward transform of one real component.
pub fn forward(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    debug_assert_eq!(values.len(), grid.len());
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(grid, &mut buf, FftDirection::Forward);
    let scale = 1.0 / grid.len() as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Inverse of [`forward`]; the imaginary part is discarded.
pub fn inverse(grid: &Grid, modes: &[Complex64]) -> Vec<f64> {
    debug_assert_eq!(modes.len(), grid.len());
    let mut buf = modes.to_vec();
    fft_in_place(grid, &mut buf, FftDirection::Inverse);
    buf.into_iter().map(|c| c.re).collect()
}

/// Fourier coefficients of a real scalar function on a grid.
#[derive(Clone, Debug)]
pub struct SpectralCoefficients {
    grid: Grid,
    modes: Vec<Complex64>,
}

impl SpectralCoefficients {
    pub fn of(grid: &Grid, values: &[f64]) -> Self {
        SpectralCoefficients {
            grid: grid.clone(),
            modes: forward(grid, values),
        }
    }

    pub fn of_field(f: &Field, component: usize) -> Self {
        SpectralCoefficients::of(f.grid(), f.component(component))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    /// Coefficient of the integer wavevector `k` (|k_j| ≤ N/2).
    pub fn coefficient(&self, k: [i64; 2]) -> Complex64 {
        let n = self.grid.points_per_axis() as i64;
        let i0 = k[0].rem_euclid(n) as usize;
        let idx = if self.grid.dim() == 1 {
            i0
        } else {
            self.grid.flatten([i0, k[1].rem_euclid(n) as usize])
        };
        self.modes[idx]
    }

    pub fn to_values(&self) -> Vec<f64> {
        inverse(&self.grid, &self.modes)
    }

    /// Largest `max_j |k_j|` carrying a coefficient above `tol`.
    pub fn bandwidth(&self, tol: f64) -> i64 {
        self.modes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > tol)
            .map(|(i, _)| {
                let k = self.grid.wavevector(i);
                k[0].abs().max(k[1].abs())
            })
            .max()
            .unwrap_or(0)
    }

    /// Evaluates the trigonometric interpolant at an arbitrary point. Nyquist
    /// bins are read as cosines so the interpolant stays real.
    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        let scale = self.grid.k_scale();
        let mut sum = 0.0;
        for (i, c) in self.modes.iter().enumerate() {
            let k = self.grid.wavevector(i);
            let arg = scale * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
            if is_nyquist(&self.grid, k) {
                sum += c.re * arg.cos();
            } else {
                sum += c.re * arg.cos() - c.im * arg.sin();
            }
        }
        sum
    }

    /// Samples `g(x + shift)` at every grid point by exact trigonometric
    /// interpolation (phase shift of every mode).
    pub fn translated(&self, shift: [f64; 2]) -> Vec<f64> {
        let grid = &self.grid;
        let scale = grid.k_scale();
        let n = grid.points_per_axis();
        let phase = |axis: usize| -> Vec<Complex64> {
            (0..n)
                .map(|i| {
                    let k = grid.wavenumber(i) as f64;
                    let a = scale * k * shift[axis];
                    if i == n / 2 {
                        Complex64::new(a.cos(), 0.0)
                    } else {
                        Complex64::new(a.cos(), a.sin())
                    }
                })
                .collect()
        };
        let p0 = phase(0);
        let mut modes = self.modes.clone();
        if grid.dim() == 1 {
            for (m, p) in modes.iter_mut().zip(&p0) {
                *m *= p;
            }
        } else {
            let p1 = phase(1);
            for (row, a) in modes.chunks_mut(n).zip(&p0) {
                for (m, b) in row.iter_mut().zip(&p1) {
                    *m *= a * b;
                }
            }
        }
        inverse(grid, &modes)
    }
}

fn is_nyquist(grid: &Grid, k: [i64; 2]) -> bool {
    let half = (grid.points_per_axis() / 2) as i64;
    k[0] == half || (grid.dim() == 2 && k[1] == half)
}

/// Applies a Fourier multiplier `m(k_int)` to one real component.
pub fn apply_multiplier(grid: &Grid, values: &[f64], mult: impl Fn([i64; 2]) -> Complex64) -> Vec<f64> {
    let mut modes = forward(grid, values);
    for (i, c) in modes.iter_mut().enumerate() {
        *c *= mult(grid.wavevector(i));
    }
    inverse(grid, &modes)
}

fn map_components(f: &Field, op: impl Fn(&[f64]) -> Vec<f64>) -> Field {
    let comps = f.components().iter().map(|c| op(c)).collect();
    Field::from_components_unchecked(f.grid(), comps)
}

/// Physical `|k|^2` of an integer wavevector.
pub fn k_squared(grid: &Grid, k: [i64; 2]) -> f64 {
    let s = grid.k_scale();
    let a = s * k[0] as f64;
    let b = s * k[1] as f64;
    a * a + b * b
}

/// `∂^order f / ∂x_axis^order` via the multiplier `(i k_axis)^order`. The
/// Nyquist mode is dropped for odd orders.
pub fn spectral_derivative(f: &Field, axis: usize, order: u32) -> Result<Field> {
    let grid = f.grid();
    if axis >= grid.dim() {
        return Err(Error::arg(format!(
            "axis {axis} out of range for a {}-dimensional grid",
            grid.dim()
        )));
    }
    if order == 0 {
        return Err(Error::arg("derivative order must be at least 1"));
    }
    let half = (grid.points_per_axis() / 2) as i64;
    let scale = grid.k_scale();
    let unit = match order % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    Ok(map_components(f, |v| {
        apply_multiplier(grid, v, |k| {
            if order % 2 == 1 && k[axis].abs() == half {
                Complex64::new(0.0, 0.0)
            } else {
                unit * (scale * k[axis] as f64).powi(order as i32)
            }
        })
    }))
}

/// `Σ_a ∂_a f_a` for a field with one component per axis.
pub fn divergence(f: &Field) -> Result<Field> {
    let grid = f.grid();
    if f.n_components() != grid.dim() {
        return Err(Error::arg("divergence needs one component per axis"));
    }
    let mut out = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        let comp = Field::from_components_unchecked(grid, vec![f.component(axis).to_vec()]);
        let d = spectral_derivative(&comp, axis, 1)?;
        for (o, v) in out.iter_mut().zip(d.component(0)) {
            *o += v;
        }
    }
    Ok(Field::from_components_unchecked(grid, vec![out]))
}

/// Homogeneous seminorm `‖f‖_{Ḣ^s}`, summed over components.
pub fn sobolev_seminorm(f: &Field, s: f64) -> f64 {
    let grid = f.grid();
    let mut total = 0.0;
    for c in f.components() {
        let modes = forward(grid, c);
        for (i, m) in modes.iter().enumerate() {
            let k = grid.wavevector(i);
            if k == [0, 0] {
                continue;
            }
            let k2 = k_squared(grid, k);
            let w = if s == 0.0 { 1.0 } else { k2.powf(s) };
            total += w * m.norm_sqr();
        }
    }
    total.sqrt()
}

/// Untruncated fractional Laplacian with multiplier `-|k|^alpha`.
pub fn fractional_laplacian(f: &Field, alpha: f64) -> Result<Field> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::arg(format!("alpha must lie in (0,2), got {alpha}")));
    }
    let grid = f.grid();
    Ok(map_components(f, |v| {
        apply_multiplier(grid, v, |k| {
            Complex64::new(-k_squared(grid, k).powf(alpha / 2.0), 0.0)
        })
    }))
}

/// `e^{ν dt Δ} f`: every mode is damped by `exp(-ν |k|^2 dt)`.
pub fn heat_semigroup(f: &Field, nu: f64, dt: f64) -> Result<Field> {
    if nu < 0.0 || dt < 0.0 {
        return Err(Error::arg("heat semigroup needs nu >= 0 and dt >= 0"));
    }
    Ok(heat_factor(f, nu * dt))
}

/// Heat multiplier with an arbitrary signed exponent `nu_t = ν t`. Negative
/// values run the heat flow backwards and are only used inside the
/// integrating-factor stages of the time stepper.
pub(crate) fn heat_factor(f: &Field, nu_t: f64) -> Field {
    if nu_t == 0.0 {
        return f.clone();
    }
    let grid = f.grid();
    map_components(f, |v| {
        apply_multiplier(grid, v, |k| Complex64::new((-nu_t * k_squared(grid, k)).exp(), 0.0))
    })
}

/// Two-thirds rule: zeroes every mode with some `|k_j| > N/3`.
pub fn dealias(grid: &Grid, values: &[f64]) -> Vec<f64> {
    let cutoff = grid.points_per_axis() as i64 / 3;
    apply_multiplier(grid, values, |k| {
        if k[0].abs() > cutoff || k[1].abs() > cutoff {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid1(n: usize) -> Grid {
        Grid::periodic(1, n).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn derivative_of_single_mode() {
        let g = grid1(64);
        let f = Field::scalar_from_fn(&g, |x| (3.0 * x[0]).sin());
        let d = spectral_derivative(&f, 0, 1).unwrap();
        let exact: Vec<f64> = (0..64).map(|i| 3.0 * (3.0 * g.coords(i)[0]).cos()).collect();
        assert!(max_diff(d.component(0), &exact) <= 1e-10);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = Grid::periodic(2, 16).unwrap();
        let f = Field::constant(&g, 1, 4.2);
        for axis in 0..2 {
            for order in 1..4 {
                let d = spectral_derivative(&f, axis, order).unwrap();
                assert!(d.max_abs() < 1e-13);
            }
        }
    }

    #[test]
    fn derivative_rejects_bad_axis() {
        let g = grid1(16);
        let f = Field::zeros(&g, 1);
        assert!(matches!(spectral_derivative(&f, 1, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn odd_derivative_drops_nyquist() {
        let g = grid1(16);
        let f = Field::scalar_from_fn(&g, |x| (8.0 * x[0]).cos());
        assert!(spectral_derivative(&f, 0, 1).unwrap().max_abs() < 1e-12);
        let d2 = spectral_derivative(&f, 0, 2).unwrap();
        assert!((d2.component(0)[0] + 64.0).abs() < 1e-9);
    }

    #[test]
    fn derivative_of_random_trig_polynomial_matches_termwise_sum() {
        // Analytic oracle: differentiate a known mode list term by term.
        let g = grid1(128);
        let modes: Vec<(f64, f64, f64)> = (1..=32)
            .map(|k| {
                let k = k as f64;
                ((0.37 * k).sin(), (1.3 * k).cos() / k, k)
            })
            .collect();
        let f = Field::scalar_from_fn(&g, |x| {
            modes.iter().map(|(a, b, k)| a * (k * x[0]).cos() + b * (k * x[0]).sin()).sum()
        });
        let exact: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.coords(i)[0];
                modes
                    .iter()
                    .map(|(a, b, k)| -a * k * (k * x).sin() + b * k * (k * x).cos())
                    .sum()
            })
            .collect();
        let d = spectral_derivative(&f, 0, 1).unwrap();
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_diff(d.component(0), &exact) / scale <= 1e-10);
    }

    #[test]
    fn seminorm_single_and_two_mode() {
        let g = grid1(64);
        let f = Field::scalar_from_fn(&g, |x| (3.0 * x[0]).sin());
        let expected = 9.0 * (0.5f64).sqrt();
        assert!((sobolev_seminorm(&f, 2.0) - expected).abs() <= 1e-12 * expected);
        let f = Field::scalar_from_fn(&g, |x| x[0].sin() + (4.0 * x[0]).sin());
        let expected = (0.5 + 16.0 * 0.5f64).sqrt();
        assert!((sobolev_seminorm(&f, 1.0) - expected).abs() <= 1e-12 * expected);
        let c = Field::constant(&g, 1, 3.0);
        assert_eq!(sobolev_seminorm(&c, 1.5), 0.0);
    }

    #[test]
    fn fractional_laplacian_single_mode_and_constant() {
        let g = grid1(32);
        let f = Field::scalar_from_fn(&g, |x| (2.0 * x[0]).cos());
        let lf = fractional_laplacian(&f, 1.0).unwrap();
        let expected = f.map(|v| -2.0 * v);
        assert!(max_diff(lf.component(0), expected.component(0)) < 1e-12);
        let c = Field::constant(&g, 1, 2.0);
        assert!(fractional_laplacian(&c, 0.7).unwrap().max_abs() < 1e-14);
        assert!(fractional_laplacian(&c, 2.0).is_err());
    }

    #[test]
    fn heat_semigroup_examples() {
        let g = grid1(32);
        let f = Field::scalar_from_fn(&g, |x| 1.0 + x[0].sin());
        assert_eq!(heat_semigroup(&f, 0.0, 3.0).unwrap(), f);
        let h = heat_semigroup(&f, 1.0, 1.0).unwrap();
        let expected = Field::scalar_from_fn(&g, |x| 1.0 + (-1.0f64).exp() * x[0].sin());
        assert!(max_diff(h.component(0), expected.component(0)) < 1e-14);
        assert!((h.mean(0) - f.mean(0)).abs() < 1e-15);
        assert!(heat_semigroup(&f, -1.0, 1.0).is_err());
    }

    #[test]
    fn translation_by_whole_cells_matches_index_shift() {
        let g = Grid::periodic(2, 16).unwrap();
        let f = Field::scalar_from_fn(&g, |x| (x[0] + 2.0 * x[1]).sin() + (3.0 * x[0]).cos());
        let coeffs = SpectralCoefficients::of_field(&f, 0);
        let h = g.spacing();
        let t = coeffs.translated([2.0 * h, -h]);
        let s = f.shifted([2, -1]);
        assert!(max_diff(&t, s.component(0)) < 1e-12);
        let x = [0.3f64, 1.7];
        let direct = (x[0] + 2.0 * x[1]).sin() + (3.0 * x[0]).cos();
        assert!((coeffs.evaluate(x) - direct).abs() < 1e-12);
    }

    fn random_field(dim: usize, n: usize, seed: &[f64]) -> Field {
        let g = Grid::periodic(dim, n).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|i| seed[i % seed.len()] * (1.0 + (i as f64 * 0.37).sin()))
            .collect();
        Field::scalar(&g, vals).unwrap()
    }

    proptest! {
        #[test]
        fn parseval_and_mean_split(seed in prop::collection::vec(-2.0f64..2.0, 1..9), two_d in any::<bool>()) {
            let f = random_field(if two_d { 2 } else { 1 }, 16, &seed);
            let g = f.grid();
            let modes = forward(g, f.component(0));
            let lhs: f64 = f.component(0).iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
            let rhs: f64 = modes.iter().map(|c| c.norm_sqr()).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300));
            let s0 = sobolev_seminorm(&f, 0.0);
            let mean = f.mean(0);
            prop_assert!((s0 * s0 + mean * mean - lhs).abs() <= 1e-12 * lhs.max(1e-300));
            let back = inverse(g, &modes);
            let scale = f.max_abs().max(1e-300);
            prop_assert!(max_diff(&back, f.component(0)) <= 1e-12 * scale);
        }

        #[test]
        fn derivative_commutes_with_heat(a in -1.0f64..1.0, b in -1.0f64..1.0, nu_dt in 0.0f64..0.05) {
            let g = Grid::periodic(2, 16).unwrap();
            let f = Field::scalar_from_fn(&g, |x| a * (x[0] + x[1]).sin() + b * (3.0 * x[1]).cos() + (2.0 * x[0]).sin());
            let lhs = spectral_derivative(&heat_semigroup(&f, 1.0, nu_dt).unwrap(), 1, 1).unwrap();
            let rhs = heat_semigroup(&spectral_derivative(&f, 1, 1).unwrap(), 1.0, nu_dt).unwrap();
            let scale = rhs.max_abs().max(1e-300);
            prop_assert!(max_diff(lhs.component(0), rhs.component(0)) <= 1e-11 * scale);
        }

        #[test]
        fn half_laplacian_energy_identity(seed in prop::collection::vec(-1.0f64..1.0, 1..7), alpha in 0.1f64..1.9) {
            let f = random_field(1, 32, &seed);
            let half = fractional_laplacian(&f, alpha / 2.0).unwrap();
            let lhs = sobolev_seminorm(&half, 0.0);
            let rhs = sobolev_seminorm(&f, alpha / 2.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn hermitian_symmetry(seed in prop::collection::vec(-1.0f64..1.0, 1..7)) {
            let f = random_field(2, 8, &seed);
            let c = SpectralCoefficients::of_field(&f, 0);
            for k0 in -3i64..=3 {
                for k1 in -3i64..=3 {
                    let a = c.coefficient([k0, k1]);
                    let b = c.coefficient([-k0, -k1]).conj();
                    prop_assert!((a - b).norm() <= 1e-14);
                }
            }
        }
    }
}
