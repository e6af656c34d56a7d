//! Discrete alignment operator `L_φ` and alignment force `C_φ(u, ρ)`.
//!
//! Integrals over `z` are replaced by sums over grid translates `z_j` with
//! `0 < |z_j| <= r0` and weight `h^n`. Offsets are stored as `±z` pairs and
//! every pair is summed before it is accumulated, so for smooth data the pair
//! behaves like a second difference and the singular cell needs no correction.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernel::KernelCache;

/// Grid offsets inside the cutoff ball, interleaved as `[+z_0, -z_0, +z_1, ...]`.
#[derive(Clone, Debug)]
pub struct StencilRule {
    grid: Grid,
    offsets: Vec<[i64; 2]>,
    radii: Vec<f64>,
    weight: f64,
    neighbors: Vec<u32>,
}

impl StencilRule {
    pub fn new(grid: &Grid, r0: f64) -> Result<Self> {
        let h = grid.spacing();
        let reach = (r0 / h).floor() as i64;
        if reach < 1 {
            return Err(Error::arg(format!("cutoff {r0} holds no grid offsets at spacing {h}")));
        }
        if 2 * reach >= grid.points_per_axis() as i64 {
            return Err(Error::arg(format!("cutoff {r0} wraps around the period")));
        }
        let mut half: Vec<([i64; 2], f64)> = Vec::new();
        let span = if grid.dim() == 2 { reach } else { 0 };
        for a in 0..=reach {
            for b in -span..=span {
                if a == 0 && b <= 0 {
                    continue;
                }
                let r = h * ((a * a + b * b) as f64).sqrt();
                if r <= r0 {
                    half.push(([a, b], r));
                }
            }
        }
        // Nearest pairs first; ties broken by the offset itself.
        half.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        let mut offsets = Vec::with_capacity(2 * half.len());
        let mut radii = Vec::with_capacity(half.len());
        for (z, r) in half {
            offsets.push(z);
            offsets.push([-z[0], -z[1]]);
            radii.push(r);
        }
        let width = offsets.len();
        let mut neighbors = vec![0u32; grid.len() * width];
        for i in 0..grid.len() {
            for (j, z) in offsets.iter().enumerate() {
                neighbors[i * width + j] = grid.shifted(i, *z) as u32;
            }
        }
        Ok(StencilRule {
            grid: grid.clone(),
            offsets,
            radii,
            weight: grid.cell_volume(),
            neighbors,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of offsets (twice the number of pairs).
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn pairs(&self) -> usize {
        self.radii.len()
    }

    pub fn offsets(&self) -> &[[i64; 2]] {
        &self.offsets
    }

    pub fn offset(&self, j: usize) -> [i64; 2] {
        self.offsets[j]
    }

    /// `|z|` of pair `p`.
    pub fn radius(&self, p: usize) -> f64 {
        self.radii[p]
    }

    /// Quadrature weight `h^n`, shared by every offset.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Flat index of `x_i + z_j`.
    pub fn neighbor(&self, i: usize, j: usize) -> usize {
        self.neighbors[i * self.offsets.len() + j] as usize
    }

    pub(crate) fn neighbor_row(&self, i: usize) -> &[u32] {
        let w = self.offsets.len();
        &self.neighbors[i * w..(i + 1) * w]
    }
}

fn check(cache: &KernelCache, stencil: &StencilRule, f: &Field) -> Result<()> {
    cache.ensure_stencil(stencil)?;
    if f.grid() != cache.grid() {
        return Err(Error::arg("field and kernel table live on different grids"));
    }
    Ok(())
}

/// `Σ_j w φ(x_i, x_i + z_j) g(i, j)` with the two members of each pair added first.
fn paired_sum(cache: &KernelCache, stencil: &StencilRule, i: usize, g: impl Fn(usize) -> f64) -> f64 {
    let row = cache.row(i);
    let nb = stencil.neighbor_row(i);
    let mut acc = 0.0;
    for p in 0..stencil.pairs() {
        let a = 2 * p;
        let b = a + 1;
        acc += row[a] * g(nb[a] as usize) + row[b] * g(nb[b] as usize);
    }
    stencil.weight * acc
}

fn apply_scalar(values: &[f64], cache: &KernelCache, stencil: &StencilRule) -> Vec<f64> {
    (0..values.len())
        .into_par_iter()
        .map(|i| {
            let fi = values[i];
            paired_sum(cache, stencil, i, |k| values[k] - fi)
        })
        .collect()
}

/// `(L_φ f)(x_i) = Σ_j w φ(x_i, x_i + z_j) (f(x_i + z_j) - f(x_i))`, componentwise.
///
/// `rho` must be the density the cache was built from.
pub fn apply_l_phi(f: &Field, rho: &Field, cache: &KernelCache, stencil: &StencilRule) -> Result<Field> {
    check(cache, stencil, f)?;
    cache.ensure_current(rho)?;
    Ok(apply_unchecked(f, cache, stencil))
}

pub(crate) fn apply_unchecked(f: &Field, cache: &KernelCache, stencil: &StencilRule) -> Field {
    let comps = f
        .components()
        .iter()
        .map(|c| apply_scalar(c, cache, stencil))
        .collect();
    Field::from_components_unchecked(f.grid(), comps)
}

/// `C_φ(u, ρ)(x_i) = Σ_j w φ(x_i, x_i + z_j) δ_{z_j} u(x_i) ρ(x_i + z_j)`.
pub fn apply_c_phi(u: &Field, rho: &Field, cache: &KernelCache, stencil: &StencilRule) -> Result<Field> {
    check(cache, stencil, u)?;
    cache.ensure_current(rho)?;
    Ok(c_phi_unchecked(u, rho, cache, stencil))
}

pub(crate) fn c_phi_unchecked(u: &Field, rho: &Field, cache: &KernelCache, stencil: &StencilRule) -> Field {
    let r = rho.component(0);
    let comps = u
        .components()
        .iter()
        .map(|c| {
            (0..c.len())
                .into_par_iter()
                .map(|i| {
                    let ui = c[i];
                    paired_sum(cache, stencil, i, |k| (c[k] - ui) * r[k])
                })
                .collect()
        })
        .collect();
    Field::from_components_unchecked(u.grid(), comps)
}

/// The same force through the commutator identity `L_φ(uρ) - u L_φ(ρ)`.
pub fn apply_c_phi_identity(u: &Field, rho: &Field, cache: &KernelCache, stencil: &StencilRule) -> Result<Field> {
    check(cache, stencil, u)?;
    cache.ensure_current(rho)?;
    let r = rho.component(0);
    let l_rho = apply_scalar(r, cache, stencil);
    let comps = u
        .components()
        .iter()
        .map(|c| {
            let prod: Vec<f64> = c.iter().zip(r).map(|(a, b)| a * b).collect();
            let l_prod = apply_scalar(&prod, cache, stencil);
            l_prod
                .iter()
                .zip(c)
                .zip(&l_rho)
                .map(|((lp, ui), lr)| lp - ui * lr)
                .collect()
        })
        .collect();
    Ok(Field::from_components_unchecked(u.grid(), comps))
}

/// `(1/2) Σ_{i,j} w φ(x_i, x_i + z_j) |δ_{z_j} f(x_i)|^2 h^n`, summed over components.
pub fn dirichlet_form(f: &Field, rho: &Field, cache: &KernelCache, stencil: &StencilRule) -> Result<f64> {
    check(cache, stencil, f)?;
    cache.ensure_current(rho)?;
    Ok(dirichlet_unchecked(f, cache, stencil))
}

pub(crate) fn dirichlet_unchecked(f: &Field, cache: &KernelCache, stencil: &StencilRule) -> f64 {
    let cell = f.grid().cell_volume();
    let mut total = 0.0;
    for c in f.components() {
        let per_point: Vec<f64> = (0..c.len())
            .into_par_iter()
            .map(|i| {
                let fi = c[i];
                paired_sum(cache, stencil, i, |k| {
                    let d = c[k] - fi;
                    d * d
                })
            })
            .collect();
        total += per_point.iter().sum::<f64>();
    }
    0.5 * total * cell
}

/// `-⟨L_φ f, f⟩ h^n`, the inner-product form of [`dirichlet_form`].
pub fn dirichlet_inner(f: &Field, rho: &Field, cache: &KernelCache, stencil: &StencilRule) -> Result<f64> {
    let lf = apply_l_phi(f, rho, cache, stencil)?;
    let cell = f.grid().cell_volume();
    let mut s = 0.0;
    for (a, b) in lf.components().iter().zip(f.components()) {
        s += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    }
    Ok(-s * cell)
}

/// `max_i Σ_j w φ(x_i, x_i + z_j) ρ(x_i + z_j)`, the largest diagonal of the
/// discrete alignment operator.
pub fn dissipation_rate(rho: &Field, cache: &KernelCache, stencil: &StencilRule) -> f64 {
    let r = rho.component(0);
    (0..r.len())
        .into_par_iter()
        .map(|i| paired_sum(cache, stencil, i, |k| r[k]))
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_domain_shape, DEFAULT_VACUUM_FLOOR};
    use crate::kernel::{build_kernel_cache, KernelParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    struct Setup {
        rho: Field,
        cache: KernelCache,
        st: StencilRule,
    }

    fn setup(rho: Field, alpha: f64, tau: f64, r0: f64) -> Setup {
        let g = rho.grid().clone();
        let shape = make_domain_shape(g.dim(), PI / 4.0, 16).unwrap();
        let p = KernelParams::new(alpha, tau, r0).unwrap();
        let st = StencilRule::new(&g, r0).unwrap();
        let cache = build_kernel_cache(&rho, &shape, &p, &st, DEFAULT_VACUUM_FLOOR).unwrap();
        Setup { rho, cache, st }
    }

    fn rand_vals(g: &Grid, rng: &mut ChaCha8Rng, comps: usize) -> Field {
        let c = (0..comps)
            .map(|_| (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Field::from_components(g, c).unwrap()
    }

    fn oracle_multiplier(st: &StencilRule, p: &KernelParams, k: f64) -> f64 {
        // Independent sum over the positive half, doubled.
        let h = st.grid().spacing();
        let mut m = 0.0;
        for j in (0..st.len()).step_by(2) {
            let z = st.offset(j);
            let r = h * ((z[0] * z[0] + z[1] * z[1]) as f64).sqrt();
            let q = r / p.r0;
            let bump = if q < 1.0 { (1.0 - 1.0 / (1.0 - q * q)).exp() } else { 0.0 };
            m += 2.0 * h * bump * (1.0 - (k * z[0] as f64 * h).cos()) / r.powf(1.0 + p.alpha);
        }
        m
    }

    #[test]
    fn stencil_is_closed_under_negation() {
        let g = Grid::periodic(2, 32).unwrap();
        let st = StencilRule::new(&g, 0.7).unwrap();
        assert_eq!(st.len() % 2, 0);
        for p in 0..st.pairs() {
            let a = st.offset(2 * p);
            assert_eq!(st.offset(2 * p + 1), [-a[0], -a[1]]);
            assert_ne!(a, [0, 0]);
            assert!(st.radius(p) <= 0.7);
        }
        assert!(StencilRule::new(&g, 0.01).is_err());
    }

    #[test]
    fn constants_are_annihilated() {
        let g = Grid::periodic(1, 64).unwrap();
        let s = setup(Field::scalar_from_fn(&g, |x| 1.0 + 0.3 * x[0].sin()), 1.0, 1.0, 0.7);
        let f = Field::constant(&g, 1, 2.5);
        assert_eq!(apply_l_phi(&f, &s.rho, &s.cache, &s.st).unwrap().max_abs(), 0.0);
        assert_eq!(apply_c_phi(&f, &s.rho, &s.cache, &s.st).unwrap().max_abs(), 0.0);
        assert_eq!(dirichlet_form(&f, &s.rho, &s.cache, &s.st).unwrap(), 0.0);
    }

    #[test]
    fn uniform_density_acts_as_multiplier() {
        let g = Grid::periodic(1, 128).unwrap();
        let s = setup(Field::constant(&g, 1, 1.0), 1.0, 1.0, 0.7);
        let p = *s.cache.params();
        for k in [1.0, 3.0, 10.0] {
            let f = Field::scalar_from_fn(&g, |x| (k * x[0]).cos());
            let lf = apply_l_phi(&f, &s.rho, &s.cache, &s.st).unwrap();
            let m = oracle_multiplier(&s.st, &p, k);
            let expected = f.map(|v| -m * v);
            let err = lf.sub(&expected).max_abs();
            assert!(err <= 1e-12 * m.max(1.0), "k={k} err={err}");
            let u = Field::scalar_from_fn(&g, |x| (k * x[0]).sin());
            let cu = apply_c_phi(&u, &s.rho, &s.cache, &s.st).unwrap();
            let expected = u.map(|v| -m * v);
            assert!(cu.sub(&expected).max_abs() <= 1e-12 * m.max(1.0));
        }
    }

    #[test]
    fn quadratic_form_and_identities_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [1, 2] {
            let n = if dim == 1 { 64 } else { 16 };
            let g = Grid::periodic(dim, n).unwrap();
            let s = setup(
                Field::scalar_from_fn(&g, |x| 1.0 + 0.4 * (x[0] + x[1]).sin()),
                1.3,
                dim as f64,
                1.2,
            );
            for _ in 0..100 {
                let f = rand_vals(&g, &mut rng, 1);
                let form = dirichlet_form(&f, &s.rho, &s.cache, &s.st).unwrap();
                let inner = dirichlet_inner(&f, &s.rho, &s.cache, &s.st).unwrap();
                assert!(inner >= 0.0);
                assert!((form - inner).abs() <= 1e-10 * form);
            }
            for _ in 0..10 {
                let u = rand_vals(&g, &mut rng, dim);
                let direct = apply_c_phi(&u, &s.rho, &s.cache, &s.st).unwrap();
                let ident = apply_c_phi_identity(&u, &s.rho, &s.cache, &s.st).unwrap();
                let scale = direct.max_abs();
                assert!(direct.sub(&ident).max_abs() <= 1e-12 * scale);
                let lf = apply_l_phi(&u, &s.rho, &s.cache, &s.st).unwrap();
                for c in 0..dim {
                    let total: f64 = lf.component(c).iter().sum();
                    let scale: f64 = lf.component(c).iter().map(|v| v.abs()).sum();
                    assert!(total.abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn density_scaling_of_form() {
        let g = Grid::periodic(1, 64).unwrap();
        let rho = Field::scalar_from_fn(&g, |x| 1.0 + 0.4 * x[0].sin());
        let a = setup(rho.clone(), 1.0, 1.0, 0.7);
        let b = setup(rho.map(|v| 3.0 * v), 1.0, 1.0, 0.7);
        let f = Field::scalar_from_fn(&g, |x| (2.0 * x[0]).sin() + 0.3 * x[0].cos());
        let fa = dirichlet_form(&f, &a.rho, &a.cache, &a.st).unwrap();
        let fb = dirichlet_form(&f, &b.rho, &b.cache, &b.st).unwrap();
        assert!((fb - fa / 3.0).abs() <= 1e-12 * fa);
    }

    #[test]
    fn stale_density_is_rejected() {
        let g = Grid::periodic(1, 64).unwrap();
        let s = setup(Field::scalar_from_fn(&g, |x| 1.0 + 0.4 * x[0].sin()), 1.0, 1.0, 0.7);
        let other = s.rho.map(|v| v * 1.0001);
        let f = Field::constant(&g, 1, 1.0);
        assert!(matches!(apply_l_phi(&f, &other, &s.cache, &s.st), Err(Error::StaleCache(_))));
        assert!(matches!(apply_c_phi(&f, &other, &s.cache, &s.st), Err(Error::StaleCache(_))));
    }

    #[test]
    fn maximum_point_is_not_pushed_up() {
        let g = Grid::periodic(2, 16).unwrap();
        let s = setup(Field::scalar_from_fn(&g, |x| 1.0 + 0.4 * x[0].cos()), 0.7, 2.0, 1.0);
        let f = Field::scalar_from_fn(&g, |x| (x[0] - 1.0).cos() + (x[1]).sin());
        let lf = apply_l_phi(&f, &s.rho, &s.cache, &s.st).unwrap();
        let (imax, _) = f
            .component(0)
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        assert!(lf.component(0)[imax] <= 0.0);
    }

    #[test]
    fn uniform_density_commutes_with_shifts() {
        let g = Grid::periodic(2, 16).unwrap();
        let s = setup(Field::constant(&g, 1, 1.0), 1.0, 2.0, 1.0);
        let f = Field::scalar_from_fn(&g, |x| (x[0] * 2.0).sin() * x[1].cos() + 0.1 * x[0]);
        let a = apply_l_phi(&f.shifted([3, -5]), &s.rho, &s.cache, &s.st).unwrap();
        let b = apply_l_phi(&f, &s.rho, &s.cache, &s.st).unwrap().shifted([3, -5]);
        assert!(a.sub(&b).max_abs() <= 1e-13 * b.max_abs());
    }

    #[test]
    fn refinement_differences_shrink() {
        let f = |x: [f64; 2]| x[0].sin() + 0.5 * (2.0 * x[0]).cos();
        let rho = |x: [f64; 2]| 1.0 + 0.3 * x[0].cos();
        let mut samples = Vec::new();
        for n in [64usize, 128, 256, 512] {
            let g = Grid::periodic(1, n).unwrap();
            let s = setup(Field::scalar_from_fn(&g, rho), 1.5, 1.0, PI / 4.0);
            let lf = apply_l_phi(&Field::scalar_from_fn(&g, f), &s.rho, &s.cache, &s.st).unwrap();
            // Common points x = j * 2π/64.
            let stride = n / 64;
            samples.push((0..64).map(|j| lf.component(0)[j * stride]).collect::<Vec<f64>>());
        }
        let diffs: Vec<f64> = samples
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .collect();
        assert!(diffs[1] < diffs[0] && diffs[2] < diffs[1], "{diffs:?}");
    }
}
