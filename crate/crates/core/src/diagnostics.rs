//! Monitored quantities along a trajectory.

use crate::error::{Error, Result};
use crate::evolution::{SimState, Solver};
use crate::grid::Field;
use crate::kernel::KernelCache;
use crate::operator::{self, StencilRule};
use crate::spectral;

/// `e = ∇·u + L_φ ρ`.
pub fn e_field(state: &SimState, cache: &KernelCache, stencil: &StencilRule) -> Result<Field> {
    let div = spectral::divergence(&state.u)?;
    let l_rho = operator::apply_l_phi(&state.rho, &state.rho, cache, stencil)?;
    Ok(div.axpy(1.0, &l_rho))
}

/// Normalised residual of the one-dimensional law `e_t + (ue)_x = 0` from
/// three states spaced by `dt`:
/// `‖(e⁺ - e⁻)/(2dt) + ∂_x(u e)‖ / ‖e‖`, with `u` and `e` at the middle state.
pub fn e_transport_residual(e_prev: &Field, e_mid: &Field, e_next: &Field, u_mid: &Field, dt: f64) -> Result<f64> {
    let grid = e_mid.grid();
    if grid.dim() != 1 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    if !(dt > 0.0) {
        return Err(Error::arg("time spacing must be positive"));
    }
    let flux = Field::from_components(
        grid,
        vec![u_mid
            .component(0)
            .iter()
            .zip(e_mid.component(0))
            .map(|(u, e)| u * e)
            .collect()],
    )?;
    let dflux = spectral::spectral_derivative(&flux, 0, 1)?;
    let res = Field::lincomb(1.0 / (2.0 * dt), &e_next.sub(e_prev), 1.0, &dflux);
    Ok(res.l2_norm() / (e_mid.l2_norm() + f64::MIN_POSITIVE))
}

/// Takes two extra steps of size `dt` from `state` and evaluates the
/// transport residual centred on the first of them.
pub fn transport_residual_probe(solver: &Solver, state: &SimState, dt: f64) -> Result<f64> {
    if state.grid().dim() != 1 {
        return Err(Error::UnsupportedDimension(state.grid().dim()));
    }
    let s1 = solver.step(state, dt)?;
    let s2 = solver.step(&s1, dt)?;
    let e = |s: &SimState| -> Result<Field> {
        let cache = solver.build_cache(&s.rho)?;
        e_field(s, &cache, solver.stencil())
    };
    e_transport_residual(&e(state)?, &e(&s1)?, &e(&s2)?, &s1.u, dt)
}

/// `Y_m = ‖u‖²_{Ḣ^{m+1}} + ‖e‖²_{Ḣ^m} + ‖ρ‖²_{Ḣ^m} + max ρ + 1/min ρ`.
pub fn grand_quantity(state: &SimState, e: &Field, m: u32) -> Result<f64> {
    let lo = state.rho.min();
    if !(lo > 0.0) {
        return Err(Error::Vacuum {
            value: lo,
            floor: 0.0,
            location: "grand quantity".into(),
        });
    }
    let m = m as f64;
    let su = spectral::sobolev_seminorm(&state.u, m + 1.0);
    let se = spectral::sobolev_seminorm(e, m);
    let sr = spectral::sobolev_seminorm(&state.rho, m);
    Ok(su * su + se * se + sr * sr + state.rho.max() + 1.0 / lo)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentMetrics {
    /// `ū = ∫ρu / ∫ρ`.
    pub mean_velocity: Vec<f64>,
    /// `‖u - ū‖_∞` over all components.
    pub deviation_sup: f64,
    /// `max u_c - min u_c` per component.
    pub amplitude: Vec<f64>,
}

pub fn alignment_metrics(state: &SimState) -> AlignmentMetrics {
    let mass = state.mass();
    let mean_velocity: Vec<f64> = state.momentum().iter().map(|p| p / mass).collect();
    let mut deviation_sup: f64 = 0.0;
    let mut amplitude = Vec::with_capacity(mean_velocity.len());
    for (c, ubar) in state.u.components().iter().zip(&mean_velocity) {
        let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        amplitude.push(hi - lo);
        deviation_sup = deviation_sup.max((hi - ubar).abs()).max((lo - ubar).abs());
    }
    AlignmentMetrics {
        mean_velocity,
        deviation_sup,
        amplitude,
    }
}

/// One row of the diagnostics stream.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub rho_min: f64,
    pub rho_max: f64,
    pub amplitude: Vec<f64>,
    pub alignment_sup: f64,
    pub mean_velocity: Vec<f64>,
    pub e_l2: f64,
    pub e_transport_residual: Option<f64>,
    pub grand: Vec<(u32, f64)>,
    pub dirichlet_u: f64,
    /// `min ρ · (1 + t)`.
    pub connectivity: f64,
}

impl DiagnosticsRecord {
    pub fn compute(
        state: &SimState,
        cache: &KernelCache,
        stencil: &StencilRule,
        m_list: &[u32],
        e_transport_residual: Option<f64>,
    ) -> Result<Self> {
        let e = e_field(state, cache, stencil)?;
        let align = alignment_metrics(state);
        let grand = m_list
            .iter()
            .map(|&m| grand_quantity(state, &e, m).map(|y| (m, y)))
            .collect::<Result<Vec<_>>>()?;
        let rho_min = state.rho.min();
        Ok(DiagnosticsRecord {
            t: state.t,
            mass: state.mass(),
            momentum: state.momentum(),
            rho_min,
            rho_max: state.rho.max(),
            amplitude: align.amplitude,
            alignment_sup: align.deviation_sup,
            mean_velocity: align.mean_velocity,
            e_l2: e.l2_norm(),
            e_transport_residual,
            grand,
            dirichlet_u: operator::dirichlet_form(&state.u, &state.rho, cache, stencil)?,
            connectivity: rho_min * (1.0 + state.t),
        })
    }

    pub fn csv_header(dim: usize, m_list: &[u32]) -> String {
        let mut cols = vec!["t".to_string(), "mass".to_string()];
        cols.extend((1..=dim).map(|c| format!("momentum_{c}")));
        cols.push("rho_min".into());
        cols.push("rho_max".into());
        cols.extend((1..=dim).map(|c| format!("amplitude_{c}")));
        cols.push("alignment_sup".into());
        cols.extend((1..=dim).map(|c| format!("mean_velocity_{c}")));
        cols.push("e_l2".into());
        cols.push("e_transport_residual".into());
        cols.extend(m_list.iter().map(|m| format!("Y_{m}")));
        cols.push("dirichlet_u".into());
        cols.push("connectivity".into());
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let f = |v: f64| format!("{v:.16e}");
        let mut cols = vec![f(self.t), f(self.mass)];
        cols.extend(self.momentum.iter().map(|&v| f(v)));
        cols.push(f(self.rho_min));
        cols.push(f(self.rho_max));
        cols.extend(self.amplitude.iter().map(|&v| f(v)));
        cols.push(f(self.alignment_sup));
        cols.extend(self.mean_velocity.iter().map(|&v| f(v)));
        cols.push(f(self.e_l2));
        cols.push(self.e_transport_residual.map(f).unwrap_or_default());
        cols.extend(self.grand.iter().map(|&(_, y)| f(y)));
        cols.push(f(self.dirichlet_u));
        cols.push(f(self.connectivity));
        cols.join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_domain_shape, DEFAULT_VACUUM_FLOOR};
    use crate::evolution::SimConfig;
    use crate::grid::Grid;
    use crate::kernel::{build_kernel_cache, KernelParams};
    use crate::random;
    use rustfft::num_complex::Complex64;
    use std::f64::consts::PI;

    fn tools(g: &Grid, rho: &Field, tau: f64) -> (KernelCache, StencilRule) {
        let p = KernelParams::new(1.0, tau, 0.7).unwrap();
        let st = StencilRule::new(g, p.r0).unwrap();
        let shape = make_domain_shape(g.dim(), PI / 4.0, 16).unwrap();
        let cache = build_kernel_cache(rho, &shape, &p, &st, DEFAULT_VACUUM_FLOOR).unwrap();
        (cache, st)
    }

    #[test]
    fn e_field_examples() {
        let g = Grid::periodic(1, 64).unwrap();
        let one = Field::constant(&g, 1, 1.0);
        let (cache, st) = tools(&g, &one, 1.0);
        let rest = SimState::new(one.clone(), Field::zeros(&g, 1), 0.0).unwrap();
        assert!(e_field(&rest, &cache, &st).unwrap().max_abs() < 1e-14);
        let k = 3.0;
        let s = SimState::new(one.clone(), Field::scalar_from_fn(&g, |x| (k * x[0]).sin()), 0.0).unwrap();
        let e = e_field(&s, &cache, &st).unwrap();
        let exact = Field::scalar_from_fn(&g, |x| k * (k * x[0]).cos());
        assert!(e.sub(&exact).max_abs() < 1e-12);

        let rho = Field::scalar_from_fn(&g, |x| 1.0 + 0.1 * (2.0 * x[0]).cos());
        let (cache, st) = tools(&g, &rho, 1.0);
        let s = SimState::new(rho.clone(), Field::zeros(&g, 1), 0.0).unwrap();
        let e = e_field(&s, &cache, &st).unwrap();
        let l = operator::apply_l_phi(&rho, &rho, &cache, &st).unwrap();
        assert_eq!(e, l);
    }

    #[test]
    fn metric_e_field_matches_multiplier() {
        let g = Grid::periodic(1, 64).unwrap();
        let one = Field::constant(&g, 1, 1.0);
        let (cache, st) = tools(&g, &one, 0.0);
        let rho = Field::scalar_from_fn(&g, |x| 1.0 + 0.2 * (2.0 * x[0]).cos());
        let (cache_r, st_r) = tools(&g, &rho, 0.0);
        let u = Field::scalar_from_fn(&g, |x| x[0].sin());
        let s = SimState::new(rho.clone(), u.clone(), 0.0).unwrap();
        let e = e_field(&s, &cache_r, &st_r).unwrap();
        // τ = 0: the kernel ignores ρ, so L_φ acts as the frozen multiplier.
        let m2 = -operator::apply_l_phi(&Field::scalar_from_fn(&g, |x| (2.0 * x[0]).cos()), &one, &cache, &st)
            .unwrap()
            .component(0)[0];
        let expected = Field::scalar_from_fn(&g, |x| x[0].cos() - 0.2 * m2 * (2.0 * x[0]).cos());
        assert!(e.sub(&expected).max_abs() < 1e-12);
    }

    #[test]
    fn residual_rejects_two_dimensions() {
        let g = Grid::periodic(2, 8).unwrap();
        let f = Field::zeros(&g, 1);
        assert!(matches!(
            e_transport_residual(&f, &f, &f, &Field::zeros(&g, 2), 0.1),
            Err(Error::UnsupportedDimension(2))
        ));
    }

    #[test]
    fn manufactured_transport_residual() {
        // e(t, x) = e0(x - c t) solves e_t + (c e)_x = 0.
        let g = Grid::periodic(1, 64).unwrap();
        let c = 0.5;
        let dt = 1e-4;
        let e_at = |t: f64| Field::scalar_from_fn(&g, |x| (x[0] - c * t).cos() + 0.5 * (2.0 * (x[0] - c * t)).sin());
        let u = Field::constant(&g, 1, c);
        let r = e_transport_residual(&e_at(-dt), &e_at(0.0), &e_at(dt), &u, dt).unwrap();
        assert!(r <= 1e-8, "residual {r:e}");
        let zero = Field::constant(&g, 1, 0.0);
        assert_eq!(e_transport_residual(&zero, &zero, &zero, &zero, dt).unwrap(), 0.0);
    }

    #[test]
    fn grand_quantity_examples() {
        let g = Grid::periodic(1, 32).unwrap();
        let rest = SimState::new(Field::constant(&g, 1, 1.0), Field::zeros(&g, 1), 0.0).unwrap();
        assert!((grand_quantity(&rest, &Field::zeros(&g, 1), 2).unwrap() - 2.0).abs() < 1e-15);

        let mut rng = random::seeded(9);
        let rho = random::trig_polynomial(&g, &mut rng, 5).map(|v| 3.0 + 0.1 * v);
        let u = random::trig_polynomial(&g, &mut rng, 6);
        let e = random::trig_polynomial(&g, &mut rng, 7);
        let s = SimState::new(rho.clone(), u.clone(), 0.0).unwrap();
        for m in 0..3u32 {
            let y = grand_quantity(&s, &e, m).unwrap();
            // Brute-force DFT, one mode at a time.
            let brute = |f: &Field, s_exp: f64| -> f64 {
                let n = g.len();
                let mut total = 0.0;
                for k in 0..n {
                    let kk = g.wavenumber(k) as f64;
                    if kk == 0.0 {
                        continue;
                    }
                    let mut c = Complex64::new(0.0, 0.0);
                    for (j, v) in f.component(0).iter().enumerate() {
                        let a = -2.0 * PI * (k * j) as f64 / n as f64;
                        c += Complex64::new(a.cos(), a.sin()) * v;
                    }
                    c /= n as f64;
                    total += kk.abs().powf(2.0 * s_exp) * c.norm_sqr();
                }
                total
            };
            let mf = m as f64;
            let expected = brute(&u, mf + 1.0) + brute(&e, mf) + brute(&rho, mf) + rho.max() + 1.0 / rho.min();
            assert!((y - expected).abs() <= 1e-12 * expected, "m={m}");
        }
        let doubled = SimState::new(rho.clone(), u.map(|v| 2.0 * v), 0.0).unwrap();
        let su = spectral::sobolev_seminorm(&u, 2.0).powi(2);
        let diff = grand_quantity(&doubled, &e, 1).unwrap() - grand_quantity(&s, &e, 1).unwrap();
        assert!((diff - 3.0 * su).abs() <= 1e-10 * su);
    }

    #[test]
    fn grand_quantity_seminorms_grow_with_m() {
        let g = Grid::periodic(1, 32).unwrap();
        let mut rng = random::seeded(4);
        let rho = random::trig_polynomial(&g, &mut rng, 4).map(|v| 5.0 + 0.1 * v);
        let u = random::trig_polynomial(&g, &mut rng, 4);
        let e = random::trig_polynomial(&g, &mut rng, 4);
        let s = SimState::new(rho, u, 0.0).unwrap();
        let ys: Vec<f64> = (0..4).map(|m| grand_quantity(&s, &e, m).unwrap()).collect();
        for w in ys.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn alignment_examples() {
        let g = Grid::periodic(1, 32).unwrap();
        let s = SimState::new(Field::scalar_from_fn(&g, |x| 1.0 + 0.3 * x[0].cos()), Field::constant(&g, 1, 0.4), 0.0).unwrap();
        let a = alignment_metrics(&s);
        assert!((a.mean_velocity[0] - 0.4).abs() < 1e-15);
        assert!(a.deviation_sup < 1e-15);
        let s = SimState::new(Field::constant(&g, 1, 1.0), Field::scalar_from_fn(&g, |x| x[0].sin()), 0.0).unwrap();
        let a = alignment_metrics(&s);
        assert!(a.mean_velocity[0].abs() < 1e-15);
        let grid_max = s.u.max_abs();
        assert!((a.deviation_sup - grid_max).abs() < 1e-15);
        assert!(a.deviation_sup <= a.amplitude.iter().sum::<f64>());
    }

    #[test]
    fn csv_row_matches_header() {
        let cfg = SimConfig {
            points_per_axis: 32,
            ..SimConfig::default()
        };
        let solver = Solver::new(cfg).unwrap();
        let s = solver.initial_state().unwrap();
        let cache = solver.build_cache(&s.rho).unwrap();
        let rec = DiagnosticsRecord::compute(&s, &cache, solver.stencil(), &[0, 1], None).unwrap();
        let header = DiagnosticsRecord::csv_header(1, &[0, 1]);
        let row = rec.csv_row();
        assert_eq!(header.split(',').count(), row.split(',').count());
        assert!(header.starts_with("t,mass,momentum_1,rho_min"));
        assert!(rec.mass > 0.0 && rec.rho_min <= rec.rho_max);
        let residual = transport_residual_probe(&solver, &s, 1e-4).unwrap();
        assert!(residual.is_finite() && residual >= 0.0);
    }
}
