//! Communication domains `Ω(x, y)` and the topological quasi-distance.
//!
//! `Ω(x, y) = m + (|x - y| / 2) U Ω_0`, where `m` is the midpoint of the pair
//! and `U` rotates `e1` onto the direction `y - x`. The images of `±e1` are
//! then exactly `x` and `y`. In one dimension `Ω_0 = [-1, 1]`; in two it is the
//! circular lens through `±e1` with tip half-angle `β`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const DEFAULT_VACUUM_FLOOR: f64 = 1e-8;
pub const DEFAULT_LENS_HALF_ANGLE: f64 = PI / 4.0;
pub const MIN_QUAD_POINTS: usize = 16;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
///
/// Nodes are mirrored so that `x[n-1-i] = -x[i]` holds exactly.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi's estimate of the i-th largest root, then Newton.
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let step = p / d;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        if 2 * i + 1 == n {
            z = 0.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (z * p - p0) / (z * z - 1.0);
    (p, d)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainKind {
    Interval,
    Lens,
}

/// The reference domain `Ω_0 = Ω(-e1, e1)` with a quadrature rule.
#[derive(Clone, Debug)]
pub struct DomainShape {
    dim: usize,
    kind: DomainKind,
    lens_half_angle: f64,
    quadrature: Vec<([f64; 2], f64)>,
    reference_area: f64,
}

/// Closed-form area of the lens through `±e1` with tip half-angle `beta`.
pub fn lens_area(beta: f64) -> f64 {
    let s = beta.sin();
    2.0 * (beta - s * beta.cos()) / (s * s)
}

pub fn make_domain_shape(dim: usize, lens_half_angle: f64, quad_points: usize) -> Result<DomainShape> {
    match dim {
        1 => Ok(DomainShape {
            dim,
            kind: DomainKind::Interval,
            lens_half_angle: 0.0,
            // The interval is integrated exactly by the accumulator; the
            // two-point rule only records the endpoints' symmetric weights.
            quadrature: vec![([-1.0, 0.0], 1.0), ([1.0, 0.0], 1.0)],
            reference_area: 2.0,
        }),
        2 => {
            let beta = lens_half_angle;
            if !(beta > 0.0 && beta < PI / 2.0) {
                return Err(Error::arg(format!(
                    "lens half-angle must lie in (0, pi/2), got {beta}"
                )));
            }
            if quad_points < MIN_QUAD_POINTS {
                return Err(Error::arg(format!(
                    "lens quadrature needs at least {MIN_QUAD_POINTS} points per axis, got {quad_points}"
                )));
            }
            let (t, w) = gauss_legendre(quad_points);
            let mut quadrature = Vec::with_capacity(quad_points * quad_points);
            for (&xa, &wa) in t.iter().zip(&w) {
                let half = lens_half_height(beta, xa);
                for (&tb, &wb) in t.iter().zip(&w) {
                    quadrature.push(([xa, half * tb], wa * wb * half));
                }
            }
            Ok(DomainShape {
                dim,
                kind: DomainKind::Lens,
                lens_half_angle: beta,
                quadrature,
                reference_area: lens_area(beta),
            })
        }
        _ => Err(Error::arg(format!("domain dimension must be 1 or 2, got {dim}"))),
    }
}

/// Half-height of the lens above `x ∈ [-1, 1]`: the upper arc belongs to the
/// circle of radius `1/sin β` centred at `(0, -cot β)`.
fn lens_half_height(beta: f64, x: f64) -> f64 {
    let r = 1.0 / beta.sin();
    let c = beta.cos() / beta.sin();
    ((r * r - x * x).max(0.0)).sqrt() - c
}

impl DomainShape {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn lens_half_angle(&self) -> f64 {
        self.lens_half_angle
    }

    pub fn quadrature(&self) -> &[([f64; 2], f64)] {
        &self.quadrature
    }

    pub fn reference_area(&self) -> f64 {
        self.reference_area
    }

    /// Points on `∂Ω_0`, closed under negation and containing `±e1`.
    ///
    /// In two dimensions: eight points on the upper arc (starting at `e1`)
    /// followed by their negatives.
    pub fn boundary_points(&self) -> Vec<[f64; 2]> {
        match self.kind {
            DomainKind::Interval => vec![[1.0, 0.0], [-1.0, 0.0]],
            DomainKind::Lens => {
                let beta = self.lens_half_angle;
                let r = 1.0 / beta.sin();
                let c = beta.cos() / beta.sin();
                let upper: Vec<[f64; 2]> = (0..8)
                    .map(|j| {
                        if j == 0 {
                            return [1.0, 0.0];
                        }
                        let phi = PI / 2.0 - beta + 2.0 * beta * j as f64 / 8.0;
                        [r * phi.cos(), -c + r * phi.sin()]
                    })
                    .collect();
                let lower: Vec<[f64; 2]> = upper.iter().map(|p| [-p[0], -p[1]]).collect();
                upper.into_iter().chain(lower).collect()
            }
        }
    }

    /// Maps a reference point into `Ω(x, y)` for the offset `d = y - x`
    /// measured from the midpoint.
    fn map_from_midpoint(&self, d: [f64; 2], xi: [f64; 2]) -> [f64; 2] {
        let r = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let (e0, e1) = (d[0] / r, d[1] / r);
        let s = 0.5 * r;
        [s * (e0 * xi[0] - e1 * xi[1]), s * (e1 * xi[0] + e0 * xi[1])]
    }
}

/// Density data prepared for repeated `Ω`-mass queries.
///
/// In one dimension this holds the running integral of the piecewise-linear
/// interpolant of `ρ`; in two it samples `ρ` bilinearly.
#[derive(Clone, Debug)]
pub struct DensityAccumulator {
    grid: Grid,
    rho: Vec<f64>,
    prefix: Vec<f64>,
    floor: f64,
}

impl DensityAccumulator {
    pub fn new(rho: &Field, floor: f64) -> Result<Self> {
        if rho.n_components() != 1 {
            return Err(Error::arg("density must be a scalar field"));
        }
        check_vacuum(rho, floor)?;
        let grid = rho.grid().clone();
        let values = rho.component(0).to_vec();
        let prefix = if grid.dim() == 1 {
            let h = grid.spacing();
            let n = grid.points_per_axis();
            // Two laps, so arcs starting anywhere in the first lap need no wrap.
            let mut p = Vec::with_capacity(2 * n + 1);
            let mut acc = 0.0;
            p.push(0.0);
            for i in 0..n {
                acc += 0.5 * h * (values[i] + values[(i + 1) % n]);
                p.push(acc);
            }
            for i in 1..=n {
                p.push(p[i] + acc);
            }
            p
        } else {
            Vec::new()
        };
        Ok(DensityAccumulator {
            grid,
            rho: values,
            prefix,
            floor,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    /// Total mass of the periodic interpolant (1D only).
    fn total(&self) -> f64 {
        self.prefix[self.grid.points_per_axis()]
    }

    /// Mass of the cell-aligned arc from node `i` to node `i + cells`,
    /// `cells <= N`.
    pub fn arc_mass_cells(&self, i: usize, cells: usize) -> f64 {
        self.prefix[i + cells] - self.prefix[i]
    }

    /// `∫_0^x ρ` for the periodic interpolant, `x` in `[0, ∞)`.
    fn antiderivative(&self, x: f64) -> f64 {
        let n = self.grid.points_per_axis();
        let h = self.grid.spacing();
        let l = self.grid.period();
        let laps = (x / l).floor();
        let xr = x - laps * l;
        let cell = ((xr / h).floor() as usize).min(n - 1);
        let s = (xr - cell as f64 * h) / h;
        let a = self.rho[cell];
        let b = self.rho[(cell + 1) % n];
        laps * self.total() + self.prefix[cell] + h * (a * s + 0.5 * (b - a) * s * s)
    }

    /// Bilinear interpolant of `ρ` at an arbitrary point (2D).
    pub fn sample(&self, p: [f64; 2]) -> f64 {
        let n = self.grid.points_per_axis();
        let h = self.grid.spacing();
        let nf = n as f64;
        let u = snap((p[0] / h).rem_euclid(nf)) % nf;
        let v = snap((p[1] / h).rem_euclid(nf)) % nf;
        let i0 = (u.floor() as usize).min(n - 1);
        let j0 = (v.floor() as usize).min(n - 1);
        let fu = u - i0 as f64;
        let fv = v - j0 as f64;
        let i1 = (i0 + 1) % n;
        let j1 = (j0 + 1) % n;
        let r = |i: usize, j: usize| self.rho[i * n + j];
        (1.0 - fu) * ((1.0 - fv) * r(i0, j0) + fv * r(i0, j1)) + fu * ((1.0 - fv) * r(i1, j0) + fv * r(i1, j1))
    }
}

/// Rounds grid coordinates that miss a node only by division rounding.
fn snap(u: f64) -> f64 {
    let r = u.round();
    if (u - r).abs() <= 1e-12 * (1.0 + r) {
        r
    } else {
        u
    }
}

fn check_vacuum(rho: &Field, floor: f64) -> Result<()> {
    let values = rho.component(0);
    if let Some((i, &v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= floor))
    {
        let x = rho.grid().coords(i);
        let location = if rho.grid().dim() == 1 {
            format!("x = {:.6}", x[0])
        } else {
            format!("x = ({:.6}, {:.6})", x[0], x[1])
        };
        return Err(Error::Vacuum {
            value: v,
            floor,
            location,
        });
    }
    Ok(())
}

/// Canonical ordering of a pair: the returned start point sees the other
/// point at a lexicographically positive minimal-image offset. Both
/// argument orders therefore produce identical arithmetic.
fn canonical_pair(grid: &Grid, x: [f64; 2], y: [f64; 2]) -> Result<([f64; 2], [f64; 2])> {
    let mut d = [grid.min_image(y[0] - x[0]), 0.0];
    if grid.dim() == 2 {
        d[1] = grid.min_image(y[1] - x[1]);
    }
    if d == [0.0, 0.0] {
        return Err(Error::DegeneratePair);
    }
    let positive = d[0] > 0.0 || (d[0] == 0.0 && d[1] > 0.0);
    if positive {
        Ok((x, d))
    } else {
        Ok((y, [-d[0], -d[1]]))
    }
}

/// `∫_{Ω(x,y)} ρ`.
pub fn omega_mass(acc: &DensityAccumulator, shape: &DomainShape, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
    let grid = &acc.grid;
    if shape.dim != grid.dim() {
        return Err(Error::arg("domain shape and density grid differ in dimension"));
    }
    let (start, d) = canonical_pair(grid, x, y)?;
    if grid.dim() == 1 {
        let a = start[0].rem_euclid(grid.period());
        return Ok(acc.antiderivative(a + d[0]) - acc.antiderivative(a));
    }
    let mid = [start[0] + 0.5 * d[0], start[1] + 0.5 * d[1]];
    let r = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let scale = 0.25 * r * r;
    let mut sum = 0.0;
    for &(xi, w) in &shape.quadrature {
        let p = shape.map_from_midpoint(d, xi);
        sum += w * acc.sample([mid[0] + p[0], mid[1] + p[1]]);
    }
    Ok(scale * sum)
}

/// `d(x, y) = (∫_{Ω(x,y)} ρ)^{1/n}`.
pub fn topo_distance(acc: &DensityAccumulator, shape: &DomainShape, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
    let mass = omega_mass(acc, shape, x, y)?;
    mass_to_distance(mass, acc.grid.dim(), acc.floor, x)
}

pub(crate) fn mass_to_distance(mass: f64, dim: usize, floor: f64, x: [f64; 2]) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(Error::Vacuum {
            value: mass,
            floor,
            location: format!("communication domain at ({:.6}, {:.6})", x[0], x[1]),
        });
    }
    Ok(if dim == 1 { mass } else { mass.sqrt() })
}

/// Sparse stencil expressing `∫_{Ω(x_i, x_i + z h)} ρ` as a weighted sum of
/// `ρ(x_i + s h)` over integer offsets `s`, valid for every grid point `i`
/// (2D bilinear sampling of the quadrature nodes).
pub fn lens_mass_stencil(grid: &Grid, shape: &DomainShape, z: [i64; 2]) -> Vec<([i64; 2], f64)> {
    use std::collections::BTreeMap;
    let h = grid.spacing();
    let d = [z[0] as f64 * h, z[1] as f64 * h];
    let r2 = d[0] * d[0] + d[1] * d[1];
    let scale = 0.25 * r2;
    let mut acc: BTreeMap<[i64; 2], f64> = BTreeMap::new();
    for &(xi, w) in &shape.quadrature {
        let p = shape.map_from_midpoint(d, xi);
        let u = (0.5 * d[0] + p[0]) / h;
        let v = (0.5 * d[1] + p[1]) / h;
        let (i0, j0) = (u.floor(), v.floor());
        let (fu, fv) = (u - i0, v - j0);
        let (i0, j0) = (i0 as i64, j0 as i64);
        let ww = scale * w;
        *acc.entry([i0, j0]).or_default() += ww * (1.0 - fu) * (1.0 - fv);
        *acc.entry([i0, j0 + 1]).or_default() += ww * (1.0 - fu) * fv;
        *acc.entry([i0 + 1, j0]).or_default() += ww * fu * (1.0 - fv);
        *acc.entry([i0 + 1, j0 + 1]).or_default() += ww * fu * fv;
    }
    acc.into_iter().filter(|(_, w)| *w != 0.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 31] {
            let (x, w) = gauss_legendre(n);
            let sum: f64 = w.iter().sum();
            assert!((sum - 2.0).abs() < 1e-13, "n={n} sum={sum}");
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
            for i in 0..n {
                assert_eq!(x[i], -x[n - 1 - i]);
                assert_eq!(w[i], w[n - 1 - i]);
            }
        }
    }

    #[test]
    fn interval_shape() {
        let s = make_domain_shape(1, 0.0, 16).unwrap();
        assert_eq!(s.reference_area(), 2.0);
        assert_eq!(s.boundary_points(), vec![[1.0, 0.0], [-1.0, 0.0]]);
    }

    #[test]
    fn lens_area_and_quadrature() {
        let beta = PI / 4.0;
        assert!((lens_area(beta) - (PI - 2.0)).abs() < 1e-15);
        // Independent check: area = 2 * ∫_{-1}^{1} (sqrt(2 - x^2) - 1) dx.
        let exact = 2.0 * (1.0 + 2.0 * (1.0 / 2f64.sqrt()).asin() - 2.0);
        assert!((lens_area(beta) - exact).abs() < 1e-14);
        let s = make_domain_shape(2, beta, 16).unwrap();
        let total: f64 = s.quadrature().iter().map(|q| q.1).sum();
        assert!((total - lens_area(beta)).abs() <= 1e-8 * lens_area(beta));
        for &(p, w) in s.quadrature() {
            assert!(w > 0.0);
            assert!(p[0] * p[0] + p[1] * p[1] <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn lens_rejects_bad_angle_and_small_rule() {
        assert!(matches!(make_domain_shape(2, 0.0, 16), Err(Error::Argument(_))));
        assert!(matches!(make_domain_shape(2, PI / 2.0, 16), Err(Error::Argument(_))));
        assert!(make_domain_shape(2, 0.5, 8).is_err());
        assert!(make_domain_shape(3, 0.5, 16).is_err());
    }

    #[test]
    fn lens_nodes_are_negation_symmetric() {
        for beta in [0.3, PI / 4.0, 1.2] {
            let s = make_domain_shape(2, beta, 17).unwrap();
            let q = s.quadrature();
            for &(p, w) in q {
                let found = q.iter().any(|&(r, v)| r == [-p[0], -p[1]] && v == w);
                assert!(found, "no mirror for {p:?}");
            }
            let b = s.boundary_points();
            assert_eq!(b.len(), 16);
            assert!(b.contains(&[1.0, 0.0]) && b.contains(&[-1.0, 0.0]));
            let r = 1.0 / beta.sin();
            let c = beta.cos() / beta.sin();
            for p in &b[..8] {
                let on_arc = (p[0] * p[0] + (p[1] + c) * (p[1] + c)).sqrt();
                assert!((on_arc - r).abs() < 1e-12);
            }
        }
    }

    fn acc1(n: usize, f: impl Fn(f64) -> f64) -> DensityAccumulator {
        let g = Grid::periodic(1, n).unwrap();
        DensityAccumulator::new(&Field::scalar_from_fn(&g, |x| f(x[0])), DEFAULT_VACUUM_FLOOR).unwrap()
    }

    #[test]
    fn uniform_interval_masses() {
        let shape = make_domain_shape(1, 0.0, 16).unwrap();
        let acc = acc1(64, |_| 1.0);
        let m = omega_mass(&acc, &shape, [0.0, 0.0], [0.5, 0.0]).unwrap();
        assert!((m - 0.5).abs() < 1e-14);
        let d = topo_distance(&acc, &shape, [1.0, 0.0], [1.3, 0.0]).unwrap();
        assert!((d - 0.3).abs() < 1e-14);
        let acc2 = acc1(64, |_| 2.0);
        let d = topo_distance(&acc2, &shape, [6.0, 0.0], [6.5, 0.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-13);
    }

    #[test]
    fn cosine_density_arc_matches_antiderivative() {
        let shape = make_domain_shape(1, 0.0, 16).unwrap();
        let exact = PI / 2.0 + 0.5;
        for n in [64, 256, 1024] {
            let acc = acc1(n, |x| 1.0 + 0.5 * x.cos());
            let m = omega_mass(&acc, &shape, [0.0, 0.0], [PI / 2.0, 0.0]).unwrap();
            let h = 2.0 * PI / n as f64;
            // Trapezoid error of 0.5 cos over [0, π/2]: h^2/12 * 0.5 * (sin(π/2) - sin 0).
            assert!((m - exact).abs() <= h * h / 24.0 * 1.01 + 1e-14, "n={n} err={}", m - exact);
        }
    }

    #[test]
    fn prefix_path_matches_riemann_sum_and_wraps() {
        let shape = make_domain_shape(1, 0.0, 16).unwrap();
        let n = 128;
        let acc = acc1(n, |x| 1.3 + (2.0 * x).sin() * 0.4);
        let h = acc.grid().spacing();
        let rho = acc.values().to_vec();
        for (i, cells) in [(0usize, 5usize), (120, 20), (64, 1)] {
            let direct: f64 = (0..cells)
                .map(|k| 0.5 * h * (rho[(i + k) % n] + rho[(i + k + 1) % n]))
                .sum();
            assert!((acc.arc_mass_cells(i, cells) - direct).abs() <= 1e-12);
            let m = omega_mass(&acc, &shape, acc.grid().coords(i), acc.grid().coords((i + cells) % n)).unwrap();
            assert!((m - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_and_vacuum_errors() {
        let shape = make_domain_shape(1, 0.0, 16).unwrap();
        let acc = acc1(16, |_| 1.0);
        assert!(matches!(
            omega_mass(&acc, &shape, [1.0, 0.0], [1.0, 0.0]),
            Err(Error::DegeneratePair)
        ));
        let g = Grid::periodic(1, 16).unwrap();
        let rho = Field::scalar_from_fn(&g, |x| x[0].cos());
        assert!(matches!(
            DensityAccumulator::new(&rho, DEFAULT_VACUUM_FLOOR),
            Err(Error::Vacuum { .. })
        ));
    }

    #[test]
    fn uniform_lens_mass_scales_quadratically() {
        let shape = make_domain_shape(2, PI / 4.0, 16).unwrap();
        let g = Grid::periodic(2, 32).unwrap();
        let acc = DensityAccumulator::new(&Field::constant(&g, 1, 1.0), 1e-8).unwrap();
        let x = [1.0, 2.0];
        let y = [1.3, 1.6];
        let r: f64 = 0.5;
        let m = omega_mass(&acc, &shape, x, y).unwrap();
        let expected = lens_area(PI / 4.0) * (r / 2.0).powi(2);
        assert!((m - expected).abs() <= 1e-8 * expected);
        let d = topo_distance(&acc, &shape, x, y).unwrap();
        assert!((d - r / 2.0 * lens_area(PI / 4.0).sqrt()).abs() <= 1e-8);
    }

    #[test]
    fn bilinear_sampler_hits_nodes() {
        let g = Grid::periodic(2, 16).unwrap();
        let rho = Field::scalar_from_fn(&g, |x| 2.0 + x[0].sin() * x[1].cos());
        let acc = DensityAccumulator::new(&rho, 1e-8).unwrap();
        for i in 0..g.len() {
            assert_eq!(acc.sample(g.coords(i)), rho.component(0)[i]);
        }
    }

    #[test]
    fn mass_stencil_matches_direct_quadrature() {
        let g = Grid::periodic(2, 32).unwrap();
        let shape = make_domain_shape(2, PI / 4.0, 16).unwrap();
        let rho = Field::scalar_from_fn(&g, |x| 1.5 + 0.5 * (x[0] + 2.0 * x[1]).sin());
        let acc = DensityAccumulator::new(&rho, 1e-8).unwrap();
        for z in [[2i64, 1i64], [0, 3], [-4, 1]] {
            let st = lens_mass_stencil(&g, &shape, z);
            for i in [0usize, 77, 1000] {
                let via_stencil: f64 = st
                    .iter()
                    .map(|(s, w)| w * rho.component(0)[g.shifted(i, *s)])
                    .sum();
                let x = g.coords(i);
                let h = g.spacing();
                let y = [x[0] + z[0] as f64 * h, x[1] + z[1] as f64 * h];
                let direct = omega_mass(&acc, &shape, x, y).unwrap();
                assert!((via_stencil - direct).abs() <= 1e-12 * direct);
            }
        }
    }

    proptest! {
        #[test]
        fn distance_is_exactly_symmetric(
            x0 in 0.0f64..6.28, x1 in 0.0f64..6.28, dx in -0.7f64..0.7, dy in -0.7f64..0.7, two_d in any::<bool>()
        ) {
            prop_assume!(dx.abs() + dy.abs() > 1e-3);
            let dim = if two_d { 2 } else { 1 };
            let g = Grid::periodic(dim, 32).unwrap();
            let rho = Field::scalar_from_fn(&g, |x| 1.2 + 0.6 * x[0].sin() + 0.1 * x[1].cos());
            let acc = DensityAccumulator::new(&rho, 1e-8).unwrap();
            let shape = make_domain_shape(dim, PI / 4.0, 16).unwrap();
            let x = [x0, if two_d { x1 } else { 0.0 }];
            let y = [x0 + dx, if two_d { x1 + dy } else { 0.0 }];
            let a = topo_distance(&acc, &shape, x, y).unwrap();
            let b = topo_distance(&acc, &shape, y, x).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn distance_is_comparable_to_euclidean(
            x0 in 0.0f64..6.28, x1 in 0.0f64..6.28, dx in -0.7f64..0.7, dy in -0.7f64..0.7, two_d in any::<bool>()
        ) {
            prop_assume!(dx.abs() + dy.abs() > 1e-3);
            let dim = if two_d { 2 } else { 1 };
            let g = Grid::periodic(dim, 32).unwrap();
            let rho = Field::scalar_from_fn(&g, |x| 1.0 + 0.5 * x[0].sin() * x[1].cos());
            let (lo, hi) = (rho.min(), rho.max());
            let acc = DensityAccumulator::new(&rho, 1e-8).unwrap();
            let shape = make_domain_shape(dim, PI / 4.0, 16).unwrap();
            let dyv = if two_d { dy } else { 0.0 };
            let x = [x0, if two_d { x1 } else { 0.0 }];
            let y = [x0 + dx, x[1] + dyv];
            let r = (dx * dx + dyv * dyv).sqrt();
            let c = (shape.reference_area() / 2f64.powi(dim as i32)).powf(1.0 / dim as f64);
            let d = topo_distance(&acc, &shape, x, y).unwrap();
            let e = 1.0 / dim as f64;
            prop_assert!(d >= lo.powf(e) * c * r * (1.0 - 1e-8));
            prop_assert!(d <= hi.powf(e) * c * r * (1.0 + 1e-8));
        }
    }
}
