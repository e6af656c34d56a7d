//! Quadrature over the cutoff ball `|z| < r0` for integrands with an
//! integrable singularity at `z = 0`.

use std::f64::consts::PI;

use crate::domain::gauss_legendre;
use crate::error::{Error, Result};

/// Composite Gauss rule on `[0, r0]` with panels refined geometrically
/// towards the origin: breakpoints `r0 q^j`, `j = 0..=panels`. The innermost
/// panel `[0, a]` uses `r = a u²`, which absorbs singularities up to `r^{-1/2}`.
pub fn graded_radial_rule(r0: f64, panels: usize, points: usize, ratio: f64) -> Vec<(f64, f64)> {
    let (t, w) = gauss_legendre(points);
    let edges: Vec<f64> = (0..=panels).map(|j| r0 * ratio.powi(j as i32)).collect();
    let mut nodes = Vec::with_capacity((panels + 1) * points);
    let a = edges[panels];
    for (ti, wi) in t.iter().zip(&w) {
        let u = 0.5 * (ti + 1.0);
        nodes.push((a * u * u, wi * a * u));
    }
    for pair in edges.windows(2).rev() {
        let (b, a) = (pair[0], pair[1]);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (ti, wi) in t.iter().zip(&w) {
            nodes.push((mid + half * ti, half * wi));
        }
    }
    nodes
}

/// A node `z` of the ball rule with its weight (Jacobian included).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallNode {
    pub z: [f64; 2],
    pub r: f64,
    pub weight: f64,
}

/// Rule for `∫_{|z|<r0} F(z) dz` in dimension `dim`, closed under `z -> -z`.
///
/// Nodes come in consecutive pairs `(z, -z)`. In two dimensions the angle
/// uses the trapezoid rule with `angles` points (even), exact for the
/// trigonometric polynomials that arise from band-limited data.
pub fn ball_rule(dim: usize, r0: f64, radial: &[(f64, f64)], angles: usize) -> Result<Vec<BallNode>> {
    match dim {
        1 => Ok(radial
            .iter()
            .flat_map(|&(r, w)| {
                [
                    BallNode { z: [r, 0.0], r, weight: w },
                    BallNode { z: [-r, 0.0], r, weight: w },
                ]
            })
            .collect()),
        2 => {
            if angles == 0 || !angles.is_multiple_of(2) {
                return Err(Error::arg("angular rule needs an even number of points"));
            }
            let dphi = 2.0 * PI / angles as f64;
            let mut nodes = Vec::with_capacity(radial.len() * angles);
            for &(r, w) in radial {
                for a in 0..angles / 2 {
                    let phi = a as f64 * dphi;
                    let z = [r * phi.cos(), r * phi.sin()];
                    let weight = w * r * dphi;
                    nodes.push(BallNode { z, r, weight });
                    nodes.push(BallNode { z: [-z[0], -z[1]], r, weight });
                }
            }
            debug_assert!(radial.iter().all(|&(r, _)| r <= r0));
            Ok(nodes)
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}
