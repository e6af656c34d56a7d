//! Seeded random test families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Field, Grid};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real trigonometric polynomial with zero mean and Gaussian-like
/// coefficients on the modes `0 < max_j |k_j| <= max_mode`.
pub fn trig_polynomial(grid: &Grid, rng: &mut impl Rng, max_mode: i64) -> Field {
    let s = grid.k_scale();
    let k1_range = if grid.dim() == 2 { max_mode } else { 0 };
    let mut terms = Vec::new();
    for k0 in 0..=max_mode {
        for k1 in -k1_range..=k1_range {
            if k0 == 0 && k1 <= 0 {
                continue;
            }
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            terms.push(([k0 as f64, k1 as f64], a, b));
        }
    }
    Field::scalar_from_fn(grid, |x| {
        terms
            .iter()
            .map(|(k, a, b)| {
                let arg = s * (k[0] * x[0] + k[1] * x[1]);
                a * arg.cos() + b * arg.sin()
            })
            .sum()
    })
}
