//! Vanishing-viscosity study: runs with decreasing `ε` against the inviscid
//! run on common initial data.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{SimConfig, SimState, Solver, Trajectory};
use crate::grid::Field;
use crate::harness::{CheckRow, Verdict};

/// Accepted range of the observed order of `dist(ε, 0)` in `ε`.
pub const ORDER_RANGE: (f64, f64) = (0.7, 1.3);

/// `(∫ |f|²)^{1/2}` over the torus, summed over components.
pub fn l2_distance(a: &Field, b: &Field) -> f64 {
    a.sub(b).l2_norm() * a.grid().volume().sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViscosityRun {
    pub epsilon: f64,
    /// Final state, or the error message of an aborted run.
    pub outcome: std::result::Result<SimState, String>,
}

/// Distances between the final states of two runs.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceRow {
    pub eps_a: f64,
    pub eps_b: f64,
    /// `None` when either run aborted.
    pub u: Option<f64>,
    pub rho: Option<f64>,
}

impl DistanceRow {
    fn between(a: &ViscosityRun, b: &ViscosityRun) -> Self {
        let (u, rho) = match (&a.outcome, &b.outcome) {
            (Ok(x), Ok(y)) => (Some(l2_distance(&x.u, &y.u)), Some(l2_distance(&x.rho, &y.rho))),
            _ => (None, None),
        };
        DistanceRow {
            eps_a: a.epsilon,
            eps_b: b.epsilon,
            u,
            rho,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViscosityReport {
    pub horizon: f64,
    /// Runs in decreasing `ε`, the inviscid run last.
    pub runs: Vec<ViscosityRun>,
    pub consecutive: Vec<DistanceRow>,
    pub against_inviscid: Vec<DistanceRow>,
    /// Least-squares slope of `log dist(ε, 0)` against `log ε`, for `u` and `ρ`.
    pub order_u: Option<f64>,
    pub order_rho: Option<f64>,
}

impl ViscosityReport {
    pub fn aborted(&self) -> bool {
        self.runs.iter().any(|r| r.outcome.is_err())
    }

    /// Distances to the inviscid run shrink with `ε`, for both fields.
    pub fn monotone(&self) -> bool {
        let ok = |f: fn(&DistanceRow) -> Option<f64>| -> bool {
            let d: Option<Vec<f64>> = self
                .against_inviscid
                .iter()
                .filter(|r| r.eps_a > 0.0)
                .map(f)
                .collect();
            match d {
                Some(d) => d.windows(2).all(|w| w[1] < w[0]),
                None => false,
            }
        };
        ok(|r| r.u) && ok(|r| r.rho)
    }

    /// Hard checks: no aborted run, distances to the inviscid run decreasing
    /// with `ε`, and the observed order inside [`ORDER_RANGE`].
    pub fn checks(&self) -> Vec<CheckRow> {
        const SUITE: &str = "viscosity";
        let mut rows = Vec::new();
        for r in &self.runs {
            let case = format!("eps={:e}", r.epsilon);
            let aborted = r.outcome.is_err() as u8 as f64;
            rows.push(CheckRow::upper(SUITE, "completed", case, aborted, 0.0));
        }
        let viscous: Vec<&DistanceRow> = self.against_inviscid.iter().filter(|r| r.eps_a > 0.0).collect();
        for w in viscous.windows(2) {
            let case = format!("eps={:e} vs {:e}", w[1].eps_a, w[0].eps_a);
            for (name, f) in [("monotone_u", [w[0].u, w[1].u]), ("monotone_rho", [w[0].rho, w[1].rho])] {
                rows.push(match (f[0], f[1]) {
                    (Some(prev), Some(next)) => CheckRow::upper(SUITE, name, case.clone(), next, prev)
                        .with_verdict(Verdict::from_bool(next < prev)),
                    _ => CheckRow::new(SUITE, name, case.clone(), f64::NAN, f64::NAN, Verdict::Fail),
                });
            }
        }
        for (name, order) in [("order_u", self.order_u), ("order_rho", self.order_rho)] {
            let v = order.unwrap_or(f64::NAN);
            rows.push(CheckRow::lower(SUITE, name, "lower", v, ORDER_RANGE.0));
            rows.push(CheckRow::upper(SUITE, name, "upper", v, ORDER_RANGE.1));
        }
        rows
    }

    pub fn csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "aborted".to_string(), |x| format!("{x:.16e}"));
        let mut out = String::from("kind,eps_a,eps_b,dist_u,dist_rho\n");
        for (kind, rows) in [("consecutive", &self.consecutive), ("inviscid", &self.against_inviscid)] {
            for r in rows {
                out.push_str(&format!(
                    "{kind},{:.16e},{:.16e},{},{}\n",
                    r.eps_a,
                    r.eps_b,
                    fmt(r.u),
                    fmt(r.rho)
                ));
            }
        }
        for r in &self.runs {
            if let Err(e) = &r.outcome {
                out.push_str(&format!("aborted,{:.16e},,,{}\n", r.epsilon, e.replace(',', ";")));
            }
        }
        out.push_str(&format!("order,,,{},{}\n", fmt(self.order_u), fmt(self.order_rho)));
        out
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs `config` to `horizon` for every `ε` in `epsilons` (plus `ε = 0` when
/// absent) and tabulates the distances between the final states.
pub fn viscosity_convergence_study(config: &SimConfig, epsilons: &[f64], horizon: f64) -> Result<ViscosityReport> {
    if epsilons.len() < 2 {
        return Err(Error::arg(format!(
            "viscosity study needs at least two epsilon values, got {}",
            epsilons.len()
        )));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return Err(Error::arg(format!("epsilon values must be finite and >= 0, got {e}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::arg(format!("study horizon must be positive, got {horizon}")));
    }
    let mut eps: Vec<f64> = epsilons.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    if eps.last() != Some(&0.0) {
        eps.push(0.0);
    }
    let configs: Vec<SimConfig> = eps
        .iter()
        .map(|&e| SimConfig {
            epsilon: e,
            t_final: horizon,
            output_interval: horizon,
            ..config.clone()
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let runs: Vec<ViscosityRun> = configs
        .into_par_iter()
        .map(|c| {
            let epsilon = c.epsilon;
            let outcome = Solver::new(c)
                .and_then(|s| {
                    let init = s.initial_state()?;
                    s.run(init, &mut Trajectory::default())
                })
                .map_err(|e| e.to_string());
            ViscosityRun { epsilon, outcome }
        })
        .collect();

    let consecutive = runs.windows(2).map(|w| DistanceRow::between(&w[0], &w[1])).collect();
    let inviscid = runs.last().expect("inviscid run present");
    let against_inviscid: Vec<DistanceRow> = runs[..runs.len() - 1]
        .iter()
        .map(|r| DistanceRow::between(r, inviscid))
        .collect();
    let order = |f: fn(&DistanceRow) -> Option<f64>| -> Option<f64> {
        let pts: Option<Vec<(f64, f64)>> = against_inviscid
            .iter()
            .filter(|r| r.eps_a > 0.0)
            .map(|r| f(r).map(|d| (r.eps_a, d)))
            .collect();
        log_log_slope(&pts?)
    };
    let order_u = order(|r| r.u);
    let order_rho = order(|r| r.rho);
    Ok(ViscosityReport {
        horizon,
        runs,
        consecutive,
        against_inviscid,
        order_u,
        order_rho,
    })
}
