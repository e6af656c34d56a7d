//! Time integration of the (optionally viscous) topological Euler-alignment
//! system
//!
//! ```text
//! ρ_t + ∇·(ρu) = εΔρ
//! u_t + u·∇u   = C_φ(u, ρ) + εΔu
//! ```
//!
//! Transport and alignment are advanced with the three-stage SSP Runge-Kutta
//! scheme; `εΔ` is integrated exactly through the heat multiplier (Lawson
//! integrating factor). The kernel table is rebuilt from each stage density.

use std::f64::consts::PI;
use std::sync::Mutex;

use crate::domain::{self, DomainShape, DEFAULT_LENS_HALF_ANGLE, DEFAULT_VACUUM_FLOOR};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernel::{KernelBuilder, KernelCache, KernelParams};
use crate::operator::{self, StencilRule};
use crate::spectral;

/// Smooth initial data `ρ0 = 1 + a cos x1 + b cos x2`,
/// `u0 = (c sin x1, d sin x2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialData {
    pub rho_amp: f64,
    pub rho_amp2: f64,
    pub u_amp: f64,
    pub u_amp2: f64,
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData {
            rho_amp: 0.5,
            rho_amp2: 0.0,
            u_amp: 0.2,
            u_amp2: 0.0,
        }
    }
}

impl InitialData {
    pub fn state(&self, grid: &Grid) -> Result<SimState> {
        let s = grid.k_scale();
        let rho = Field::scalar_from_fn(grid, |x| {
            1.0 + self.rho_amp * (s * x[0]).cos() + self.rho_amp2 * (s * x[1]).cos()
        });
        let u = Field::vector_from_fn(grid, grid.dim(), |x, c| {
            if c == 0 {
                self.u_amp * (s * x[0]).sin()
            } else {
                self.u_amp2 * (s * x[1]).sin()
            }
        });
        SimState::new(rho, u, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dim: usize,
    pub points_per_axis: usize,
    pub period: f64,
    pub kernel: KernelParams,
    pub lens_half_angle: f64,
    pub quad_points: usize,
    pub epsilon: f64,
    pub cfl: f64,
    pub t_final: f64,
    /// Fixed step used instead of the CFL estimate.
    pub dt: Option<f64>,
    /// Spacing of diagnostic output times; `0` means initial and final only.
    pub output_interval: f64,
    pub rho_floor: f64,
    pub initial: InitialData,
}

impl Default for SimConfig {
    /// The flagship one-dimensional configuration.
    fn default() -> Self {
        SimConfig {
            dim: 1,
            points_per_axis: 256,
            period: 2.0 * PI,
            kernel: KernelParams {
                alpha: 1.0,
                tau: 1.0,
                r0: PI / 4.0,
                bump: Default::default(),
            },
            lens_half_angle: DEFAULT_LENS_HALF_ANGLE,
            quad_points: domain::MIN_QUAD_POINTS,
            epsilon: 0.0,
            cfl: 0.5,
            t_final: 1.0,
            dt: None,
            output_interval: 0.1,
            rho_floor: DEFAULT_VACUUM_FLOOR,
            initial: InitialData::default(),
        }
    }
}

impl SimConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim, self.points_per_axis, self.period)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.kernel.validate_for(&grid)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::arg(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::arg(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::arg(format!("t_final must be >= 0, got {}", self.t_final)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::arg(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.output_interval >= 0.0 && self.output_interval.is_finite()) {
            return Err(Error::arg("output_interval must be >= 0"));
        }
        if !(self.rho_floor > 0.0 && self.rho_floor.is_finite()) {
            return Err(Error::arg("rho_floor must be positive"));
        }
        let rho_min = self.initial.state(&grid)?.rho.min();
        if !(rho_min > self.rho_floor) {
            return Err(Error::arg(format!(
                "initial density reaches vacuum: min rho = {rho_min:e} is not above rho_floor = {:e}",
                self.rho_floor
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub rho: Field,
    pub u: Field,
    pub t: f64,
}

impl SimState {
    pub fn new(rho: Field, u: Field, t: f64) -> Result<Self> {
        if rho.n_components() != 1 {
            return Err(Error::arg("density must have one component"));
        }
        if u.grid() != rho.grid() {
            return Err(Error::arg("density and velocity live on different grids"));
        }
        if u.n_components() != rho.grid().dim() {
            return Err(Error::arg("velocity needs one component per axis"));
        }
        Ok(SimState { rho, u, t })
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    /// `Σ ρ h^n`.
    pub fn mass(&self) -> f64 {
        self.rho.integral(0)
    }

    /// `Σ ρ u_c h^n` per component.
    pub fn momentum(&self) -> Vec<f64> {
        let cell = self.grid().cell_volume();
        let r = self.rho.component(0);
        self.u
            .components()
            .iter()
            .map(|c| c.iter().zip(r).map(|(u, r)| u * r).sum::<f64>() * cell)
            .collect()
    }

    fn check_finite(&self) -> Result<()> {
        if !self.rho.is_finite() {
            return Err(Error::BlowUp {
                t: self.t,
                field: "rho".into(),
            });
        }
        if !self.u.is_finite() {
            return Err(Error::BlowUp {
                t: self.t,
                field: "u".into(),
            });
        }
        Ok(())
    }
}

/// Receives the state at every output time.
pub trait RunObserver {
    fn on_output(&mut self, solver: &Solver, state: &SimState, cache: &KernelCache) -> Result<()>;

    /// Called with the last accepted state when a step fails.
    fn on_abort(&mut self, _state: &SimState, _error: &Error) -> Result<()> {
        Ok(())
    }
}

/// Collects output states in memory.
#[derive(Default)]
pub struct Trajectory {
    pub states: Vec<SimState>,
}

impl RunObserver for Trajectory {
    fn on_output(&mut self, _: &Solver, state: &SimState, _: &KernelCache) -> Result<()> {
        self.states.push(state.clone());
        Ok(())
    }
}

pub struct Solver {
    config: SimConfig,
    grid: Grid,
    shape: DomainShape,
    stencil: StencilRule,
    builder: KernelBuilder,
    scratch: Mutex<Option<KernelCache>>,
}

impl Solver {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        let shape = domain::make_domain_shape(grid.dim(), config.lens_half_angle, config.quad_points)?;
        let stencil = StencilRule::new(&grid, config.kernel.r0)?;
        let builder = KernelBuilder::new(&shape, &config.kernel, &stencil);
        Ok(Solver {
            config,
            grid,
            shape,
            stencil,
            builder,
            scratch: Mutex::new(None),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    pub fn stencil(&self) -> &StencilRule {
        &self.stencil
    }

    pub fn initial_state(&self) -> Result<SimState> {
        self.config.initial.state(&self.grid)
    }

    pub fn build_cache(&self, rho: &Field) -> Result<KernelCache> {
        self.builder.build(rho, &self.stencil, self.config.rho_floor)
    }

    /// Rebuilds `cache` for `rho`, reusing its storage.
    pub fn rebuild_cache(&self, cache: &mut KernelCache, rho: &Field) -> Result<()> {
        self.builder.rebuild(cache, rho, &self.stencil, self.config.rho_floor)
    }

    fn with_scratch<T>(&self, rho: &Field, f: impl FnOnce(&KernelCache) -> Result<T>) -> Result<T> {
        let mut slot = self.scratch.lock().unwrap_or_else(|e| e.into_inner()).take();
        let cache = match slot.as_mut() {
            Some(c) => {
                self.rebuild_cache(c, rho)?;
                c
            }
            None => slot.insert(self.build_cache(rho)?),
        };
        let out = f(cache);
        *self.scratch.lock().unwrap_or_else(|e| e.into_inner()) = slot;
        out
    }

    /// Inviscid tendencies `(-∇·(ρu), -u·∇u + C_φ(u, ρ))`.
    pub fn rhs(&self, state: &SimState, cache: &KernelCache) -> Result<(Field, Field)> {
        cache.ensure_current(&state.rho)?;
        cache.ensure_stencil(&self.stencil)?;
        let grid = &self.grid;
        let dim = grid.dim();
        let r = state.rho.component(0);
        let flux: Vec<Vec<f64>> = state
            .u
            .components()
            .iter()
            .map(|c| {
                let prod: Vec<f64> = c.iter().zip(r).map(|(u, r)| u * r).collect();
                spectral::dealias(grid, &prod)
            })
            .collect();
        let div = spectral::divergence(&Field::from_components_unchecked(grid, flux))?;
        let drho = div.map(|v| -v);

        let grads: Vec<Vec<Field>> = (0..dim)
            .map(|c| {
                let uc = Field::from_components_unchecked(grid, vec![state.u.component(c).to_vec()]);
                (0..dim)
                    .map(|a| spectral::spectral_derivative(&uc, a, 1))
                    .collect::<Result<Vec<Field>>>()
            })
            .collect::<Result<_>>()?;
        let force = operator::c_phi_unchecked(&state.u, &state.rho, cache, &self.stencil);
        let du: Vec<Vec<f64>> = (0..dim)
            .map(|c| {
                let adv: Vec<f64> = (0..grid.len())
                    .map(|i| (0..dim).map(|a| state.u.component(a)[i] * grads[c][a].component(0)[i]).sum())
                    .collect();
                let adv = spectral::dealias(grid, &adv);
                adv.iter().zip(force.component(c)).map(|(a, f)| f - a).collect()
            })
            .collect();
        Ok((drho, Field::from_components_unchecked(grid, du)))
    }

    /// Stable step estimate `cfl · min(h / max|u|, h^α / Λ)`, where `Λ` is the
    /// largest row sum of the discrete alignment operator. With viscosity the
    /// step is also capped so the backward heat factor inside a stage stays
    /// below `e^2`.
    pub fn cfl_dt(&self, state: &SimState, cache: &KernelCache) -> f64 {
        let h = self.grid.spacing();
        let advective = h / (state.u.max_abs() + 1e-12);
        let lambda = operator::dissipation_rate(&state.rho, cache, &self.stencil);
        let alignment = if lambda > 0.0 {
            h.powf(self.config.kernel.alpha) / lambda
        } else {
            f64::INFINITY
        };
        let mut dt = self.config.cfl * advective.min(alignment);
        if self.config.epsilon > 0.0 {
            let kmax = self.grid.k_scale() * (self.grid.points_per_axis() / 2) as f64;
            let k2 = self.grid.dim() as f64 * kmax * kmax;
            dt = dt.min(4.0 / (self.config.epsilon * k2));
        }
        dt
    }

    fn heat(&self, f: &Field, t: f64) -> Field {
        spectral::heat_factor(f, self.config.epsilon * t)
    }

    /// One Lawson SSP-RK3 step.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        let cache = self.build_cache(&state.rho)?;
        self.step_with_cache(state, &cache, dt)
    }

    /// [`Solver::step`] reusing a cache already built for `state.rho`.
    pub fn step_with_cache(&self, state: &SimState, cache: &KernelCache, dt: f64) -> Result<SimState> {
        cache.ensure_current(&state.rho)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::arg(format!("time step must be positive, got {dt}")));
        }
        let t0 = state.t;
        let advance = |s: &SimState, cache: &KernelCache| -> Result<(Field, Field)> {
            let (dr, du) = self.rhs(s, cache)?;
            Ok((s.rho.axpy(dt, &dr), s.u.axpy(dt, &du)))
        };
        let euler = |s: &SimState| self.with_scratch(&s.rho, |c| advance(s, c));
        let combine = |a: f64, x: &Field, ta: f64, b: f64, y: &Field, tb: f64| -> Field {
            Field::lincomb(a, &self.heat(x, ta), b, &self.heat(y, tb))
        };

        let (r, u) = advance(state, cache)?;
        let s1 = SimState {
            rho: self.heat(&r, dt),
            u: self.heat(&u, dt),
            t: t0 + dt,
        };
        s1.check_finite()?;

        let (r, u) = euler(&s1)?;
        let s2 = SimState {
            rho: combine(0.75, &state.rho, 0.5 * dt, 0.25, &r, -0.5 * dt),
            u: combine(0.75, &state.u, 0.5 * dt, 0.25, &u, -0.5 * dt),
            t: t0 + 0.5 * dt,
        };
        s2.check_finite()?;

        let (r, u) = euler(&s2)?;
        let s3 = SimState {
            rho: combine(1.0 / 3.0, &state.rho, dt, 2.0 / 3.0, &r, 0.5 * dt),
            u: combine(1.0 / 3.0, &state.u, dt, 2.0 / 3.0, &u, 0.5 * dt),
            t: t0 + dt,
        };
        s3.check_finite()?;
        Ok(s3)
    }

    /// Advances to `t_final`, reporting every output time to `observer`.
    pub fn run(&self, initial: SimState, observer: &mut impl RunObserver) -> Result<SimState> {
        if initial.grid() != &self.grid || initial.u.n_components() != self.grid.dim() {
            return Err(Error::arg("initial state does not match the configured grid"));
        }
        initial.check_finite()?;
        let mut state = initial;
        let mut cache = self.build_cache(&state.rho)?;
        observer.on_output(self, &state, &cache)?;

        let t_final = self.config.t_final;
        let interval = self.config.output_interval;
        let mut next_index = 1u64;
        let next_output = |k: u64| -> f64 {
            if interval > 0.0 {
                (interval * k as f64).min(t_final)
            } else {
                t_final
            }
        };
        let tol = |t: f64| 1e-12 * t.abs().max(1.0);
        while state.t < t_final - tol(t_final) {
            let target = next_output(next_index);
            let mut dt = match self.config.dt {
                Some(dt) => dt,
                None => self.cfl_dt(&state, &cache),
            };
            let mut hit = false;
            if state.t + dt >= target - tol(target) {
                dt = target - state.t;
                hit = true;
            }
            let next = match self.step_with_cache(&state, &cache, dt) {
                Ok(s) => s,
                Err(e) => {
                    observer.on_abort(&state, &e)?;
                    return Err(e);
                }
            };
            state = next;
            if hit {
                state.t = target;
            }
            match self.rebuild_cache(&mut cache, &state.rho) {
                Ok(()) => {}
                Err(e) => {
                    observer.on_abort(&state, &e)?;
                    return Err(e);
                }
            };
            if hit {
                observer.on_output(self, &state, &cache)?;
                next_index += 1;
                while state.t < t_final - tol(t_final) && next_output(next_index) <= state.t + tol(state.t) {
                    next_index += 1;
                }
            }
        }
        Ok(state)
    }
}
