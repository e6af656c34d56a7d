//! Command implementations. Each returns the process exit code; `Err` means
//! misuse.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

use topoflock::diagnostics::{transport_residual_probe, DiagnosticsRecord};
use topoflock::domain::make_domain_shape;
use topoflock::evolution::{RunObserver, SimState, Solver};
use topoflock::harness::coercivity::coercivity_suite;
use topoflock::harness::{hard_failures, rows_to_csv, summary, viscosity_convergence_study, AppendixSuite, CheckRow};
use topoflock::kernel::KernelCache;
use topoflock::Error;

use crate::config::RunConfig;
use crate::manifest::{RunDir, CONFIG_NAME};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISUSE: i32 = 1;
pub const EXIT_BREAKDOWN: i32 = 2;
pub const EXIT_CHECKS_FAILED: i32 = 3;

pub const DIAGNOSTICS_NAME: &str = "diagnostics.csv";
pub const CHECKS_NAME: &str = "checks.csv";
pub const DISTANCES_NAME: &str = "distances.csv";

/// Writes one diagnostics row per output time, plus snapshots.
struct Recorder<'a> {
    dir: &'a mut RunDir,
    csv: BufWriter<File>,
    config: &'a RunConfig,
    sample: usize,
    last: Option<SimState>,
}

impl Recorder<'_> {
    fn snapshot(&mut self, tag: &str, state: &SimState) -> topoflock::Result<()> {
        for (field, name) in [(&state.rho, "rho"), (&state.u, "u")] {
            let path = self.dir.register(&format!("snapshot_{tag}_{name}.field"));
            let mut w = BufWriter::new(File::create(path)?);
            field.write_snapshot(&mut w)?;
            w.flush()?;
        }
        Ok(())
    }
}

impl RunObserver for Recorder<'_> {
    fn on_output(&mut self, solver: &Solver, state: &SimState, cache: &KernelCache) -> topoflock::Result<()> {
        self.last = Some(state.clone());
        let residual = if self.config.output.e_residual {
            let dt = solver.config().dt.unwrap_or_else(|| solver.cfl_dt(state, cache));
            Some(transport_residual_probe(solver, state, dt)?)
        } else {
            None
        };
        let record = DiagnosticsRecord::compute(state, cache, solver.stencil(), &self.config.output.m_list, residual)?;
        writeln!(self.csv, "{}", record.csv_row())?;
        self.csv.flush()?;
        let every = self.config.output.snapshot_every;
        if every > 0 && self.sample.is_multiple_of(every) {
            self.snapshot(&format!("{:05}", self.sample), state)?;
        }
        self.sample += 1;
        Ok(())
    }

    fn on_abort(&mut self, state: &SimState, _error: &Error) -> topoflock::Result<()> {
        self.last = Some(state.clone());
        Ok(())
    }
}

pub fn simulate(config: &RunConfig, out: &Path, seed: u64) -> Result<i32> {
    let solver = Solver::new(config.sim.clone())?;
    let initial = solver.initial_state()?;
    let echo = config.echo();
    let mut dir = RunDir::create(out)?;
    dir.write(CONFIG_NAME, echo.as_bytes())?;
    let csv_path = dir.register(DIAGNOSTICS_NAME);
    let mut csv = BufWriter::new(File::create(&csv_path).with_context(|| format!("cannot create {}", csv_path.display()))?);
    writeln!(csv, "{}", DiagnosticsRecord::csv_header(config.sim.dim, &config.output.m_list))?;

    let mut rec = Recorder {
        dir: &mut dir,
        csv,
        config,
        sample: 0,
        last: None,
    };
    let result = solver.run(initial, &mut rec);
    rec.csv.flush()?;
    let (code, message) = match result {
        Ok(end) => {
            println!("reached t = {} after {} output samples", end.t, rec.sample);
            (EXIT_OK, None)
        }
        Err(e) if e.is_breakdown() => {
            let report = match rec.last.take() {
                Some(last) => {
                    rec.snapshot("abort", &last)?;
                    format!("breakdown after t = {}: {e}", last.t)
                }
                None => format!("breakdown: {e}"),
            };
            eprintln!("{report}");
            (EXIT_BREAKDOWN, Some(report))
        }
        Err(e) => return Err(e.into()),
    };
    drop(rec);
    dir.finish("simulate", seed, &echo, code, message)?;
    Ok(code)
}

fn report_checks(rows: &[CheckRow], dir: &mut RunDir) -> Result<usize> {
    dir.write(CHECKS_NAME, rows_to_csv(rows).as_bytes())?;
    print!("{}", summary(rows));
    Ok(hard_failures(rows))
}

fn finish_checks(dir: RunDir, command: &str, seed: u64, echo: &str, failures: usize) -> Result<i32> {
    let (code, message) = if failures == 0 {
        (EXIT_OK, None)
    } else {
        (EXIT_CHECKS_FAILED, Some(format!("{failures} hard checks failed")))
    };
    dir.finish(command, seed, echo, code, message)?;
    Ok(code)
}

pub fn coercivity(config: &RunConfig, out: &Path, seed: u64) -> Result<i32> {
    let sim = &config.sim;
    let grid = sim.grid()?;
    let shape = make_domain_shape(sim.dim, sim.lens_half_angle, sim.quad_points)?;
    let rows = coercivity_suite(&grid, &shape, &sim.kernel, seed)?;
    let echo = config.echo();
    let mut dir = RunDir::create(out)?;
    dir.write(CONFIG_NAME, echo.as_bytes())?;
    let failures = report_checks(&rows, &mut dir)?;
    finish_checks(dir, "coercivity", seed, &echo, failures)
}

pub fn appendix_checks(config: &RunConfig, out: &Path, seed: u64) -> Result<i32> {
    let sim = &config.sim;
    let mut suite = AppendixSuite::new(sim.dim, sim.kernel, seed);
    suite.points_per_axis = sim.points_per_axis;
    suite.period = sim.period;
    suite.lens_half_angle = sim.lens_half_angle;
    suite.quad_points = sim.quad_points;
    let report = suite.run()?;
    let echo = config.echo();
    let mut dir = RunDir::create(out)?;
    dir.write(CONFIG_NAME, echo.as_bytes())?;
    println!(
        "constants: D_s = {:.6e}, second difference = {:.6e}",
        report.ds_constant, report.second_difference_constant
    );
    let failures = report_checks(&report.rows, &mut dir)?;
    finish_checks(dir, "appendix-checks", seed, &echo, failures)
}

pub fn visc_study(config: &RunConfig, out: &Path, seed: u64) -> Result<i32> {
    let report = viscosity_convergence_study(&config.sim, &config.study_epsilons, config.study_horizon)?;
    let echo = config.echo();
    let mut dir = RunDir::create(out)?;
    dir.write(CONFIG_NAME, echo.as_bytes())?;
    dir.write(DISTANCES_NAME, report.csv().as_bytes())?;
    let rows = report.checks();
    print!("{}", summary(&rows));
    let (code, message) = if report.aborted() {
        (EXIT_BREAKDOWN, Some("a viscosity run broke down".to_string()))
    } else if hard_failures(&rows) > 0 {
        (EXIT_CHECKS_FAILED, Some(format!("{} hard checks failed", hard_failures(&rows))))
    } else {
        (EXIT_OK, None)
    };
    dir.finish("visc-study", seed, &echo, code, message)?;
    Ok(code)
}

