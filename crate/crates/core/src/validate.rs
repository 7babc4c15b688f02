//! End-to-end checks run by the `validate` command.

use std::time::Instant;

use crate::commands::{build_system, run_engine, sweep_row, write_sweep_csv};
use crate::config::{Engine, SimConfig};
use crate::error::Result;
use crate::integrators::{integrate_adaptive, integrate_fixed, StepControl, TimeSeries};
use crate::oracle::{build_state_space, compare_tail, steady_state_response, HarmonicComponent};
use crate::output::series_csv_bytes;
use crate::parallel::plan::{named_plan, PlanKind};
use crate::parallel::{run_parallel, workers_created_total, EngineOptions};
use crate::track::{excitation_frequency, TrackProfile};
use crate::vehicle::{mechanical_energy, StateVector, STATE_DIM};

/// Worker counts checked for equivalence.
pub const EQUIVALENCE_WORKERS: [usize; 3] = [1, 2, 4];
pub const EQUIVALENCE_MAX_SECONDS: f64 = 5.0;
pub const SOLVER_AGREEMENT: f64 = 1e-6;
pub const ORACLE_REL_TOL: f64 = 0.01;
pub const ORACLE_MAX_SECONDS: f64 = 120.0;
/// Sweep grid, km/h.
pub const SWEEP_SPEEDS_KMH: [f64; 8] = [20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 150.0];
pub const NOMINAL_OMEGA: f64 = 5.0265;
pub const OMEGA_TOL: f64 = 0.001;
pub const ENERGY_STEP_RISE: f64 = 1e-9;
pub const ENERGY_DECAY_RATIO: f64 = 1e-6;
pub const ENERGY_HORIZON: f64 = 30.0;
pub const ORDER_RATIO_RANGE: (f64, f64) = (12.0, 20.0);
/// Reference for the order check: relative tolerance 1e-10 with the same
/// 1e-3 absolute-to-relative ratio as the default controller.
pub const ORDER_REFERENCE_TOL: (f64, f64) = (1e-13, 1e-10);

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {}. {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

fn result(id: u8, name: &'static str, outcome: Result<(bool, String)>) -> CriterionResult {
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult {
        id,
        name,
        passed,
        detail,
    }
}

fn bits_equal(a: &TimeSeries, b: &TimeSeries) -> bool {
    a.times.len() == b.times.len()
        && a.times
            .iter()
            .zip(&b.times)
            .all(|(x, y)| x.to_bits() == y.to_bits())
        && a.states.iter().zip(&b.states).all(|(x, y)| {
            x.0.iter()
                .zip(&y.0)
                .all(|(p, q)| p.to_bits() == q.to_bits())
        })
}

fn max_final_diff(a: &TimeSeries, b: &TimeSeries) -> f64 {
    let (x, y) = (a.last_state().unwrap(), b.last_state().unwrap());
    (0..STATE_DIM)
        .map(|i| (x.0[i] - y.0[i]).abs())
        .fold(0.0, f64::max)
}

pub fn parallel_equivalence(config: &SimConfig) -> CriterionResult {
    result(
        1,
        "parallel/sequential equivalence",
        (|| {
            let system = build_system(config, None)?;
            let sim = &config.simulation;
            let x0 = config.initial_state();
            let reference = integrate_fixed(&system, &x0, sim.t0, sim.t1, sim.step, 1)?;
            let mut notes = Vec::new();
            let mut ok = true;
            for kind in PlanKind::ALL {
                for n in EQUIVALENCE_WORKERS {
                    let start = Instant::now();
                    let (series, _) = run_parallel(
                        &system,
                        &x0,
                        sim.t0,
                        sim.t1,
                        sim.step,
                        1,
                        &named_plan(kind, n)?,
                        &EngineOptions::from_env(),
                    )?;
                    let secs = start.elapsed().as_secs_f64();
                    let same = bits_equal(&series, &reference);
                    ok &= same && secs < EQUIVALENCE_MAX_SECONDS;
                    notes.push(format!("{} x{n}: identical={same} {secs:.2}s", kind.name()));
                }
            }
            Ok((ok, notes.join("; ")))
        })(),
    )
}

pub fn solver_agreement(config: &SimConfig) -> CriterionResult {
    result(
        2,
        "RK4 vs adaptive RK45",
        (|| {
            let system = build_system(config, None)?;
            let sim = &config.simulation;
            let x0 = config.initial_state();
            let fixed = integrate_fixed(&system, &x0, sim.t0, sim.t1, 1e-3, 1)?;
            let ctrl = StepControl::with_tolerances(1e-9, 1e-6);
            let (adaptive, stats) = integrate_adaptive(&system, &x0, sim.t0, sim.t1, &ctrl)?;
            let diff = max_final_diff(&fixed, &adaptive);
            Ok((
                diff <= SOLVER_AGREEMENT && stats.max_accepted_norm() <= 1.0,
                format!(
                    "max |diff| at t1 = {diff:.3e} (limit {SOLVER_AGREEMENT:e}), {} adaptive steps",
                    stats.accepted
                ),
            ))
        })(),
    )
}

pub fn oracle_agreement(config: &SimConfig) -> CriterionResult {
    result(
        3,
        "frequency-domain oracle",
        (|| {
            let start = Instant::now();
            let ss = build_state_space(&config.vehicle)?;
            let t1 = config.validation.settle + config.validation.window;
            let mut worst: f64 = 0.0;
            let mut notes = Vec::new();
            for kmh in SWEEP_SPEEDS_KMH {
                let system = build_system(config, Some(crate::track::kmh_to_ms(kmh)))?;
                let series = integrate_fixed(
                    &system,
                    &StateVector::ZERO,
                    0.0,
                    t1,
                    config.simulation.step,
                    1,
                )?;
                let steady =
                    steady_state_response(&ss, &HarmonicComponent::from_track(&system.input)?)?;
                let tail = compare_tail(&series, &steady, config.validation.window)?;
                let rel = tail.iter().map(|c| c.relative()).fold(0.0, f64::max);
                worst = worst.max(rel);
                notes.push(format!("{kmh}:{rel:.1e}"));
            }
            let secs = start.elapsed().as_secs_f64();
            Ok((
            worst <= ORACLE_REL_TOL && secs < ORACLE_MAX_SECONDS,
            format!("worst relative deviation {worst:.2e} (limit {ORACLE_REL_TOL}) in {secs:.1}s [{}]", notes.join(" ")),
        ))
        })(),
    )
}

pub fn excitation(_config: &SimConfig) -> CriterionResult {
    result(
        4,
        "excitation frequency",
        (|| {
            let w = excitation_frequency(&TrackProfile {
                speed: 20.0,
                wavelength: 25.0,
                ..Default::default()
            })?;
            Ok((
                (w - NOMINAL_OMEGA).abs() <= OMEGA_TOL,
                format!("w = {w:.6} rad/s (expected {NOMINAL_OMEGA} +/- {OMEGA_TOL})"),
            ))
        })(),
    )
}

pub fn energy_decay(config: &SimConfig) -> CriterionResult {
    result(
        5,
        "free-decay stability",
        (|| {
            let flat = SimConfig {
                track: config.track.flat(),
                ..config.clone()
            };
            let system = build_system(&flat, None)?;
            let mut x0 = StateVector::ZERO;
            x0.0[0] = 0.01;
            let series = integrate_fixed(&system, &x0, 0.0, ENERGY_HORIZON, 1e-3, 1)?;
            let energy: Vec<f64> = series
                .states
                .iter()
                .zip(&series.forcings)
                .map(|(x, f)| mechanical_energy(x, f, &config.vehicle))
                .collect();
            let rise = energy
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::NEG_INFINITY, f64::max);
            let ratio = energy[energy.len() - 1] / energy[0];
            Ok((
                rise <= ENERGY_STEP_RISE && ratio <= ENERGY_DECAY_RATIO,
                format!("largest per-step rise {rise:.2e} kJ, E(30)/E(0) = {ratio:.2e}"),
            ))
        })(),
    )
}

pub fn rk4_order(config: &SimConfig) -> CriterionResult {
    result(
        6,
        "RK4 convergence order",
        (|| {
            let system = build_system(config, None)?;
            let sim = &config.simulation;
            let x0 = config.initial_state();
            let ctrl = StepControl {
                h_init: 1e-4,
                h_min: 1e-14,
                ..StepControl::with_tolerances(ORDER_REFERENCE_TOL.0, ORDER_REFERENCE_TOL.1)
            };
            let (reference, _) = integrate_adaptive(&system, &x0, sim.t0, sim.t1, &ctrl)?;
            let coarse = integrate_fixed(&system, &x0, sim.t0, sim.t1, 1e-3, 1)?;
            let fine = integrate_fixed(&system, &x0, sim.t0, sim.t1, 5e-4, 1)?;
            let (e1, e2) = (
                max_final_diff(&coarse, &reference),
                max_final_diff(&fine, &reference),
            );
            let ratio = e1 / e2;
            Ok((
                ratio >= ORDER_RATIO_RANGE.0 && ratio <= ORDER_RATIO_RANGE.1,
                format!(
                    "errors {e1:.3e} / {e2:.3e}, ratio {ratio:.2} (expected {:?})",
                    ORDER_RATIO_RANGE
                ),
            ))
        })(),
    )
}

pub fn parallel_accounting(config: &SimConfig) -> CriterionResult {
    result(
        7,
        "parallel accounting and layout",
        (|| {
            let system = build_system(config, None)?;
            let sim = &config.simulation;
            let plan = config.parallel.plan_for(PlanKind::BodyWise, 4)?;
            let options = EngineOptions {
                track_writes: true,
                ..config.parallel.engine_options()
            };
            let before = workers_created_total();
            let (_, stats) = run_parallel(
                &system,
                &config.initial_state(),
                sim.t0,
                sim.t1,
                sim.step,
                1,
                &plan,
                &options,
            )?;
            let spawned = workers_created_total() - before;
            let steps = stats.workers[0].steps;
            let accounting = stats.accounting_holds(stats.clock.resolution);
            let layout = stats.slots_on_distinct_lines();
            let ok = accounting
                && layout
                && stats.workers_created == plan.workers()
                && spawned >= plan.workers()
                && stats.write_violations == 0;
            Ok((
            ok,
            format!(
                "accounting={accounting} rendezvous={} (4x{steps}) layout={layout} created={} violations={} wait fractions {:?}",
                stats.workers[0].stage_rendezvous_count,
                stats.workers_created,
                stats.write_violations,
                stats.wait_fractions().iter().map(|f| format!("{f:.2}")).collect::<Vec<_>>()
            ),
        ))
        })(),
    )
}

pub fn determinism(config: &SimConfig) -> CriterionResult {
    result(
        8,
        "byte-identical output",
        (|| {
            let system = build_system(config, None)?;
            let sim = &config.simulation;
            let mut same = true;
            for engine in [Engine::Seq, Engine::Par] {
                let a = series_csv_bytes(&run_engine(config, &system, engine, sim.t0, sim.t1)?.0);
                let b = series_csv_bytes(&run_engine(config, &system, engine, sim.t0, sim.t1)?.0);
                same &= a == b;
            }
            let sweep = || {
                let rows: Vec<_> = [20.0, 150.0]
                    .iter()
                    .map(|&v| sweep_row(config, v))
                    .collect();
                let mut buf = Vec::new();
                write_sweep_csv(&rows, &mut buf).expect("writing to memory");
                buf
            };
            same &= sweep() == sweep();
            Ok((
                same,
                format!("simulate (seq, par) and sweep outputs identical across runs: {same}"),
            ))
        })(),
    )
}

/// Runs every check in order.
pub fn run_all(config: &SimConfig) -> Vec<CriterionResult> {
    let checks: [fn(&SimConfig) -> CriterionResult; 8] = [
        parallel_equivalence,
        solver_agreement,
        oracle_agreement,
        excitation,
        energy_decay,
        rk4_order,
        parallel_accounting,
        determinism,
    ];
    checks.iter().map(|check| check(config)).collect()
}
