//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use railsim::config::SimConfig;
use railsim::oracle::{build_state_space, compare_tail, steady_state_response, HarmonicComponent};
use railsim::parallel::plan::{named_plan, PlanKind};
use railsim::parallel::{run_parallel, workers_created_total, EngineOptions, RENDEZVOUS_PER_STEP};
use railsim::track::{excitation_frequency, kmh_to_ms, TrackInput, TrackProfile};
use railsim::vehicle::{mechanical_energy, StateVector, VehicleParams, STATE_DIM};
use railsim::{integrate_adaptive, integrate_fixed, StepControl, TimeSeries, VehicleSystem};

const T0: f64 = 0.0;
const T1: f64 = 10.0;
const H: f64 = 1e-3;

const C1_WORKERS: [usize; 3] = [1, 2, 4];
const C1_MAX_SECONDS: f64 = 5.0;
const C2_ABS_TOL: f64 = 1e-9;
const C2_REL_TOL: f64 = 1e-6;
const C2_LIMIT: f64 = 1e-6;
const C3_SPEEDS_KMH: [f64; 8] = [20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 150.0];
const C3_SETTLE: f64 = 50.0;
const C3_WINDOW: f64 = 10.0;
const C3_REL_LIMIT: f64 = 0.01;
const C3_MAX_SECONDS: f64 = 120.0;
const C4_SPEED: f64 = 20.0;
const C4_WAVELENGTH: f64 = 25.0;
const C4_OMEGA: f64 = 5.0265;
const C4_TOL: f64 = 1e-3;
const C5_X1: f64 = 0.01;
const C5_HORIZON: f64 = 30.0;
const C5_STEP_RISE: f64 = 1e-9;
const C5_DECAY: f64 = 1e-6;
const C6_COARSE: f64 = 1e-3;
const C6_FINE: f64 = 5e-4;
const C6_REF_ABS: f64 = 1e-13;
const C6_REF_REL: f64 = 1e-10;
const C6_RANGE: (f64, f64) = (12.0, 20.0);
const C7_WORKERS: usize = 4;

fn report(id: u8, name: &str, passed: bool, detail: &str) {
    println!(
        "[{}] {id}. {name}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
}

fn nominal_system() -> VehicleSystem {
    let params = VehicleParams::default();
    VehicleSystem::new(
        &params,
        TrackInput::new(&params, &TrackProfile::default()).unwrap(),
    )
    .unwrap()
}

fn system_at(speed: f64) -> VehicleSystem {
    let params = VehicleParams::default();
    let profile = TrackProfile {
        speed,
        ..TrackProfile::default()
    };
    VehicleSystem::new(&params, TrackInput::new(&params, &profile).unwrap()).unwrap()
}

fn identical(a: &TimeSeries, b: &TimeSeries) -> bool {
    a.len() == b.len()
        && a.times
            .iter()
            .zip(&b.times)
            .all(|(p, q)| p.to_bits() == q.to_bits())
        && a.states.iter().zip(&b.states).all(|(x, y)| {
            x.0.iter()
                .zip(&y.0)
                .all(|(p, q)| p.to_bits() == q.to_bits())
        })
}

fn final_diff(a: &TimeSeries, b: &TimeSeries) -> f64 {
    let (x, y) = (a.last_state().unwrap(), b.last_state().unwrap());
    (0..STATE_DIM)
        .map(|i| (x.0[i] - y.0[i]).abs())
        .fold(0.0, f64::max)
}

fn criterion_1_parallel_equivalence() -> bool {
    let system = nominal_system();
    let x0 = StateVector::ZERO;
    let reference = integrate_fixed(&system, &x0, T0, T1, H, 1).unwrap();
    let mut passed = true;
    let mut notes = Vec::new();
    for kind in PlanKind::ALL {
        for n in C1_WORKERS {
            let plan = named_plan(kind, n).unwrap();
            let start = Instant::now();
            let (series, _) =
                run_parallel(&system, &x0, T0, T1, H, 1, &plan, &EngineOptions::default()).unwrap();
            let secs = start.elapsed().as_secs_f64();
            let same = identical(&series, &reference);
            passed &= same && secs < C1_MAX_SECONDS;
            notes.push(format!("{} x{n} identical={same} {secs:.2}s", kind.name()));
        }
    }
    report(
        1,
        "parallel/sequential equivalence",
        passed,
        &notes.join(", "),
    );
    passed
}

fn criterion_2_solver_agreement() -> bool {
    let system = nominal_system();
    let x0 = StateVector::ZERO;
    let fixed = integrate_fixed(&system, &x0, T0, T1, H, 1).unwrap();
    let ctrl = StepControl::with_tolerances(C2_ABS_TOL, C2_REL_TOL);
    let (adaptive, stats) = integrate_adaptive(&system, &x0, T0, T1, &ctrl).unwrap();
    let diff = final_diff(&fixed, &adaptive);
    let passed = diff <= C2_LIMIT && *adaptive.times.last().unwrap() == T1;
    report(
        2,
        "RK4 vs adaptive RK45",
        passed,
        &format!(
            "max |diff| at t={T1} is {diff:.3e} (limit {C2_LIMIT:e}), {} steps",
            stats.accepted
        ),
    );
    passed
}

fn criterion_3_frequency_domain_oracle() -> bool {
    let start = Instant::now();
    let ss = build_state_space(&VehicleParams::default()).unwrap();
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for kmh in C3_SPEEDS_KMH {
        let system = system_at(kmh_to_ms(kmh));
        let series = integrate_fixed(
            &system,
            &StateVector::ZERO,
            0.0,
            C3_SETTLE + C3_WINDOW,
            H,
            1,
        )
        .unwrap();
        let harmonics = HarmonicComponent::from_track(&system.input).unwrap();
        let steady = steady_state_response(&ss, &harmonics).unwrap();
        let tail = compare_tail(&series, &steady, C3_WINDOW).unwrap();
        let rel = tail.iter().map(|c| c.relative()).fold(0.0, f64::max);
        worst = worst.max(rel);
        notes.push(format!("{kmh}:{rel:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst <= C3_REL_LIMIT && secs < C3_MAX_SECONDS;
    report(
        3,
        "frequency-domain oracle",
        passed,
        &format!(
            "worst {worst:.2e} (limit {C3_REL_LIMIT}) in {secs:.1}s [{}]",
            notes.join(" ")
        ),
    );
    passed
}

fn criterion_4_excitation_frequency() -> bool {
    let w = excitation_frequency(&TrackProfile {
        speed: C4_SPEED,
        wavelength: C4_WAVELENGTH,
        ..TrackProfile::default()
    })
    .unwrap();
    let passed = (w - C4_OMEGA).abs() <= C4_TOL;
    report(
        4,
        "excitation frequency",
        passed,
        &format!("w = {w:.6} rad/s"),
    );
    passed
}

fn criterion_5_free_decay() -> bool {
    let params = VehicleParams::default();
    let flat = TrackProfile::default().flat();
    let system = VehicleSystem::new(&params, TrackInput::new(&params, &flat).unwrap()).unwrap();
    let mut x0 = StateVector::ZERO;
    x0.0[0] = C5_X1;
    let series = integrate_fixed(&system, &x0, 0.0, C5_HORIZON, H, 1).unwrap();
    let energy: Vec<f64> = series
        .states
        .iter()
        .zip(&series.forcings)
        .map(|(x, f)| mechanical_energy(x, f, &params))
        .collect();
    let rise = energy
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let ratio = energy.last().unwrap() / energy[0];
    let passed = rise <= C5_STEP_RISE && ratio <= C5_DECAY;
    report(
        5,
        "free-decay stability",
        passed,
        &format!("largest step rise {rise:.2e} kJ, E({C5_HORIZON})/E(0) = {ratio:.2e}"),
    );
    passed
}

fn criterion_6_rk4_order() -> bool {
    let system = nominal_system();
    let x0 = StateVector::ZERO;
    let ctrl = StepControl {
        h_init: 1e-4,
        h_min: 1e-14,
        ..StepControl::with_tolerances(C6_REF_ABS, C6_REF_REL)
    };
    let (reference, _) = integrate_adaptive(&system, &x0, T0, T1, &ctrl).unwrap();
    let coarse = integrate_fixed(&system, &x0, T0, T1, C6_COARSE, 1).unwrap();
    let fine = integrate_fixed(&system, &x0, T0, T1, C6_FINE, 1).unwrap();
    let (e1, e2) = (
        final_diff(&coarse, &reference),
        final_diff(&fine, &reference),
    );
    let ratio = e1 / e2;
    let passed = (C6_RANGE.0..=C6_RANGE.1).contains(&ratio);
    report(
        6,
        "RK4 convergence order",
        passed,
        &format!("errors {e1:.3e} / {e2:.3e}, ratio {ratio:.2}"),
    );
    passed
}

fn criterion_7_parallel_accounting() -> bool {
    let system = nominal_system();
    let plan = named_plan(PlanKind::BodyWise, C7_WORKERS).unwrap();
    let options = EngineOptions {
        track_writes: true,
        ..EngineOptions::default()
    };
    let before = workers_created_total();
    let (_, stats) =
        run_parallel(&system, &StateVector::ZERO, T0, T1, H, 1, &plan, &options).unwrap();
    let spawned = workers_created_total() - before;
    let slack = stats.clock.resolution;
    let steps = ((T1 - T0) / H).round() as usize;
    let timing = stats
        .workers
        .iter()
        .all(|w| w.busy_time + w.rendezvous_wait_time <= stats.wall_time + slack);
    let rendezvous = stats
        .workers
        .iter()
        .all(|w| w.steps == steps && w.stage_rendezvous_count == RENDEZVOUS_PER_STEP * steps);
    let lines: Vec<usize> = stats
        .slot_addresses
        .iter()
        .map(|a| a / stats.line_size)
        .collect();
    let distinct = (0..lines.len()).all(|i| (0..i).all(|j| lines[i] != lines[j]));
    let created = stats.workers_created == C7_WORKERS && spawned >= C7_WORKERS;
    let passed = timing && rendezvous && distinct && created && stats.write_violations == 0;
    report(
        7,
        "parallel accounting and layout",
        passed,
        &format!(
            "busy+wait<=wall {timing}, rendezvous 4x{steps} {rendezvous}, distinct lines {distinct}, created {}, violations {}",
            stats.workers_created, stats.write_violations
        ),
    );
    passed
}

fn railsim(args: &[&str], dir: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_railsim"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
}

fn criterion_8_determinism() -> bool {
    let dir = tempfile::tempdir().unwrap();
    let config = SimConfig::default();
    std::fs::write(dir.path().join("cfg.json"), config.to_json()).unwrap();
    let runs: [&[&str]; 3] = [
        &[
            "simulate", "--config", "cfg.json", "--engine", "seq", "--output", "OUT",
        ],
        &[
            "simulate", "--config", "cfg.json", "--engine", "par", "--output", "OUT",
        ],
        &[
            "sweep",
            "--config",
            "cfg.json",
            "--speeds",
            "20,72,150",
            "--output",
            "OUT",
        ],
    ];
    let mut passed = true;
    let mut notes = Vec::new();
    for (k, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let name = format!("run{k}-{rep}.csv");
            let args: Vec<&str> = args
                .iter()
                .map(|a| if *a == "OUT" { name.as_str() } else { a })
                .collect();
            railsim(&args, dir.path());
            outputs.push(std::fs::read(dir.path().join(&name)).unwrap());
        }
        let same = outputs[0] == outputs[1] && !outputs[0].is_empty();
        passed &= same;
        notes.push(format!("{} {}: {same}", args[0], args[4]));
    }
    report(8, "byte-identical output", passed, &notes.join(", "));
    passed
}

fn main() {
    let criteria: [fn() -> bool; 8] = [
        criterion_1_parallel_equivalence,
        criterion_2_solver_agreement,
        criterion_3_frequency_domain_oracle,
        criterion_4_excitation_frequency,
        criterion_5_free_decay,
        criterion_6_rk4_order,
        criterion_7_parallel_accounting,
        criterion_8_determinism,
    ];
    let failed = criteria.iter().filter(|c| !c()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
