//! Implementations behind the command-line subcommands.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Engine, PlotKind, SimConfig};
use crate::error::Error;
use crate::integrators::{integrate_fixed, TimeSeries, VehicleSystem};
use crate::oracle::{
    amplitude_from_series, build_state_space, compare_tail, steady_state_response,
    HarmonicComponent,
};
use crate::output::{emit_plot, kind_name, write_series_csv};
use crate::parallel::affinity::Outcome;
use crate::parallel::plan::PlanKind;
use crate::parallel::{run_parallel, ParallelStats};
use crate::track::{excitation_frequency, kmh_to_ms, TrackInput, TrackProfile};
use crate::vehicle::{StateVector, STATE_DIM};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Failed(String),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CommandError {
    let context = context.into();
    move |source| CommandError::Io { context, source }
}

/// Vehicle system for the configured track, optionally at another speed.
pub fn build_system(config: &SimConfig, speed: Option<f64>) -> Result<VehicleSystem, Error> {
    let profile = TrackProfile {
        speed: speed.unwrap_or(config.track.speed),
        ..config.track
    };
    let input = TrackInput::new(&config.vehicle, &profile)?;
    VehicleSystem::new(&config.vehicle, input)
}

/// Runs the configured fixed-step engine over `[t0, t1]`.
pub fn run_engine(
    config: &SimConfig,
    system: &VehicleSystem,
    engine: Engine,
    t0: f64,
    t1: f64,
) -> Result<(TimeSeries, Option<ParallelStats>), Error> {
    let sim = &config.simulation;
    let x0 = config.initial_state();
    match engine {
        Engine::Seq => Ok((
            integrate_fixed(system, &x0, t0, t1, sim.step, config.output.stride)?,
            None,
        )),
        Engine::Par => {
            let plan = config.parallel.worker_plan()?;
            let (series, stats) = run_parallel(
                system,
                &x0,
                t0,
                t1,
                sim.step,
                config.output.stride,
                &plan,
                &config.parallel.engine_options(),
            )?;
            Ok((series, Some(stats)))
        }
    }
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub series: TimeSeries,
    pub stats: Option<ParallelStats>,
    pub csv: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Script path for a plot of `csv`.
pub fn plot_path(csv: &Path, kind: PlotKind) -> PathBuf {
    let stem = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv.with_file_name(format!("{stem}-{}.gp", kind_name(kind)))
}

pub fn cmd_simulate(
    config: &SimConfig,
    engine: Option<Engine>,
    plot: Option<PlotKind>,
    csv: Option<&Path>,
) -> Result<SimulateOutcome, CommandError> {
    let engine = engine.unwrap_or(config.simulation.engine);
    let system = build_system(config, None)?;
    let (series, stats) = run_engine(
        config,
        &system,
        engine,
        config.simulation.t0,
        config.simulation.t1,
    )?;

    let csv = csv
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.output.csv.clone());
    let file =
        std::fs::File::create(&csv).map_err(io_err(format!("creating {}", csv.display())))?;
    write_series_csv(&series, io::BufWriter::new(file))
        .map_err(io_err(format!("writing {}", csv.display())))?;

    let plot = match plot.or(config.output.plot) {
        Some(kind) => {
            let script = plot_path(&csv, kind);
            let csv_ref = csv
                .file_name()
                .map(PathBuf::from)
                .unwrap_or_else(|| csv.clone());
            emit_plot(&series, &csv_ref, kind, &script)
                .map_err(io_err(format!("writing {}", script.display())))?;
            Some(script)
        }
        None => None,
    };
    Ok(SimulateOutcome {
        series,
        stats,
        csv,
        plot,
    })
}

/// One speed of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub speed_kmh: f64,
    pub speed_ms: f64,
    pub omega: f64,
    /// `max |parallel - sequential|` over the whole run.
    pub max_par_seq_diff: f64,
    /// Worst `max |sim - steady| / peak(steady)` over all states in the tail.
    pub oracle_rel_err: f64,
    /// Peak amplitude of each state over the tail window.
    pub amplitudes: [f64; STATE_DIM],
    pub status: Result<(), String>,
}

impl SweepRow {
    fn failed(speed_kmh: f64, message: String) -> Self {
        Self {
            speed_kmh,
            speed_ms: kmh_to_ms(speed_kmh),
            omega: f64::NAN,
            max_par_seq_diff: f64::NAN,
            oracle_rel_err: f64::NAN,
            amplitudes: [f64::NAN; STATE_DIM],
            status: Err(message),
        }
    }
}

pub fn sweep_row(config: &SimConfig, speed_kmh: f64) -> SweepRow {
    match try_sweep_row(config, speed_kmh) {
        Ok(row) => row,
        Err(e) => SweepRow::failed(speed_kmh, e.to_string()),
    }
}

fn try_sweep_row(config: &SimConfig, speed_kmh: f64) -> Result<SweepRow, Error> {
    if !(speed_kmh.is_finite() && speed_kmh > 0.0) {
        return Err(Error::InvalidProfile {
            field: "speed",
            reason: format!("sweep speeds must be > 0 km/h, got {speed_kmh}"),
        });
    }
    let speed_ms = kmh_to_ms(speed_kmh);
    let system = build_system(config, Some(speed_ms))?;
    let omega = excitation_frequency(&system.input.profile)?;
    let t1 = config.validation.settle + config.validation.window;

    let (seq, _) = run_engine(config, &system, Engine::Seq, 0.0, t1)?;
    let (par, _) = run_engine(config, &system, Engine::Par, 0.0, t1)?;
    let max_par_seq_diff = par.max_abs_diff(&seq).unwrap_or(f64::INFINITY);

    let ss = build_state_space(&config.vehicle)?;
    let steady = steady_state_response(&ss, &HarmonicComponent::from_track(&system.input)?)?;
    let tail = compare_tail(&seq, &steady, config.validation.window)?;
    let oracle_rel_err = tail.iter().map(|c| c.relative()).fold(0.0, f64::max);

    let mut amplitudes = [0.0; STATE_DIM];
    for (i, a) in amplitudes.iter_mut().enumerate() {
        *a = amplitude_from_series(&seq, i, config.validation.window, omega)?.peak;
    }
    Ok(SweepRow {
        speed_kmh,
        speed_ms,
        omega,
        max_par_seq_diff,
        oracle_rel_err,
        amplitudes,
        status: Ok(()),
    })
}

pub fn sweep_header() -> String {
    let mut cols = vec![
        "speed_kmh".to_string(),
        "speed_ms".into(),
        "omega".into(),
        "max_par_seq_diff".into(),
        "oracle_rel_err".into(),
    ];
    cols.extend(StateVector::NAMES.iter().map(|n| format!("amp_{n}")));
    cols.push("status".into());
    cols.join(",")
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", sweep_header())?;
    let num = |v: f64| {
        if v.is_nan() {
            String::new()
        } else {
            v.to_string()
        }
    };
    for r in rows {
        let mut fields = vec![
            num(r.speed_kmh),
            num(r.speed_ms),
            num(r.omega),
            num(r.max_par_seq_diff),
            num(r.oracle_rel_err),
        ];
        fields.extend(r.amplitudes.iter().map(|&a| num(a)));
        fields.push(match &r.status {
            Ok(()) => "ok".into(),
            Err(msg) => format!("error: {}", msg.replace([',', '\n'], ";")),
        });
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()
}

pub fn cmd_sweep(
    config: &SimConfig,
    speeds_kmh: &[f64],
    out: &Path,
) -> Result<Vec<SweepRow>, CommandError> {
    let rows: Vec<SweepRow> = speeds_kmh.iter().map(|&v| sweep_row(config, v)).collect();
    let file = std::fs::File::create(out).map_err(io_err(format!("creating {}", out.display())))?;
    write_sweep_csv(&rows, io::BufWriter::new(file))
        .map_err(io_err(format!("writing {}", out.display())))?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingSummary {
    pub samples: Vec<f64>,
    pub median: f64,
}

impl TimingSummary {
    pub fn new(samples: Vec<f64>) -> Self {
        let median = median(&samples);
        Self { samples, median }
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WorkerBench {
    pub worker: usize,
    pub components: Vec<usize>,
    pub busy: TimingSummary,
    pub wait: TimingSummary,
    pub wait_fraction: TimingSummary,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanBench {
    pub plan: &'static str,
    pub workers: usize,
    pub wall: TimingSummary,
    pub per_worker: Vec<WorkerBench>,
    /// busy + wait <= wall and step/rendezvous identities, every repetition.
    pub accounting_ok: bool,
    pub bit_identical: bool,
    pub pinning_log: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub steps: usize,
    pub clock_resolution: f64,
    pub line_size: usize,
    pub sequential: TimingSummary,
    pub plans: Vec<PlanBench>,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "repetitions: {}  steps: {}  clock resolution: {:.1e} s  line size: {} B\n",
            self.repetitions, self.steps, self.clock_resolution, self.line_size
        );
        s += &format!(
            "sequential              wall median {:>10.6} s\n",
            self.sequential.median
        );
        for p in &self.plans {
            s += &format!(
                "{:<12} x{} workers  wall median {:>10.6} s  accounting {}  identical {}\n",
                p.plan,
                p.workers,
                p.wall.median,
                if p.accounting_ok { "ok" } else { "FAIL" },
                p.bit_identical
            );
            for w in &p.per_worker {
                s += &format!(
                    "    worker {} {:?}: busy {:.6} s  wait {:.6} s  wait fraction {:.3}  steps {}\n",
                    w.worker, w.components, w.busy.median, w.wait.median, w.wait_fraction.median, w.steps
                );
            }
            for line in &p.pinning_log {
                s += &format!("    {line}\n");
            }
        }
        s
    }
}

/// Worker counts exercised by the bench for each plan kind.
pub const BENCH_WORKER_COUNTS: [usize; 3] = [1, 2, 4];

pub fn cmd_bench(config: &SimConfig, repetitions: usize) -> Result<BenchReport, CommandError> {
    if repetitions == 0 {
        return Err(CommandError::Failed("repetitions must be >= 1".into()));
    }
    let system = build_system(config, None)?;
    let sim = &config.simulation;

    let mut seq_times = Vec::with_capacity(repetitions);
    let mut reference = None;
    for _ in 0..repetitions {
        let start = Instant::now();
        let (series, _) = run_engine(config, &system, Engine::Seq, sim.t0, sim.t1)?;
        seq_times.push(start.elapsed().as_secs_f64());
        reference = Some(series);
    }
    let reference = reference.expect("at least one repetition");

    let mut counts: Vec<usize> = BENCH_WORKER_COUNTS.to_vec();
    if !counts.contains(&config.parallel.workers) {
        counts.push(config.parallel.workers);
    }
    let options = config.parallel.engine_options();
    let mut plans = Vec::new();
    let mut steps = 0;
    for kind in PlanKind::ALL {
        for &workers in &counts {
            let plan = config.parallel.plan_for(kind, workers)?;
            let mut runs = Vec::with_capacity(repetitions);
            let mut identical = true;
            for _ in 0..repetitions {
                let (series, stats) = run_parallel(
                    &system,
                    &config.initial_state(),
                    sim.t0,
                    sim.t1,
                    sim.step,
                    config.output.stride,
                    &plan,
                    &options,
                )?;
                identical &= series == reference;
                runs.push(stats);
            }
            steps = runs[0].workers[0].steps;
            plans.push(summarise_plan(kind, workers, &runs, identical));
        }
    }
    Ok(BenchReport {
        repetitions,
        steps,
        clock_resolution: crate::parallel::clock_info().resolution,
        line_size: options.line_size,
        sequential: TimingSummary::new(seq_times),
        plans,
    })
}

fn summarise_plan(
    kind: PlanKind,
    workers: usize,
    runs: &[ParallelStats],
    identical: bool,
) -> PlanBench {
    let slack = runs[0].clock.resolution;
    let per_worker = (0..workers)
        .map(|w| {
            let column = |f: &dyn Fn(&ParallelStats) -> f64| {
                TimingSummary::new(runs.iter().map(f).collect())
            };
            WorkerBench {
                worker: w,
                components: runs[0].workers[w].components.clone(),
                busy: column(&|r| r.workers[w].busy_time),
                wait: column(&|r| r.workers[w].rendezvous_wait_time),
                wait_fraction: column(&|r| r.wait_fractions()[w]),
                steps: runs[0].workers[w].steps,
            }
        })
        .collect();
    let mut pinning_log = Vec::new();
    for p in runs[0].workers.iter().map(|w| &w.pinning) {
        let describe = |o: &Outcome| match o {
            Outcome::NotRequested => "not requested".to_string(),
            Outcome::Granted => "granted".to_string(),
            Outcome::Denied(why) => format!("denied ({why})"),
        };
        pinning_log.push(format!(
            "worker {}: core {:?} {}, priority {}, observed core {:?}",
            p.worker,
            p.requested_core,
            describe(&p.affinity),
            describe(&p.priority),
            p.observed_core
        ));
    }
    PlanBench {
        plan: kind.name(),
        workers,
        wall: TimingSummary::new(runs.iter().map(|r| r.wall_time).collect()),
        per_worker,
        accounting_ok: runs.iter().all(|r| r.accounting_holds(slack)),
        bit_identical: identical,
        pinning_log,
    }
}
