//! Fixed-step RK4 with the state components split across workers.
//!
//! Each worker owns a group of components. Per step there are four stages;
//! within a stage a worker reads the full stage state from a shared padded
//! buffer, evaluates the derivative of its own components, and writes its
//! own components of the next stage state. All workers then rendezvous
//! before anyone reads peer components again, so a step costs four
//! rendezvous.
//!
//! Two buffers alternate between stages: stage `s` reads one and writes the
//! other, so a slow reader never sees a value written for a later stage.
//! Per-component arithmetic is the same as [`crate::integrators::rk4_step`],
//! which makes the trajectory bit-identical to the sequential one for any
//! plan.

pub mod affinity;
pub mod barrier;
pub mod buffer;
pub mod plan;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrators::{
    assemble_series, rk4_combine, stage_point, StepGrid, TimeSeries, VehicleSystem,
};
use crate::vehicle::{derivative_component, StateVector, STATE_DIM};

use affinity::{pin_and_prioritize, PinReport};
use barrier::SpinBarrier;
use buffer::{PaddedStateBuffer, DEFAULT_LINE_SIZE};
use plan::WorkerPlan;

/// Rendezvous points per RK4 step.
pub const RENDEZVOUS_PER_STEP: usize = 4;

static WORKERS_CREATED: AtomicUsize = AtomicUsize::new(0);

/// Total worker threads spawned by this process so far.
pub fn workers_created_total() -> usize {
    WORKERS_CREATED.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    /// Padding granularity of the shared buffers, bytes.
    pub line_size: usize,
    /// Check every shared write against the ownership map.
    pub track_writes: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            line_size: DEFAULT_LINE_SIZE,
            track_writes: false,
        }
    }
}

impl EngineOptions {
    /// Defaults with the line size taken from the environment when set.
    pub fn from_env() -> Self {
        Self {
            line_size: buffer::line_size_from_env(DEFAULT_LINE_SIZE),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WorkerStats {
    pub worker: usize,
    pub components: Vec<usize>,
    /// Time spent computing, s.
    pub busy_time: f64,
    /// Time spent inside rendezvous, s.
    pub rendezvous_wait_time: f64,
    pub steps: usize,
    pub stage_rendezvous_count: usize,
    pub pinning: PinReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClockInfo {
    pub source: &'static str,
    /// Smallest observed non-zero tick, s.
    pub resolution: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParallelStats {
    pub workers: Vec<WorkerStats>,
    /// Coordinator time from releasing the workers to joining them, s.
    pub wall_time: f64,
    pub clock: ClockInfo,
    pub workers_created: usize,
    pub line_size: usize,
    pub slot_addresses: Vec<usize>,
    /// Shared writes outside the writer's group (tracking mode only).
    pub write_violations: usize,
    pub warnings: Vec<String>,
}

impl ParallelStats {
    /// Wait time as a fraction of busy + wait, per worker.
    pub fn wait_fractions(&self) -> Vec<f64> {
        self.workers
            .iter()
            .map(|w| {
                let total = w.busy_time + w.rendezvous_wait_time;
                if total > 0.0 {
                    w.rendezvous_wait_time / total
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Whether the accounting identities hold: busy + wait within wall time
    /// (up to `slack` s), equal step counts, four rendezvous per step.
    pub fn accounting_holds(&self, slack: f64) -> bool {
        let steps = self.workers.first().map(|w| w.steps);
        self.workers.iter().all(|w| {
            w.busy_time + w.rendezvous_wait_time <= self.wall_time + slack
                && Some(w.steps) == steps
                && w.stage_rendezvous_count == RENDEZVOUS_PER_STEP * w.steps
        })
    }

    /// Whether every pair of shared slots lies on distinct lines.
    pub fn slots_on_distinct_lines(&self) -> bool {
        let a = &self.slot_addresses;
        (0..a.len()).all(|i| {
            (0..i).all(|j| {
                a[i].abs_diff(a[j]) >= self.line_size
                    && a[i] / self.line_size != a[j] / self.line_size
            })
        })
    }
}

/// Resolution of [`Instant`], estimated once per process.
pub fn clock_info() -> ClockInfo {
    static RES: OnceLock<f64> = OnceLock::new();
    let resolution = *RES.get_or_init(|| {
        let mut best = Duration::MAX;
        for _ in 0..200 {
            let a = Instant::now();
            let mut b = Instant::now();
            while b == a {
                b = Instant::now();
            }
            best = best.min(b - a);
        }
        best.as_secs_f64()
    });
    ClockInfo {
        source: if cfg!(target_os = "linux") {
            "std::time::Instant (CLOCK_MONOTONIC)"
        } else {
            "std::time::Instant"
        },
        resolution,
    }
}

struct Shared<'a> {
    system: &'a VehicleSystem,
    grid: StepGrid,
    stride: usize,
    x0: [f64; STATE_DIM],
    bufs: [PaddedStateBuffer; 2],
    start: SpinBarrier,
    stage: SpinBarrier,
    failed_step: AtomicUsize,
}

struct WorkerOutput {
    stats: WorkerStats,
    /// Owned components at each sample, row-major.
    samples: Vec<f64>,
}

/// Parallel fixed-step RK4. The returned series equals
/// [`crate::integrators::integrate_fixed`] bit for bit.
pub fn run_parallel(
    system: &VehicleSystem,
    x0: &StateVector,
    t0: f64,
    t1: f64,
    h: f64,
    stride: usize,
    plan: &WorkerPlan,
    options: &EngineOptions,
) -> Result<(TimeSeries, ParallelStats)> {
    plan.validate()?;
    let grid = StepGrid::new(t0, t1, h)?;
    let stride = stride.max(1);
    let workers = plan.workers();

    let make_buf = || -> Result<PaddedStateBuffer> {
        let buf = PaddedStateBuffer::new(STATE_DIM, options.line_size)?;
        Ok(if options.track_writes {
            buf.with_owners(plan.owners().to_vec())
        } else {
            buf
        })
    };
    let bufs = [make_buf()?, make_buf()?];
    for (i, &v) in x0.0.iter().enumerate() {
        bufs[0].store(i, v);
    }

    let shared = Shared {
        system,
        grid,
        stride,
        x0: x0.0,
        bufs,
        start: SpinBarrier::new(workers + 1),
        stage: SpinBarrier::new(workers),
        failed_step: AtomicUsize::new(usize::MAX),
    };

    let mut created = 0usize;
    let (outputs, wall) = thread::scope(|scope| {
        let handles: Vec<_> = plan
            .groups
            .iter()
            .enumerate()
            .map(|(w, group)| {
                let shared = &shared;
                let core = plan.core_assignment.as_ref().map(|c| c[w]);
                let hint = plan.priority_hint;
                created += 1;
                WORKERS_CREATED.fetch_add(1, Ordering::Relaxed);
                thread::Builder::new()
                    .name(format!("railsim-worker-{w}"))
                    .spawn_scoped(scope, move || {
                        let pinning = pin_and_prioritize(w, core, hint);
                        worker_loop(shared, w, group, pinning)
                    })
                    .expect("failed to spawn worker thread")
            })
            .collect();
        let started = Instant::now();
        shared.start.wait();
        let outputs: Vec<_> = handles.into_iter().map(|h| h.join()).collect();
        (outputs, started.elapsed().as_secs_f64())
    });

    let mut results = Vec::with_capacity(workers);
    for out in outputs {
        match out {
            Ok(o) => results.push(o),
            Err(p) => {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "unknown panic".into());
                return Err(Error::WorkerPanic(msg));
            }
        }
    }

    let failed = shared.failed_step.load(Ordering::Acquire);
    if failed != usize::MAX {
        return Err(Error::Diverged {
            step: failed,
            time: grid.time(failed),
        });
    }

    // merge per-worker columns into full states
    let rows = grid.sample_count(stride);
    let mut states = vec![[0.0; STATE_DIM]; rows];
    for (out, group) in results.iter().zip(&plan.groups) {
        debug_assert_eq!(out.samples.len(), rows * group.len());
        for (r, chunk) in out.samples.chunks_exact(group.len()).enumerate() {
            for (&i, &v) in group.iter().zip(chunk) {
                states[r][i] = v;
            }
        }
    }
    let times: Vec<f64> = (0..=grid.steps)
        .filter(|&n| grid.is_sample(n, stride))
        .map(|n| grid.time(n))
        .collect();
    let series = assemble_series(system, times, states, stride);

    let warnings = results
        .iter()
        .flat_map(|o| o.stats.pinning.warnings())
        .collect();
    let slot_addresses = shared
        .bufs
        .iter()
        .flat_map(|b| (0..b.len()).map(|i| b.address(i)))
        .collect();
    let stats = ParallelStats {
        workers: results.into_iter().map(|o| o.stats).collect(),
        wall_time: wall,
        clock: clock_info(),
        workers_created: created,
        line_size: options.line_size,
        slot_addresses,
        write_violations: shared.bufs.iter().map(|b| b.violations()).sum(),
        warnings,
    };
    Ok((series, stats))
}

fn worker_loop(
    shared: &Shared<'_>,
    me: usize,
    group: &[usize],
    pinning: PinReport,
) -> WorkerOutput {
    let Shared {
        system,
        grid,
        stride,
        ..
    } = *shared;
    let coeffs = &system.coefficients;
    let [buf_a, buf_b] = &shared.bufs;

    let mut x = shared.x0;
    let mut y = [0.0; STATE_DIM];
    let mut k = [[0.0; STATE_DIM]; 4];
    let mut samples = Vec::with_capacity(grid.sample_count(stride) * group.len());
    samples.extend(group.iter().map(|&i| x[i]));

    let mut busy = Duration::ZERO;
    let mut wait = Duration::ZERO;
    let mut rendezvous = 0usize;
    let mut steps = 0usize;

    shared.start.wait();
    let mut mark = Instant::now();

    let fail = |n: usize| {
        shared.failed_step.fetch_min(n, Ordering::AcqRel);
    };

    let alone = shared.stage.parties() == 1;
    // Ends the compute segment, waits, starts the next one.
    let mut rendezvous_point = |mark: &mut Instant| {
        if alone {
            // nobody to wait for; the whole run is busy time
            shared.stage.wait();
            rendezvous += 1;
            return;
        }
        let arrived = Instant::now();
        busy += arrived - *mark;
        shared.stage.wait();
        let left = Instant::now();
        wait += left - arrived;
        rendezvous += 1;
        *mark = left;
    };

    for n in 0..grid.steps {
        let t = grid.time(n);
        let h = grid.step_len(n);
        let half = 0.5 * h;
        let t_mid = t + half;
        let t_end = t + h;

        // (stage time, input buffer, output buffer, offset used for the next stage point)
        let stages: [(f64, &PaddedStateBuffer, &PaddedStateBuffer, f64); 4] = [
            (t, buf_a, buf_b, half),
            (t_mid, buf_b, buf_a, half),
            (t_mid, buf_a, buf_b, h),
            (t_end, buf_b, buf_a, 0.0),
        ];
        let mut ok = true;
        for (s, &(ts, input, output, dt)) in stages.iter().enumerate() {
            input.read_into(&mut y);
            let forcing = system.forcing(ts);
            if ok && (!y.iter().all(|v| v.is_finite()) || !forcing.is_finite()) {
                ok = false;
            }
            for &i in group {
                let d = derivative_component(i, &y, &forcing, coeffs);
                k[s][i] = d;
                let v = if s < 3 {
                    stage_point(x[i], d, dt)
                } else {
                    x[i] = rk4_combine(x[i], k[0][i], k[1][i], k[2][i], d, h);
                    x[i]
                };
                if !(d.is_finite() && v.is_finite()) {
                    ok = false;
                }
                output.store_as(me, i, v);
            }
            if !ok {
                fail(n);
            }
            rendezvous_point(&mut mark);
        }
        steps += 1;

        if shared.failed_step.load(Ordering::Acquire) <= n {
            break;
        }
        if grid.is_sample(n + 1, stride) {
            samples.extend(group.iter().map(|&i| x[i]));
        }
    }
    busy += mark.elapsed();

    WorkerOutput {
        stats: WorkerStats {
            worker: me,
            components: group.to_vec(),
            busy_time: busy.as_secs_f64(),
            rendezvous_wait_time: wait.as_secs_f64(),
            steps,
            stage_rendezvous_count: rendezvous,
            pinning,
        },
        samples,
    }
}
