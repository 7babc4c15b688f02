//! Sequential integrators: classic fixed-step RK4 and the Dormand–Prince
//! 4(5) embedded pair with step-size control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::track::TrackInput;
use crate::vehicle::{
    derivative_with, Coefficients, ForcingSample, StateVector, VehicleParams, STATE_DIM,
};

/// The vehicle equations bound to a track input.
#[derive(Debug, Clone, Copy)]
pub struct VehicleSystem {
    pub params: VehicleParams,
    pub coefficients: Coefficients,
    pub input: TrackInput,
}

impl VehicleSystem {
    pub fn new(params: &VehicleParams, input: TrackInput) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params: *params,
            coefficients: params.coefficients(),
            input,
        })
    }

    #[inline]
    pub fn forcing(&self, t: f64) -> ForcingSample {
        self.input.sample(t)
    }

    pub fn eval(&self, t: f64, x: &[f64; STATE_DIM]) -> Result<[f64; STATE_DIM]> {
        let forcing = self.forcing(t);
        derivative_with(&StateVector(*x), &forcing, &self.coefficients).map(|d| d.0)
    }
}

/// Adaptive step control settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub safety: f64,
    /// Lower clamp on the step-size factor.
    pub shrink: f64,
    /// Upper clamp on the step-size factor.
    pub growth: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-6,
            h_init: 1e-3,
            h_min: 1e-12,
            h_max: 0.1,
            safety: 0.9,
            shrink: 0.2,
            growth: 5.0,
        }
    }
}

impl StepControl {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidStepControl(msg));
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return bad(format!(
                "tolerances must be > 0 (abs_tol = {}, rel_tol = {})",
                self.abs_tol, self.rel_tol
            ));
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return bad(format!(
                "need 0 < h_min <= h_init <= h_max (got {}, {}, {})",
                self.h_min, self.h_init, self.h_max
            ));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0 && self.growth > 1.0) {
            return bad(format!(
                "need 0 < shrink < 1 < growth (got {}, {})",
                self.shrink, self.growth
            ));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad(format!("safety must be in (0, 1], got {}", self.safety));
        }
        Ok(())
    }
}

/// Sampled trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub forcings: Vec<ForcingSample>,
    pub sample_stride: usize,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&StateVector> {
        self.states.last()
    }

    /// One state component as a column.
    pub fn component(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.0[index]).collect()
    }

    /// Largest absolute difference over all samples and components, or
    /// `None` when the time grids differ.
    pub fn max_abs_diff(&self, other: &TimeSeries) -> Option<f64> {
        if self.times != other.times {
            return None;
        }
        let mut worst = 0.0f64;
        for (a, b) in self.states.iter().zip(&other.states) {
            for i in 0..STATE_DIM {
                worst = worst.max((a.0[i] - b.0[i]).abs());
            }
        }
        Some(worst)
    }
}

/// Stage point `x + dt k`, shared with the parallel engine.
#[inline(always)]
pub(crate) fn stage_point(x: f64, k: f64, dt: f64) -> f64 {
    x + dt * k
}

/// RK4 update of one component, shared with the parallel engine.
#[inline(always)]
pub(crate) fn rk4_combine(x: f64, k1: f64, k2: f64, k3: f64, k4: f64, h: f64) -> f64 {
    x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
}

/// One classic RK4 step.
///
/// A non-finite stage yields [`Error::Diverged`] with `step = 0`; callers
/// that track step indices replace it.
pub fn rk4_step<const N: usize, F>(mut f: F, t: f64, x: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let diverged = |_| Error::Diverged { step: 0, time: t };
    let half = 0.5 * h;
    let t_mid = t + half;
    let t_end = t + h;

    let k1 = f(t, x).map_err(diverged)?;
    check_finite(&k1, t)?;
    let y2: [f64; N] = std::array::from_fn(|i| stage_point(x[i], k1[i], half));
    let k2 = f(t_mid, &y2).map_err(diverged)?;
    check_finite(&k2, t)?;
    let y3: [f64; N] = std::array::from_fn(|i| stage_point(x[i], k2[i], half));
    let k3 = f(t_mid, &y3).map_err(diverged)?;
    check_finite(&k3, t)?;
    let y4: [f64; N] = std::array::from_fn(|i| stage_point(x[i], k3[i], h));
    let k4 = f(t_end, &y4).map_err(diverged)?;
    check_finite(&k4, t)?;

    let next: [f64; N] = std::array::from_fn(|i| rk4_combine(x[i], k1[i], k2[i], k3[i], k4[i], h));
    check_finite(&next, t)?;
    Ok(next)
}

fn check_finite<const N: usize>(v: &[f64; N], t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { step: 0, time: t })
    }
}

/// Uniform step grid over `[t0, t1]`; the last step is shortened so the grid
/// lands on `t1` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StepGrid {
    pub t0: f64,
    pub t1: f64,
    pub h: f64,
    pub steps: usize,
}

impl StepGrid {
    pub fn new(t0: f64, t1: f64, h: f64) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && h.is_finite() && t1 > t0 && h > 0.0) {
            return Err(Error::InvalidSpan { t0, t1, h });
        }
        // absorb representation error so that e.g. 10 / 1e-3 is 10000 steps
        let steps = ((t1 - t0) / h * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok(Self { t0, t1, h, steps })
    }

    /// Start time of step `n`.
    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        if n >= self.steps {
            self.t1
        } else {
            self.t0 + n as f64 * self.h
        }
    }

    /// Length of step `n`.
    #[inline]
    pub fn step_len(&self, n: usize) -> f64 {
        if n + 1 == self.steps {
            self.t1 - self.time(n)
        } else {
            self.h
        }
    }

    /// Whether the state after `n` steps is recorded.
    #[inline]
    pub fn is_sample(&self, n: usize, stride: usize) -> bool {
        n % stride == 0 || n == self.steps
    }

    pub fn sample_count(&self, stride: usize) -> usize {
        (0..=self.steps)
            .filter(|&n| self.is_sample(n, stride))
            .count()
    }
}

/// Fixed-step RK4 trajectory of a generic system, sampled every `stride`
/// steps plus the final state.
pub fn rk4_fixed<const N: usize, F>(
    mut f: F,
    x0: &[f64; N],
    t0: f64,
    t1: f64,
    h: f64,
    stride: usize,
) -> Result<(Vec<f64>, Vec<[f64; N]>)>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let grid = StepGrid::new(t0, t1, h)?;
    let stride = stride.max(1);
    let mut times = Vec::with_capacity(grid.sample_count(stride));
    let mut states = Vec::with_capacity(times.capacity());
    let mut x = *x0;
    times.push(t0);
    states.push(x);
    for n in 0..grid.steps {
        let t = grid.time(n);
        x = rk4_step(&mut f, t, &x, grid.step_len(n))
            .map_err(|_| Error::Diverged { step: n, time: t })?;
        if grid.is_sample(n + 1, stride) {
            times.push(grid.time(n + 1));
            states.push(x);
        }
    }
    Ok((times, states))
}

/// Fixed-step RK4 integration of the vehicle, forcing evaluated analytically
/// at every stage time.
pub fn integrate_fixed(
    system: &VehicleSystem,
    x0: &StateVector,
    t0: f64,
    t1: f64,
    h: f64,
    stride: usize,
) -> Result<TimeSeries> {
    let (times, states) = rk4_fixed(|t, x| system.eval(t, x), &x0.0, t0, t1, h, stride)?;
    Ok(assemble_series(system, times, states, stride.max(1)))
}

pub(crate) fn assemble_series(
    system: &VehicleSystem,
    times: Vec<f64>,
    states: Vec<[f64; STATE_DIM]>,
    stride: usize,
) -> TimeSeries {
    let forcings = times.iter().map(|&t| system.forcing(t)).collect();
    TimeSeries {
        times,
        states: states.into_iter().map(StateVector).collect(),
        forcings,
        sample_stride: stride,
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// fifth-order weights, also the last stage row (FSAL)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Bookkeeping from an adaptive run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptiveStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Error norm of every accepted step, in order.
    pub accepted_norms: Vec<f64>,
}

impl AdaptiveStats {
    pub fn max_accepted_norm(&self) -> f64 {
        self.accepted_norms.iter().copied().fold(0.0, f64::max)
    }
}

/// Dormand–Prince 4(5) integration of a generic system. Returns the accepted
/// step times and states (initial state included).
pub fn dopri45<const N: usize, F>(
    mut f: F,
    x0: &[f64; N],
    t0: f64,
    t1: f64,
    ctrl: &StepControl,
) -> Result<(Vec<f64>, Vec<[f64; N]>, AdaptiveStats)>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    ctrl.validate()?;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::InvalidSpan {
            t0,
            t1,
            h: ctrl.h_init,
        });
    }

    let mut stats = AdaptiveStats::default();
    let mut times = vec![t0];
    let mut states = vec![*x0];
    let mut t = t0;
    let mut x = *x0;
    let mut h = ctrl.h_init.min(t1 - t0);
    let mut k1 = f(t, &x).map_err(|_| Error::Diverged { step: 0, time: t })?;
    stats.evaluations += 1;

    let combine = |x: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]| -> [f64; N] {
        std::array::from_fn(|i| {
            let mut acc = 0.0;
            for (c, k) in terms {
                acc += c * k[i];
            }
            x[i] + h * acc
        })
    };

    while t < t1 {
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }

        let attempt = (|| -> Option<([f64; N], [f64; N], f64)> {
            let mut eval = |tt: f64, y: &[f64; N]| -> Option<[f64; N]> {
                let k = f(tt, y).ok()?;
                k.iter().all(|v| v.is_finite()).then_some(k)
            };
            let k2 = eval(t + C2 * h, &combine(&x, h, &[(A21, &k1)]))?;
            let k3 = eval(t + C3 * h, &combine(&x, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = eval(
                t + C4 * h,
                &combine(&x, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            )?;
            let k5 = eval(
                t + C5 * h,
                &combine(&x, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = eval(
                t + h,
                &combine(
                    &x,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            )?;
            let x_new = combine(
                &x,
                h,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            let k7 = eval(t + h, &x_new)?;
            let mut norm = 0.0f64;
            for i in 0..N {
                let err = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = ctrl.abs_tol + ctrl.rel_tol * x[i].abs().max(x_new[i].abs());
                norm = norm.max(err.abs() / scale);
            }
            norm.is_finite().then_some((x_new, k7, norm))
        })();
        stats.evaluations += 6;

        match attempt {
            Some((x_new, k7, norm)) if norm <= 1.0 => {
                stats.accepted += 1;
                stats.accepted_norms.push(norm);
                t = if last { t1 } else { t + h };
                x = x_new;
                k1 = k7;
                times.push(t);
                states.push(x);
                let factor = if norm == 0.0 {
                    ctrl.growth
                } else {
                    (ctrl.safety * norm.powf(-0.2)).clamp(ctrl.shrink, ctrl.growth)
                };
                h = (h * factor).min(ctrl.h_max);
            }
            outcome => {
                stats.rejected += 1;
                let norm = outcome.map_or(f64::INFINITY, |(_, _, n)| n);
                let factor = if norm.is_finite() {
                    (ctrl.safety * norm.powf(-0.2)).clamp(ctrl.shrink, 1.0)
                } else {
                    ctrl.shrink
                };
                let next = h * factor;
                if next < ctrl.h_min {
                    return Err(Error::StepSizeUnderflow {
                        time: t,
                        step: next,
                        h_min: ctrl.h_min,
                        error_norm: norm,
                        accepted: stats.accepted,
                        rejected: stats.rejected,
                    });
                }
                h = next;
            }
        }
    }
    Ok((times, states, stats))
}

/// Adaptive integration of the vehicle; samples at every accepted step.
pub fn integrate_adaptive(
    system: &VehicleSystem,
    x0: &StateVector,
    t0: f64,
    t1: f64,
    ctrl: &StepControl,
) -> Result<(TimeSeries, AdaptiveStats)> {
    let (times, states, stats) = dopri45(|t, x| system.eval(t, x), &x0.0, t0, t1, ctrl)?;
    Ok((assemble_series(system, times, states, 1), stats))
}
