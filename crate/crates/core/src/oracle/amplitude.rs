//! Amplitudes of a sampled trajectory over a trailing window.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::integrators::TimeSeries;

/// Minimum window, in fundamental periods.
pub const MIN_PERIODS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeReport {
    /// Length actually analysed: a whole number of fundamental periods, s.
    pub window: f64,
    pub mean: f64,
    /// `max |x - mean|` over the window.
    pub peak: f64,
    /// Amplitude of the projection onto `w`.
    pub fundamental: f64,
    /// Amplitude of the projection onto `3 w`.
    pub third: f64,
}

impl AmplitudeReport {
    /// The larger of the two harmonic amplitudes.
    pub fn dominant(&self) -> f64 {
        self.fundamental.max(self.third)
    }
}

/// Peak and harmonic amplitudes of one state component over the trailing
/// `window` seconds, trimmed to whole periods of `omega`.
pub fn amplitude_from_series(
    series: &TimeSeries,
    component: usize,
    window: f64,
    omega: f64,
) -> Result<AmplitudeReport> {
    let values = series.component(component);
    amplitude_of(&series.times, &values, window, omega)
}

/// Same as [`amplitude_from_series`] on raw columns.
pub fn amplitude_of(
    times: &[f64],
    values: &[f64],
    window: f64,
    omega: f64,
) -> Result<AmplitudeReport> {
    if times.is_empty() {
        return Err(Error::EmptySeries);
    }
    if times.len() != values.len() {
        return Err(Error::Dimension(format!(
            "{} times for {} values",
            times.len(),
            values.len()
        )));
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidProfile {
            field: "speed",
            reason: format!("harmonic analysis needs a positive frequency, got {omega}"),
        });
    }
    let period = 2.0 * PI / omega;
    let required = MIN_PERIODS * period;
    let span = times[times.len() - 1] - times[0];
    if window < required * (1.0 - 1e-12) || window > span * (1.0 + 1e-12) {
        return Err(Error::InsufficientWindow {
            window,
            required: required.max(window.min(span)),
        });
    }
    let whole = (window / period * (1.0 + 1e-12)).floor() * period;
    let t_end = times[times.len() - 1];
    let t_start = t_end - whole;
    let begin = times.partition_point(|&t| t <= t_start);

    // start exactly on t_start, interpolating when it falls between samples
    let mut ts = Vec::with_capacity(times.len() - begin + 1);
    let mut xs = Vec::with_capacity(ts.capacity());
    if begin > 0 && times[begin - 1] < t_start {
        let (ta, tb) = (times[begin - 1], times[begin]);
        let f = (t_start - ta) / (tb - ta);
        ts.push(t_start);
        xs.push(values[begin - 1] + f * (values[begin] - values[begin - 1]));
    } else if begin > 0 {
        ts.push(times[begin - 1]);
        xs.push(values[begin - 1]);
    }
    ts.extend_from_slice(&times[begin..]);
    xs.extend_from_slice(&values[begin..]);

    let measured = ts[ts.len() - 1] - ts[0];
    let integrate = |g: &dyn Fn(f64, f64) -> f64| -> f64 {
        ts.windows(2)
            .zip(xs.windows(2))
            .map(|(t, x)| 0.5 * (t[1] - t[0]) * (g(t[0], x[0]) + g(t[1], x[1])))
            .sum()
    };
    let mean = integrate(&|_, x| x) / measured;
    let project = |w: f64| {
        let c = 2.0 / measured * integrate(&|t, x| (x - mean) * (w * t).cos());
        let s = 2.0 / measured * integrate(&|t, x| (x - mean) * (w * t).sin());
        c.hypot(s)
    };
    let peak = xs.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    Ok(AmplitudeReport {
        window: measured,
        mean,
        peak,
        fundamental: project(omega),
        third: project(3.0 * omega),
    })
}
