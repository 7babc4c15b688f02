//! Frequency-domain reference solution.
//!
//! The model is linear, `x' = A x + B u`, and the track input is a sum of
//! two harmonics. After transients decay the response to each harmonic is
//! `Re(X e^{iwt})` with `X = (iwI - A)^{-1} B U`, where `U` carries the
//! per-wheel delays as phases `e^{-iw tau}`. Simulated trajectories are
//! checked against the superposition of both harmonics.

pub mod amplitude;
pub mod linalg;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrators::TimeSeries;
use crate::track::{excitation_frequency, TrackInput};
use crate::vehicle::{assemble_matrices, StateVector, VehicleParams, DOF, STATE_DIM, WHEELS};

pub use amplitude::{amplitude_from_series, AmplitudeReport};
pub use linalg::complex_solve;

const INPUTS: usize = 2 * WHEELS;

/// `x' = A x + B u` with `u = (eta_1..eta_4, eta'_1..eta'_4)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: [[f64; STATE_DIM]; STATE_DIM],
    pub b: [[f64; INPUTS]; STATE_DIM],
}

impl StateSpace {
    pub fn apply(&self, x: &[f64; STATE_DIM], u: &[f64; INPUTS]) -> [f64; STATE_DIM] {
        std::array::from_fn(|r| {
            let ax: f64 = (0..STATE_DIM).map(|c| self.a[r][c] * x[c]).sum();
            let bu: f64 = (0..INPUTS).map(|c| self.b[r][c] * u[c]).sum();
            ax + bu
        })
    }
}

/// First-order form of the second-order matrices: displacement of
/// coordinate `j` is state `2j`, its velocity `2j + 1`.
pub fn build_state_space(params: &VehicleParams) -> Result<StateSpace> {
    let m = assemble_matrices(params)?;
    let mut a = [[0.0; STATE_DIM]; STATE_DIM];
    let mut b = [[0.0; INPUTS]; STATE_DIM];
    for j in 0..DOF {
        let inertia = m.inertia[j][j];
        a[2 * j][2 * j + 1] = 1.0;
        for l in 0..DOF {
            a[2 * j + 1][2 * l] = -m.stiffness[j][l] / inertia;
            a[2 * j + 1][2 * l + 1] = -m.dissipative[j][l] / inertia;
        }
        for c in 0..INPUTS {
            b[2 * j + 1][c] = m.force_map[j][c] / inertia;
        }
    }
    Ok(StateSpace { a, b })
}

/// One harmonic of the input: `u(t) = Re(input e^{i w t})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicComponent {
    pub angular_frequency: f64,
    pub input: [Complex64; INPUTS],
}

impl HarmonicComponent {
    /// Input for a track harmonic `amplitude sin(w t)` seen by the four
    /// wheels with delays `tau`.
    pub fn delayed_sine(amplitude: f64, omega: f64, tau: &[f64; WHEELS]) -> Self {
        let i = Complex64::i();
        let mut input = [Complex64::new(0.0, 0.0); INPUTS];
        for w in 0..WHEELS {
            // sin(theta) = Re(-i e^{i theta})
            let eta = -i * amplitude * Complex64::from_polar(1.0, -omega * tau[w]);
            input[w] = eta;
            input[WHEELS + w] = i * omega * eta;
        }
        Self {
            angular_frequency: omega,
            input,
        }
    }

    /// Both harmonics of a bound track input.
    pub fn from_track(input: &TrackInput) -> Result<[HarmonicComponent; 2]> {
        let w = excitation_frequency(&input.profile)?;
        let tau = &input.delays.tau;
        Ok([
            Self::delayed_sine(input.profile.amp1, w, tau),
            Self::delayed_sine(input.profile.amp2, 3.0 * w, tau),
        ])
    }
}

/// Complex state amplitude `(i w I - A)^{-1} B U`.
pub fn resolvent_response(
    ss: &StateSpace,
    omega: f64,
    input: &[Complex64; INPUTS],
) -> Result<[Complex64; STATE_DIM]> {
    let m: Vec<Vec<Complex64>> = (0..STATE_DIM)
        .map(|r| {
            (0..STATE_DIM)
                .map(|c| {
                    let diag = if r == c { omega } else { 0.0 };
                    Complex64::new(-ss.a[r][c], diag)
                })
                .collect()
        })
        .collect();
    let rhs: Vec<Complex64> = (0..STATE_DIM)
        .map(|r| (0..INPUTS).map(|c| input[c] * ss.b[r][c]).sum())
        .collect();
    let y = complex_solve(m, rhs).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::ResonanceUndamped { omega },
        other => other,
    })?;
    Ok(std::array::from_fn(|i| y[i]))
}

/// Periodic steady-state trajectory as a sum of harmonics.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub harmonics: Vec<(f64, [Complex64; STATE_DIM])>,
}

impl SteadyState {
    pub fn evaluate(&self, t: f64) -> StateVector {
        let mut x = [0.0; STATE_DIM];
        for (omega, amp) in &self.harmonics {
            let phase = Complex64::from_polar(1.0, omega * t);
            for i in 0..STATE_DIM {
                x[i] += (amp[i] * phase).re;
            }
        }
        StateVector(x)
    }

    /// Amplitude of state `component` in harmonic `k`.
    pub fn amplitude(&self, k: usize, component: usize) -> f64 {
        self.harmonics[k].1[component].norm()
    }
}

pub fn steady_state_response(
    ss: &StateSpace,
    components: &[HarmonicComponent],
) -> Result<SteadyState> {
    let harmonics = components
        .iter()
        .map(|c| {
            Ok((
                c.angular_frequency,
                resolvent_response(ss, c.angular_frequency, &c.input)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SteadyState { harmonics })
}

/// Agreement between a simulated tail and the steady state for one state
/// component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailComparison {
    pub component: usize,
    /// Largest `|simulated - steady|` in the window.
    pub max_deviation: f64,
    /// Largest `|steady|` in the window.
    pub peak: f64,
}

impl TailComparison {
    pub fn relative(&self) -> f64 {
        if self.peak > 0.0 {
            self.max_deviation / self.peak
        } else if self.max_deviation == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Compares every sample with `t >= t_end - window` against `steady`.
pub fn compare_tail(
    series: &TimeSeries,
    steady: &SteadyState,
    window: f64,
) -> Result<[TailComparison; STATE_DIM]> {
    let t_end = *series.times.last().ok_or(Error::EmptySeries)?;
    let t_start = t_end - window;
    if series.times[0] > t_start {
        return Err(Error::InsufficientWindow {
            window: t_end - series.times[0],
            required: window,
        });
    }
    let mut out: [TailComparison; STATE_DIM] = std::array::from_fn(|component| TailComparison {
        component,
        max_deviation: 0.0,
        peak: 0.0,
    });
    for (t, x) in series.times.iter().zip(&series.states) {
        if *t < t_start {
            continue;
        }
        let reference = steady.evaluate(*t);
        for i in 0..STATE_DIM {
            out[i].max_deviation = out[i].max_deviation.max((x.0[i] - reference.0[i]).abs());
            out[i].peak = out[i].peak.max(reference.0[i].abs());
        }
    }
    Ok(out)
}
