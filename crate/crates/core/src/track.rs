//! Two-harmonic track irregularity and the transport-delayed wheel inputs.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{ForcingSample, VehicleParams, WHEELS};

/// Conversion factor between km/h and m/s.
pub const KMH_PER_MS: f64 = 3.6;

pub fn kmh_to_ms(kmh: f64) -> f64 {
    kmh / KMH_PER_MS
}

/// `eta(t) = amp1 sin(w t) + amp2 sin(3 w t)`, `w = 2 pi V / L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackProfile {
    /// First-harmonic amplitude, m.
    pub amp1: f64,
    /// Third-harmonic amplitude, m.
    pub amp2: f64,
    /// Irregularity wavelength, m.
    pub wavelength: f64,
    /// Vehicle speed, m/s.
    pub speed: f64,
}

impl Default for TrackProfile {
    fn default() -> Self {
        Self {
            amp1: 0.005,
            amp2: 0.002,
            wavelength: 25.0,
            speed: 20.0,
        }
    }
}

impl TrackProfile {
    pub fn validate(&self) -> Result<()> {
        let invalid = |field, reason: &str, value: f64| Error::InvalidProfile {
            field,
            reason: format!("{reason}, got {value}"),
        };
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(invalid(
                "wavelength",
                "must be finite and > 0",
                self.wavelength,
            ));
        }
        if !(self.speed.is_finite() && self.speed >= 0.0) {
            return Err(invalid("speed", "must be finite and >= 0", self.speed));
        }
        if !(self.amp1.is_finite() && self.amp1 >= 0.0) {
            return Err(invalid("amp1", "must be finite and >= 0", self.amp1));
        }
        if !(self.amp2.is_finite() && self.amp2 >= 0.0) {
            return Err(invalid("amp2", "must be finite and >= 0", self.amp2));
        }
        Ok(())
    }

    /// Same profile with every amplitude set to zero.
    pub fn flat(&self) -> Self {
        Self {
            amp1: 0.0,
            amp2: 0.0,
            ..*self
        }
    }
}

/// Angular frequency of the first harmonic, rad/s.
pub fn excitation_frequency(profile: &TrackProfile) -> Result<f64> {
    if !(profile.wavelength > 0.0) {
        return Err(Error::InvalidProfile {
            field: "wavelength",
            reason: format!("must be > 0, got {}", profile.wavelength),
        });
    }
    Ok(2.0 * PI * profile.speed / profile.wavelength)
}

fn omega(profile: &TrackProfile) -> f64 {
    2.0 * PI * profile.speed / profile.wavelength
}

/// Track height under a wheel at time `t`, m. Defined for all `t`.
pub fn profile_height(t: f64, profile: &TrackProfile) -> f64 {
    let w = omega(profile);
    profile.amp1 * (w * t).sin() + profile.amp2 * (3.0 * w * t).sin()
}

/// Analytic time derivative of [`profile_height`], m/s.
pub fn profile_rate(t: f64, profile: &TrackProfile) -> f64 {
    let w = omega(profile);
    profile.amp1 * w * (w * t).cos() + 3.0 * profile.amp2 * w * (3.0 * w * t).cos()
}

/// Transport delays of the four wheelsets relative to the leading one, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelDelays {
    pub tau: [f64; WHEELS],
}

impl WheelDelays {
    pub const NONE: Self = Self { tau: [0.0; WHEELS] };
}

/// `tau = (0, 2 a_b / V, 2 a_k / V, 2 (a_k + a_b) / V)`.
pub fn wheel_delays(params: &VehicleParams, profile: &TrackProfile) -> Result<WheelDelays> {
    let v = profile.speed;
    if v == 0.0 {
        return Err(Error::DelaysUndefined);
    }
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidProfile {
            field: "speed",
            reason: format!("must be finite and > 0 to compute delays, got {v}"),
        });
    }
    let (ak, ab) = (params.wagon_half_base, params.bogie_half_base);
    Ok(WheelDelays {
        tau: [0.0, 2.0 * ab / v, 2.0 * ak / v, 2.0 * (ak + ab) / v],
    })
}

/// Wheel inputs at time `t`: wheel `i` sees the profile at `t - tau_i`.
///
/// Wheels are ordered front and rear of bogie 1, then front and rear of
/// bogie 2.
pub fn wheel_forcing(t: f64, profile: &TrackProfile, delays: &WheelDelays) -> ForcingSample {
    let mut sample = ForcingSample::ZERO;
    for i in 0..WHEELS {
        let ti = t - delays.tau[i];
        sample.eta[i] = profile_height(ti, profile);
        sample.eta_rate[i] = profile_rate(ti, profile);
    }
    sample
}

/// Track input bound to a vehicle: profile plus the delays it induces.
///
/// A stationary vehicle or a flat profile produces zero input at all times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackInput {
    pub profile: TrackProfile,
    pub delays: WheelDelays,
}

impl TrackInput {
    pub fn new(params: &VehicleParams, profile: &TrackProfile) -> Result<Self> {
        profile.validate()?;
        let delays = if profile.speed == 0.0 {
            WheelDelays::NONE
        } else {
            wheel_delays(params, profile)?
        };
        let profile = if profile.speed == 0.0 {
            profile.flat()
        } else {
            *profile
        };
        Ok(Self { profile, delays })
    }

    #[inline]
    pub fn sample(&self, t: f64) -> ForcingSample {
        wheel_forcing(t, &self.profile, &self.delays)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_examples() {
        let p = TrackProfile::default();
        let w = excitation_frequency(&p).unwrap();
        assert!((w - 5.0265).abs() < 1e-4);
        assert_eq!((w * 1000.0).round() / 1000.0, 5.027);

        let still = TrackProfile { speed: 0.0, ..p };
        assert_eq!(excitation_frequency(&still).unwrap(), 0.0);

        let fast = TrackProfile {
            speed: kmh_to_ms(150.0),
            ..p
        };
        assert!((excitation_frequency(&fast).unwrap() - 10.472).abs() < 1e-3);

        let bad = TrackProfile {
            wavelength: 0.0,
            ..p
        };
        assert!(matches!(
            excitation_frequency(&bad),
            Err(Error::InvalidProfile {
                field: "wavelength",
                ..
            })
        ));
    }

    #[test]
    fn height_and_rate_examples() {
        let p = TrackProfile::default();
        assert_eq!(profile_height(0.0, &p), 0.0);
        // w t = pi / 2
        assert!((profile_height(0.3125, &p) - 0.003).abs() < 1e-12);
        let w = excitation_frequency(&p).unwrap();
        assert!((profile_rate(0.0, &p) - w * 0.011).abs() < 1e-15);
        assert!((profile_rate(0.0, &p) - 0.05529).abs() < 1e-5);
    }

    #[test]
    fn delay_examples() {
        let v = VehicleParams::default();
        let p = TrackProfile::default();
        let d = wheel_delays(&v, &p).unwrap();
        let want = [0.0, 0.15, 0.3725, 0.5225];
        for i in 0..WHEELS {
            assert!((d.tau[i] - want[i]).abs() < 1e-15);
        }

        let fast = TrackProfile { speed: 40.0, ..p };
        let d2 = wheel_delays(&v, &fast).unwrap();
        for i in 0..WHEELS {
            assert!((d2.tau[i] - d.tau[i] / 2.0).abs() < 1e-15);
        }

        let square = VehicleParams {
            bogie_half_base: 3.725,
            ..v
        };
        let d3 = wheel_delays(&square, &p).unwrap();
        assert_eq!(d3.tau[1], d3.tau[2]);

        let still = TrackProfile { speed: 0.0, ..p };
        assert_eq!(wheel_delays(&v, &still), Err(Error::DelaysUndefined));
    }

    #[test]
    fn forcing_examples() {
        let v = VehicleParams::default();
        let p = TrackProfile::default();
        let d = wheel_delays(&v, &p).unwrap();
        let s = wheel_forcing(0.0, &p, &d);
        assert_eq!(s.eta[0], 0.0);
        // -(0.005 sin(0.754) + 0.002 sin(2.262))
        assert!((s.eta[1] + 0.004_963_762).abs() < 1e-9);

        let flat = p.flat();
        let z = wheel_forcing(0.7, &flat, &d);
        assert_eq!(z, ForcingSample::ZERO);

        let period = 2.0 * PI / excitation_frequency(&p).unwrap();
        assert!((period - 1.25).abs() < 1e-12);
        let a = wheel_forcing(0.37, &p, &d);
        let b = wheel_forcing(0.37 + period, &p, &d);
        for i in 0..WHEELS {
            assert!((a.eta[i] - b.eta[i]).abs() < 1e-15);
            assert!((a.eta_rate[i] - b.eta_rate[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_vehicle_has_zero_input() {
        let v = VehicleParams::default();
        let p = TrackProfile {
            speed: 0.0,
            ..Default::default()
        };
        let input = TrackInput::new(&v, &p).unwrap();
        assert_eq!(input.sample(1.3), ForcingSample::ZERO);
    }

    #[test]
    fn profile_validation() {
        let p = TrackProfile {
            speed: -1.0,
            ..Default::default()
        };
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidProfile { field: "speed", .. })
        ));
    }
}
