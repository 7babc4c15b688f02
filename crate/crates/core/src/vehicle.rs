//! Vertical dynamics of a wagon body carried by two bogies.
//!
//! Four degrees of freedom: bounce of each bogie (`z1`, `z2`), bounce of the
//! wagon body (`zk`) and its pitch (`phi`). Each bogie rests on two wheelsets
//! through the primary suspension (`c_b`, `b_b`); the body rests on the
//! bogies through the secondary suspension (`c_k`, `b_k`).
//!
//! Units are tonne, kN, metre and second throughout (1 kN = 1 t·m/s²), so
//! energies come out in kJ.
//!
//! The first-order system, with `n_i`/`n'_i` the wheel inputs, is
//!
//! ```text
//! D1 = x2
//! D2 = (b1 (n'1 + n'2 - 2 x2) + c1 (n1 + n2 - 2 x1) + b2 (x6 - x2 + a x8) + c2 (x5 - x1 + a x7)) / m1
//! D3 = x4
//! D4 = (b1 (n'3 + n'4 - 2 x4) + c1 (n3 + n4 - 2 x3) + b2 (x6 - x4 - a x8) + c2 (x5 - x3 - a x7)) / m1
//! D5 = x6
//! D6 = (b2 (x2 + x4 - 2 x6) + c2 (x1 + x3 - 2 x5)) / m2
//! D7 = x8
//! D8 = a / j2 (b2 (x2 - x4 - 2 a x8) + c2 (x1 - x3 - 2 a x7))
//! ```
//!
//! with `m1 = m_b`, `m2 = m_k`, `c1 = c_b`, `c2 = c_k`, `a = a_k`, `j2 = J_k`
//! and, under [`DampingAliases::Physical`], `b1 = b_b`, `b2 = b_k`.
//!
//! The equivalent flat second-order equations are
//!
//! ```text
//! m_k zk''  + b_k (2 zk' - z1' - z2') + c_k (2 zk - z1 - z2) = 0
//! J_k phi'' + a_k b_k (2 a_k phi' - z1' + z2') + a_k c_k (2 a_k phi - z1 + z2) = 0
//! m_b z1''  - b_k (zk' - z1' + a_k phi') - c_k (zk - z1 + a_k phi) + 2 b_b z1' + 2 c_b z1
//!           = b_b (n'1 + n'2) + c_b (n1 + n2)
//! m_b z2''  - b_k (zk' - z2' - a_k phi') - c_k (zk - z2 - a_k phi) + 2 b_b z2' + 2 c_b z2
//!           = b_b (n'3 + n'4) + c_b (n3 + n4)
//! ```
//!
//! Every code path derives from the first-order form; the flat equations
//! are documentation only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of first-order state components.
pub const STATE_DIM: usize = 8;
/// Number of second-order generalized coordinates.
pub const DOF: usize = 4;
/// Number of wheelsets.
pub const WHEELS: usize = 4;

/// How the damping coefficients are bound to the two damping slots of the
/// first-order equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingAliases {
    /// Rail coupling uses `b_b`, body coupling uses `b_k`. Each spring keeps
    /// its own damper.
    #[default]
    Physical,
    /// Swapped binding (`b1 = b_k`, `b2 = b_b`), kept for comparison runs.
    Swapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// Wagon body mass, t.
    pub wagon_mass: f64,
    /// Wagon body pitch inertia, t·m².
    pub wagon_inertia: f64,
    /// Bogie mass, t.
    pub bogie_mass: f64,
    /// Half distance between bogie centres, m.
    pub wagon_half_base: f64,
    /// Half distance between the wheelsets of a bogie, m.
    pub bogie_half_base: f64,
    /// Bogie–rail stiffness per wheelset, kN/m.
    pub primary_stiffness: f64,
    /// Bogie–rail damping per wheelset, kN·s/m.
    pub primary_damping: f64,
    /// Wagon–bogie stiffness per bogie, kN/m.
    pub secondary_stiffness: f64,
    /// Wagon–bogie damping per bogie, kN·s/m.
    pub secondary_damping: f64,
    pub damping_aliases: DampingAliases,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wagon_mass: 57.0,
            wagon_inertia: 70.0,
            bogie_mass: 9.0,
            wagon_half_base: 3.725,
            bogie_half_base: 1.5,
            primary_stiffness: 3040.0,
            primary_damping: 30.0,
            secondary_stiffness: 2660.0,
            secondary_damping: 100.0,
            damping_aliases: DampingAliases::Physical,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wagon_mass", self.wagon_mass),
            ("wagon_inertia", self.wagon_inertia),
            ("bogie_mass", self.bogie_mass),
            ("wagon_half_base", self.wagon_half_base),
            ("bogie_half_base", self.bogie_half_base),
            ("primary_stiffness", self.primary_stiffness),
            ("secondary_stiffness", self.secondary_stiffness),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams {
                    field,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        let non_negative = [
            ("primary_damping", self.primary_damping),
            ("secondary_damping", self.secondary_damping),
        ];
        for (field, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParams {
                    field,
                    reason: format!("must be finite and >= 0, got {value}"),
                });
            }
        }
        Ok(())
    }

    /// Coefficients as they appear in the first-order equations.
    pub fn coefficients(&self) -> Coefficients {
        let (b1, b2) = match self.damping_aliases {
            DampingAliases::Physical => (self.primary_damping, self.secondary_damping),
            DampingAliases::Swapped => (self.secondary_damping, self.primary_damping),
        };
        Coefficients {
            m1: self.bogie_mass,
            m2: self.wagon_mass,
            j2: self.wagon_inertia,
            a2: self.wagon_half_base,
            c1: self.primary_stiffness,
            c2: self.secondary_stiffness,
            b1,
            b2,
        }
    }
}

/// Parameter bindings of the first-order equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub m1: f64,
    pub m2: f64,
    pub j2: f64,
    pub a2: f64,
    pub c1: f64,
    pub c2: f64,
    pub b1: f64,
    pub b2: f64,
}

/// `x1..x8 = (z1, z1', z2, z2', zk, zk', phi, phi')`, stored zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl StateVector {
    pub const ZERO: Self = Self([0.0; STATE_DIM]);

    /// Column names used in CSV output, in state order.
    pub const NAMES: [&'static str; STATE_DIM] =
        ["z1", "z1dot", "z2", "z2dot", "zk", "zkdot", "phi", "phidot"];

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn z1(&self) -> f64 {
        self.0[0]
    }
    pub fn z2(&self) -> f64 {
        self.0[2]
    }
    pub fn zk(&self) -> f64 {
        self.0[4]
    }
    pub fn phi(&self) -> f64 {
        self.0[6]
    }
}

impl From<[f64; STATE_DIM]> for StateVector {
    fn from(v: [f64; STATE_DIM]) -> Self {
        Self(v)
    }
}

/// Track input seen by the four wheelsets: displacements and their rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForcingSample {
    pub eta: [f64; WHEELS],
    pub eta_rate: [f64; WHEELS],
}

impl ForcingSample {
    pub const ZERO: Self = Self {
        eta: [0.0; WHEELS],
        eta_rate: [0.0; WHEELS],
    };

    pub fn is_finite(&self) -> bool {
        self.eta.iter().chain(&self.eta_rate).all(|v| v.is_finite())
    }

    /// Input vector `(eta_1..eta_4, eta'_1..eta'_4)`.
    pub fn as_input(&self) -> [f64; 2 * WHEELS] {
        let mut u = [0.0; 2 * WHEELS];
        u[..WHEELS].copy_from_slice(&self.eta);
        u[WHEELS..].copy_from_slice(&self.eta_rate);
        u
    }

    pub fn from_input(u: &[f64; 2 * WHEELS]) -> Self {
        let mut f = Self::ZERO;
        f.eta.copy_from_slice(&u[..WHEELS]);
        f.eta_rate.copy_from_slice(&u[WHEELS..]);
        f
    }
}

/// Second-order form `I q'' + D q' + S q = F u` with `q = (z1, z2, zk, phi)`
/// and `u = (eta_1..eta_4, eta'_1..eta'_4)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub inertia: [[f64; DOF]; DOF],
    pub dissipative: [[f64; DOF]; DOF],
    pub stiffness: [[f64; DOF]; DOF],
    pub force_map: [[f64; 2 * WHEELS]; DOF],
}

/// One component of the time derivative.
///
/// Both the sequential and the parallel integrators evaluate the system
/// through this function, which keeps their arithmetic identical.
#[inline]
pub fn derivative_component(
    index: usize,
    x: &[f64; STATE_DIM],
    forcing: &ForcingSample,
    k: &Coefficients,
) -> f64 {
    let n = &forcing.eta;
    let nd = &forcing.eta_rate;
    match index {
        0 => x[1],
        1 => {
            (k.b1 * (nd[0] + nd[1] - 2.0 * x[1])
                + k.c1 * (n[0] + n[1] - 2.0 * x[0])
                + k.b2 * (x[5] - x[1] + k.a2 * x[7])
                + k.c2 * (x[4] - x[0] + k.a2 * x[6]))
                / k.m1
        }
        2 => x[3],
        3 => {
            (k.b1 * (nd[2] + nd[3] - 2.0 * x[3])
                + k.c1 * (n[2] + n[3] - 2.0 * x[2])
                + k.b2 * (x[5] - x[3] - k.a2 * x[7])
                + k.c2 * (x[4] - x[2] - k.a2 * x[6]))
                / k.m1
        }
        4 => x[5],
        5 => (k.b2 * (x[1] + x[3] - 2.0 * x[5]) + k.c2 * (x[0] + x[2] - 2.0 * x[4])) / k.m2,
        6 => x[7],
        7 => {
            k.a2 / k.j2
                * (k.b2 * (x[1] - x[3] - 2.0 * x[7] * k.a2)
                    + k.c2 * (x[0] - x[2] - 2.0 * x[6] * k.a2))
        }
        _ => panic!("state index {index} out of range"),
    }
}

/// Time derivative of the state. Rejects non-finite state or forcing.
pub fn derivative(
    state: &StateVector,
    forcing: &ForcingSample,
    params: &VehicleParams,
) -> Result<StateVector> {
    derivative_with(state, forcing, &params.coefficients())
}

pub(crate) fn derivative_with(
    state: &StateVector,
    forcing: &ForcingSample,
    k: &Coefficients,
) -> Result<StateVector> {
    if !state.is_finite() || !forcing.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let mut d = [0.0; STATE_DIM];
    for (i, slot) in d.iter_mut().enumerate() {
        *slot = derivative_component(i, &state.0, forcing, k);
    }
    Ok(StateVector(d))
}

pub fn assemble_matrices(params: &VehicleParams) -> Result<SystemMatrices> {
    params.validate()?;
    let k = params.coefficients();
    let a = k.a2;

    let inertia = diag([k.m1, k.m1, k.m2, k.j2]);
    let coupling = |primary: f64, secondary: f64| {
        [
            [2.0 * primary + secondary, 0.0, -secondary, -a * secondary],
            [0.0, 2.0 * primary + secondary, -secondary, a * secondary],
            [-secondary, -secondary, 2.0 * secondary, 0.0],
            [-a * secondary, a * secondary, 0.0, 2.0 * a * a * secondary],
        ]
    };
    let mut force_map = [[0.0; 2 * WHEELS]; DOF];
    // wheels 1, 2 under bogie 1; wheels 3, 4 under bogie 2
    for (row, wheels) in [(0, [0, 1]), (1, [2, 3])] {
        for w in wheels {
            force_map[row][w] = k.c1;
            force_map[row][WHEELS + w] = k.b1;
        }
    }

    Ok(SystemMatrices {
        inertia,
        dissipative: coupling(k.b1, k.b2),
        stiffness: coupling(k.c1, k.c2),
        force_map,
    })
}

fn diag(d: [f64; DOF]) -> [[f64; DOF]; DOF] {
    let mut m = [[0.0; DOF]; DOF];
    for i in 0..DOF {
        m[i][i] = d[i];
    }
    m
}

/// Kinetic energy plus the potential energy stored in all springs, kJ.
pub fn mechanical_energy(
    state: &StateVector,
    forcing: &ForcingSample,
    params: &VehicleParams,
) -> f64 {
    let x = &state.0;
    let n = &forcing.eta;
    let (mb, mk, jk) = (params.bogie_mass, params.wagon_mass, params.wagon_inertia);
    let (cb, ck, ak) = (
        params.primary_stiffness,
        params.secondary_stiffness,
        params.wagon_half_base,
    );
    let kinetic =
        0.5 * mb * (x[1] * x[1] + x[3] * x[3]) + 0.5 * mk * x[5] * x[5] + 0.5 * jk * x[7] * x[7];
    let primary = 0.5
        * cb
        * ((n[0] - x[0]).powi(2)
            + (n[1] - x[0]).powi(2)
            + (n[2] - x[2]).powi(2)
            + (n[3] - x[2]).powi(2));
    let secondary =
        0.5 * ck * ((x[4] + ak * x[6] - x[0]).powi(2) + (x[4] - ak * x[6] - x[2]).powi(2));
    kinetic + primary + secondary
}

/// Rate of change of [`mechanical_energy`] under free motion (no track input).
pub fn free_energy_rate(state: &StateVector, params: &VehicleParams) -> f64 {
    let x = &state.0;
    let (bb, bk, ak) = (
        params.primary_damping,
        params.secondary_damping,
        params.wagon_half_base,
    );
    -(bb * (2.0 * x[1] * x[1] + 2.0 * x[3] * x[3])
        + bk * ((x[5] + ak * x[7] - x[1]).powi(2) + (x[5] - ak * x[7] - x[3]).powi(2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(i: usize, v: f64) -> StateVector {
        let mut s = StateVector::ZERO;
        s.0[i] = v;
        s
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn defaults() {
        let p = VehicleParams::default();
        assert_eq!(p.wagon_mass, 57.0);
        assert_eq!(p.wagon_inertia, 70.0);
        assert_eq!(p.bogie_mass, 9.0);
        assert_eq!(p.wagon_half_base, 3.725);
        assert_eq!(p.bogie_half_base, 1.5);
        assert_eq!(p.primary_stiffness, 3040.0);
        assert_eq!(p.primary_damping, 30.0);
        assert_eq!(p.secondary_stiffness, 2660.0);
        assert_eq!(p.secondary_damping, 100.0);
        p.validate().unwrap();
    }

    #[test]
    fn equilibrium() {
        let p = VehicleParams::default();
        let d = derivative(&StateVector::ZERO, &ForcingSample::ZERO, &p).unwrap();
        assert_eq!(d, StateVector::ZERO);
    }

    #[test]
    fn wagon_bounce_unit_displacement() {
        let p = VehicleParams::default();
        let d = derivative(&unit(4, 1.0), &ForcingSample::ZERO, &p).unwrap();
        assert!(close(d.0[5], -93.333_333, 1e-5));
        assert!(close(d.0[1], 295.555_556, 1e-5));
        assert!(close(d.0[3], 295.555_556, 1e-5));
        assert_eq!(d.0[7], 0.0);
    }

    #[test]
    fn bogie_unit_displacement() {
        let p = VehicleParams::default();
        let d = derivative(&unit(0, 1.0), &ForcingSample::ZERO, &p).unwrap();
        assert!(close(d.0[1], -971.111_111, 1e-5));
        assert!(close(d.0[7], 141.55, 1e-9));
    }

    #[test]
    fn rejects_non_finite() {
        let p = VehicleParams::default();
        let err = derivative(&unit(3, f64::NAN), &ForcingSample::ZERO, &p).unwrap_err();
        assert_eq!(err, Error::NonFiniteInput);
        let mut f = ForcingSample::ZERO;
        f.eta_rate[2] = f64::INFINITY;
        assert_eq!(
            derivative(&StateVector::ZERO, &f, &p).unwrap_err(),
            Error::NonFiniteInput
        );
    }

    #[test]
    fn parameter_validation() {
        let mut p = VehicleParams::default();
        p.bogie_mass = 0.0;
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidParams {
                field: "bogie_mass",
                ..
            })
        ));
        let mut p = VehicleParams::default();
        p.secondary_damping = -1.0;
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidParams {
                field: "secondary_damping",
                ..
            })
        ));
        let mut p = VehicleParams::default();
        p.primary_damping = 0.0;
        p.validate().unwrap();
    }

    #[test]
    fn matrices_at_defaults() {
        let m = assemble_matrices(&VehicleParams::default()).unwrap();
        assert_eq!(m.inertia, diag([9.0, 9.0, 57.0, 70.0]));
        assert_eq!(m.stiffness[2][2], 2.0 * 2660.0);
        for i in 0..DOF {
            for j in 0..DOF {
                assert_eq!(m.stiffness[i][j], m.stiffness[j][i]);
                assert_eq!(m.dissipative[i][j], m.dissipative[j][i]);
            }
        }
    }

    #[test]
    fn zero_damping_gives_zero_dissipation() {
        let p = VehicleParams {
            primary_damping: 0.0,
            secondary_damping: 0.0,
            ..Default::default()
        };
        let m = assemble_matrices(&p).unwrap();
        assert_eq!(m.dissipative, [[0.0; DOF]; DOF]);
    }

    #[test]
    fn energy_examples() {
        let p = VehicleParams::default();
        let z = ForcingSample::ZERO;
        assert_eq!(mechanical_energy(&StateVector::ZERO, &z, &p), 0.0);
        assert!(close(mechanical_energy(&unit(1, 1.0), &z, &p), 4.5, 1e-12));
        assert!(close(
            mechanical_energy(&unit(0, 0.01), &z, &p),
            0.437,
            1e-12
        ));
    }

    #[test]
    fn swapped_aliases_exchange_dampers() {
        let p = VehicleParams {
            damping_aliases: DampingAliases::Swapped,
            ..Default::default()
        };
        let k = p.coefficients();
        assert_eq!((k.b1, k.b2), (100.0, 30.0));
        let k = VehicleParams::default().coefficients();
        assert_eq!((k.b1, k.b2), (30.0, 100.0));
    }
}
