//! Physical constants and the Γ-unit newtypes.
//!
//! Rates and detunings are angular frequencies in units of the D2 decay
//! rate. Simulation time is measured in 1/Γ.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::CoreError;

/// D2 line decay rate, 2π × 6.06 MHz, in s⁻¹.
pub const GAMMA_D2: f64 = 2.0 * PI * 6.06e6;
/// D2 wavelength used for the coupling standing wave (nm).
pub const LAMBDA_D2_NM: f64 = 780.0;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const EPSILON_0: f64 = 8.854_187_8128e-12;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// ⁸⁷Rb atomic mass (kg).
pub const MASS_RB87: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;
/// Reduced dipole element ⟨J=1/2‖er‖J'=3/2⟩ of the Rb D2 line (C·m).
pub const D2_REDUCED_DIPOLE: f64 = 3.584_198e-29;

/// Microseconds to simulation time (1/Γ).
pub fn us_to_gamma_time(us: f64) -> f64 {
    us * 1e-6 * GAMMA_D2
}

pub fn gamma_time_to_us(t: f64) -> f64 {
    t / (1e-6 * GAMMA_D2)
}

/// Angular frequency in Γ units to cyclic frequency in Hz.
pub fn gamma_units_to_hz(w: f64) -> f64 {
    w * GAMMA_D2 / (2.0 * PI)
}

/// Rabi amplitude in units of Γ. Nonnegative; phases live on the drive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct RabiFrequency(f64);

impl RabiFrequency {
    pub const ZERO: RabiFrequency = RabiFrequency(0.0);

    pub fn new(value: f64) -> Result<Self, CoreError> {
        if !value.is_finite() || value < 0.0 {
            return Err(CoreError::InvalidRabi(value));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Signed detuning in units of Γ.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct Detuning(f64);

impl Detuning {
    pub const ZERO: Detuning = Detuning(0.0);

    pub fn new(value: f64) -> Result<Self, CoreError> {
        if !value.is_finite() {
            return Err(CoreError::InvalidDetuning(value));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}
