//! Standing-wave coupling profile and lattice geometry.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::CoreError;
use crate::units::{RabiFrequency, LAMBDA_D2_NM};

/// Counter-propagating coupling beams. Node at `node_nm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandingWave {
    pub omega_max: RabiFrequency,
    pub omega_min: RabiFrequency,
    pub wavelength_nm: f64,
    pub node_nm: f64,
}

impl StandingWave {
    pub fn new(omega_max: f64, omega_min: f64) -> Result<Self, CoreError> {
        let sw = Self {
            omega_max: RabiFrequency::new(omega_max)?,
            omega_min: RabiFrequency::new(omega_min)?,
            wavelength_nm: LAMBDA_D2_NM,
            node_nm: 0.0,
        };
        sw.validate()?;
        Ok(sw)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.omega_min > self.omega_max {
            return Err(CoreError::param(
                "standing_wave.omega_min",
                "must not exceed omega_max",
            ));
        }
        if !(self.wavelength_nm > 0.0 && self.wavelength_nm.is_finite()) {
            return Err(CoreError::param("standing_wave.wavelength", "must be > 0"));
        }
        if !self.node_nm.is_finite() {
            return Err(CoreError::param("standing_wave.node", "must be finite"));
        }
        Ok(())
    }

    /// Same beams with an intensity imbalance: Ω_min = ratio·Ω_max.
    pub fn with_imbalance(&self, ratio: f64) -> Result<Self, CoreError> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(CoreError::param("repump.imbalance", "must lie in [0, 1]"));
        }
        Ok(Self {
            omega_min: RabiFrequency::new(ratio * self.omega_max.value())?,
            ..*self
        })
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength_nm
    }

    pub fn rabi_at(&self, x_nm: f64) -> RabiFrequency {
        standing_wave_rabi(self, x_nm)
    }
}

/// √(Ω_min² + (Ω_max² − Ω_min²)·sin²(k(x − x_node))).
pub fn standing_wave_rabi(sw: &StandingWave, x_nm: f64) -> RabiFrequency {
    let (hi, lo) = (sw.omega_max.value(), sw.omega_min.value());
    let s = (sw.wavenumber() * (x_nm - sw.node_nm)).sin();
    let v = (lo * lo + (hi * hi - lo * lo) * s * s).sqrt();
    RabiFrequency::new(v.clamp(lo, hi)).expect("bounded by valid amplitudes")
}

/// Trapping lattice at 3/2 of the D2 wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    pub lambda_lattice_nm: f64,
}

impl Default for LatticeGeometry {
    fn default() -> Self {
        Self {
            lambda_lattice_nm: 1.5 * LAMBDA_D2_NM,
        }
    }
}

impl LatticeGeometry {
    pub fn qubit_spacing_nm(&self) -> f64 {
        0.5 * self.lambda_lattice_nm
    }

    /// Sites at −spacing, 0, +spacing relative to the target.
    pub fn neighbor_offsets_nm(&self) -> [f64; 2] {
        let s = self.qubit_spacing_nm();
        [-s, s]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_and_antinode() {
        let sw = StandingWave::new(18.0, 0.0).unwrap();
        assert_eq!(sw.rabi_at(0.0).value(), 0.0);
        assert!((sw.rabi_at(LAMBDA_D2_NM / 4.0).value() - 18.0).abs() < 1e-12);
    }

    #[test]
    fn five_nm_from_node() {
        let sw = StandingWave::new(18.0, 0.0).unwrap();
        let v = sw.rabi_at(5.0).value();
        assert!((v - 18.0 * (2.0 * PI * 5.0 / 780.0).sin()).abs() < 1e-12);
        assert!((v - 0.724_79).abs() < 1e-5);
    }

    #[test]
    fn imbalance_sets_minimum() {
        let sw = StandingWave::new(10.0, 0.0).unwrap().with_imbalance(0.1).unwrap();
        assert!((sw.rabi_at(0.0).value() - 1.0).abs() < 1e-12);
        assert!(StandingWave::new(1.0, 2.0).is_err());
    }

    #[test]
    fn neighbors_sit_on_antinodes() {
        let lat = LatticeGeometry::default();
        assert_eq!(lat.qubit_spacing_nm(), 585.0);
        let sw = StandingWave::new(18.0, 0.0).unwrap();
        for x in lat.neighbor_offsets_nm() {
            assert!((sw.rabi_at(x).value() - 18.0).abs() < 1e-9);
        }
    }
}
