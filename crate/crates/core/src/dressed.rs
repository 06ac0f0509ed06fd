//! Three-level Λ analytics: mixing angles, dark state, dressed eigensystem.
//!
//! Basis order is (|a⟩, |b⟩, |e⟩). The Hamiltonian is written in angular
//! frequency units with off-diagonal couplings −Ω/2, rotating-frame energies
//! E_a = 0, E_b = Δ₁ − Δ₂, E_e = Δ₁. With these signs the bright dressed
//! states carry a minus sign on |e⟩ relative to the usual textbook form; the
//! dark state is unaffected.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::units::{Detuning, RabiFrequency};

pub type StateVector3 = Vector3<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingAngles {
    pub theta: f64,
    pub phi: f64,
}

/// Dressed states over (|a⟩, |b⟩, |e⟩).
#[derive(Debug, Clone, PartialEq)]
pub struct DressedStates {
    pub a_plus: StateVector3,
    pub a_zero: StateVector3,
    pub a_minus: StateVector3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DressedEigensystem {
    pub states: DressedStates,
    /// Eigenvalues of (a⁺, a⁰, a⁻), in Γ units.
    pub eigenvalues: [f64; 3],
}

pub fn mixing_angles(
    omega_p: RabiFrequency,
    omega_c: RabiFrequency,
    delta1: Detuning,
) -> Result<MixingAngles, CoreError> {
    let (p, c) = (omega_p.value(), omega_c.value());
    if p == 0.0 && c == 0.0 {
        return Err(CoreError::DegenerateDrive);
    }
    let theta = p.atan2(c);
    let phi = 0.5 * p.hypot(c).atan2(delta1.value());
    Ok(MixingAngles { theta, phi })
}

/// cos θ|a⟩ − sin θ|b⟩.
pub fn dark_state(
    omega_p: RabiFrequency,
    omega_c: RabiFrequency,
) -> Result<StateVector3, CoreError> {
    let MixingAngles { theta, .. } = mixing_angles(omega_p, omega_c, Detuning::ZERO)?;
    Ok(real_vector(theta.cos(), -theta.sin(), 0.0))
}

/// Population of |b⟩ in the dark state, Ω_P²/(Ω_P²+Ω_C²).
pub fn dark_state_b_population(
    omega_p: RabiFrequency,
    omega_c: RabiFrequency,
) -> Result<f64, CoreError> {
    Ok(dark_state(omega_p, omega_c)?[1].norm_sqr())
}

pub fn hamiltonian(
    omega_p: RabiFrequency,
    omega_c: RabiFrequency,
    delta1: Detuning,
    delta2: Detuning,
) -> Matrix3<f64> {
    let (p, c) = (omega_p.value(), omega_c.value());
    let (d1, d2) = (delta1.value(), delta2.value());
    Matrix3::new(
        0.0,
        0.0,
        -0.5 * p,
        0.0,
        d1 - d2,
        -0.5 * c,
        -0.5 * p,
        -0.5 * c,
        d1,
    )
}

pub fn dressed_eigensystem(
    omega_p: RabiFrequency,
    omega_c: RabiFrequency,
    delta1: Detuning,
    delta2: Detuning,
) -> Result<DressedEigensystem, CoreError> {
    if delta1 == delta2 {
        analytic_eigensystem(omega_p, omega_c, delta1)
    } else {
        Ok(numeric_eigensystem(&hamiltonian(
            omega_p, omega_c, delta1, delta2,
        )))
    }
}

fn analytic_eigensystem(
    omega_p: RabiFrequency,
    omega_c: RabiFrequency,
    delta1: Detuning,
) -> Result<DressedEigensystem, CoreError> {
    let MixingAngles { theta, phi } = mixing_angles(omega_p, omega_c, delta1)?;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let d1 = delta1.value();
    let rms = omega_p.value().hypot(omega_c.value());
    let root = d1.hypot(rms);
    Ok(DressedEigensystem {
        states: DressedStates {
            a_plus: real_vector(st * sp, ct * sp, -cp),
            a_zero: real_vector(ct, -st, 0.0),
            a_minus: real_vector(st * cp, ct * cp, sp),
        },
        eigenvalues: [0.5 * (d1 + root), 0.0, 0.5 * (d1 - root)],
    })
}

/// Diagonalizes a real symmetric 3×3 Hamiltonian, descending eigenvalues.
pub fn numeric_eigensystem(h: &Matrix3<f64>) -> DressedEigensystem {
    let eig = SymmetricEigen::new(*h);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vec = |k: usize| {
        let col = eig.eigenvectors.column(order[k]);
        let pivot = col
            .iter()
            .copied()
            .find(|v| v.abs() > 1e-12)
            .unwrap_or(1.0);
        let s = pivot.signum();
        real_vector(s * col[0], s * col[1], s * col[2])
    };
    DressedEigensystem {
        states: DressedStates {
            a_plus: vec(0),
            a_zero: vec(1),
            a_minus: vec(2),
        },
        eigenvalues: [
            eig.eigenvalues[order[0]],
            eig.eigenvalues[order[1]],
            eig.eigenvalues[order[2]],
        ],
    }
}

/// λ·Ω_P/Ω_C,max, in the units of `wavelength`.
pub fn transfer_fwhm_estimate(
    omega_p: RabiFrequency,
    omega_c_max: RabiFrequency,
    wavelength: f64,
) -> Result<f64, CoreError> {
    if omega_c_max.value() == 0.0 {
        return Err(CoreError::Division("transfer_fwhm_estimate: omega_c_max = 0"));
    }
    Ok(wavelength * omega_p.value() / omega_c_max.value())
}

fn real_vector(a: f64, b: f64, e: f64) -> StateVector3 {
    Vector3::new(
        Complex64::new(a, 0.0),
        Complex64::new(b, 0.0),
        Complex64::new(e, 0.0),
    )
}
