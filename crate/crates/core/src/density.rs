//! Fixed-size density matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::CoreError;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix<const N: usize> {
    m: [[Complex64; N]; N],
}

impl<const N: usize> Default for DensityMatrix<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> DensityMatrix<N> {
    pub fn zeros() -> Self {
        Self { m: [[ZERO; N]; N] }
    }

    pub fn from_array(m: [[Complex64; N]; N]) -> Self {
        Self { m }
    }

    /// |k⟩⟨k|.
    pub fn pure_level(k: usize) -> Self {
        let mut r = Self::zeros();
        r.m[k][k] = Complex64::new(1.0, 0.0);
        r
    }

    /// |ψ⟩⟨ψ| (ψ is not renormalized).
    pub fn from_state(psi: &[Complex64; N]) -> Self {
        let mut r = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                r.m[i][j] = psi[i] * psi[j].conj();
            }
        }
        r
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.m[i][j] = v;
    }

    pub fn as_array(&self) -> &[[Complex64; N]; N] {
        &self.m
    }

    pub fn population(&self, k: usize) -> f64 {
        self.m[k][k].re
    }

    pub fn trace(&self) -> Complex64 {
        (0..N).map(|k| self.m[k][k]).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..N {
            for j in i..N {
                worst = worst.max((self.m[i][j] - self.m[j][i].conj()).norm());
            }
        }
        worst
    }

    /// ρ ← (ρ + ρ†)/2.
    pub fn hermitize(&mut self) {
        for i in 0..N {
            self.m[i][i].im = 0.0;
            for j in (i + 1)..N {
                let v = 0.5 * (self.m[i][j] + self.m[j][i].conj());
                self.m[i][j] = v;
                self.m[j][i] = v.conj();
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m
            .iter()
            .flat_map(|row| row.iter())
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..N {
            for j in 0..N {
                worst = worst.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        worst
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut h = *self;
        h.hermitize();
        let dm = DMatrix::from_fn(N, N, |i, j| h.m[i][j]);
        let mut ev: Vec<f64> = SymmetricEigen::new(dm).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// self + s·other
    #[inline]
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        let mut out = *self;
        for i in 0..N {
            for j in 0..N {
                out.m[i][j] += other.m[i][j] * s;
            }
        }
        out
    }

    pub fn check_hermitian(&self, tol: f64) -> Result<(), CoreError> {
        let err = self.hermiticity_error();
        if err > tol || !err.is_finite() {
            return Err(CoreError::Contract(format!(
                "non-Hermitian density matrix (max |rho - rho^dag| = {err:.3e})"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pure_state_properties() {
        let s = 0.5f64.sqrt();
        let psi = [c(s, 0.0), c(0.0, s), ZERO, ZERO];
        let rho = DensityMatrix::<4>::from_state(&psi);
        assert!((rho.trace() - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(rho.hermiticity_error(), 0.0);
        let ev = rho.eigenvalues();
        assert!(ev[0].abs() < 1e-14);
        assert!((ev[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hermitize_symmetrizes() {
        let mut rho = DensityMatrix::<5>::pure_level(1);
        rho.set(0, 1, c(0.1, 0.2));
        rho.set(1, 0, c(0.3, 0.0));
        assert!(rho.check_hermitian(1e-10).is_err());
        rho.hermitize();
        assert_eq!(rho.hermiticity_error(), 0.0);
        assert_eq!(rho.get(0, 1), c(0.2, 0.1));
    }

    #[test]
    fn min_eigenvalue_detects_negativity() {
        let mut rho = DensityMatrix::<4>::pure_level(0);
        rho.set(1, 1, c(-0.01, 0.0));
        assert!((rho.min_eigenvalue() + 0.01).abs() < 1e-14);
    }
}
