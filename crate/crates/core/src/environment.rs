//! Thermal position spread and radiating-dipole crosstalk.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::{PI, SQRT_2};

use crate::error::CoreError;
use crate::geometry::{LatticeGeometry, StandingWave};
use crate::master::LevelScheme;
use crate::protocols::{fwhm, simulate_readout_point, Diagnostics, ScanProfile, SimOptions};
use crate::pulses::PulseSchedule;
use crate::units::{
    gamma_units_to_hz, D2_REDUCED_DIPOLE, EPSILON_0, GAMMA_D2, HBAR, K_B, LAMBDA_D2_NM, MASS_RB87,
};

/// Harmonic approximation of the lattice well U₀ sin²(k_lat x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapModel {
    pub depth_mk: f64,
    pub lambda_lattice_nm: f64,
    pub mass_kg: f64,
}

impl TrapModel {
    pub fn rb87(depth_mk: f64) -> Result<Self, CoreError> {
        let t = Self {
            depth_mk,
            lambda_lattice_nm: LatticeGeometry::default().lambda_lattice_nm,
            mass_kg: MASS_RB87,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.depth_mk > 0.0 && self.depth_mk.is_finite()) {
            return Err(CoreError::param("trap.depth", "must be > 0"));
        }
        if !(self.lambda_lattice_nm > 0.0 && self.mass_kg > 0.0) {
            return Err(CoreError::param("trap", "wavelength and mass must be > 0"));
        }
        Ok(())
    }

    pub fn depth_joule(&self) -> f64 {
        self.depth_mk * 1e-3 * K_B
    }

    /// ω = k_lat √(2U₀/m), rad/s.
    pub fn trap_frequency(&self) -> f64 {
        let k = 2.0 * PI / (self.lambda_lattice_nm * 1e-9);
        k * (2.0 * self.depth_joule() / self.mass_kg).sqrt()
    }
}

/// Ground-state rms width √(ħ/(2mω)) in nm.
pub fn ground_state_sigma(trap: &TrapModel) -> Result<f64, CoreError> {
    trap.validate()?;
    Ok((HBAR / (2.0 * trap.mass_kg * trap.trap_frequency())).sqrt() * 1e9)
}

pub fn gaussian_fwhm(sigma: f64) -> f64 {
    2.0 * (2.0 * 2f64.ln()).sqrt() * sigma
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / SQRT_2))
}

fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Convolves the piecewise-linear interpolant of `profile` (zero outside its
/// grid) with a normalized Gaussian of width `sigma_nm`, sampled on a uniform
/// grid padded by 6σ on each side.
pub fn convolve_profile(profile: &ScanProfile, sigma_nm: f64) -> Result<ScanProfile, CoreError> {
    if !(sigma_nm >= 0.0 && sigma_nm.is_finite()) {
        return Err(CoreError::Domain(format!("sigma must be >= 0, got {sigma_nm}")));
    }
    if sigma_nm == 0.0 {
        return Ok(profile.clone());
    }
    let xs = &profile.positions_nm;
    let ys = &profile.values;
    if xs.len() < 2 {
        return Err(CoreError::Domain("profile needs at least two points".into()));
    }
    let (lo, hi) = feature_extent(xs, ys);
    let (x_min, x_max) = (xs[0], xs[xs.len() - 1]);
    if lo - x_min < 5.0 * sigma_nm || x_max - hi < 5.0 * sigma_nm {
        return Err(CoreError::Domain(format!(
            "grid [{x_min}, {x_max}] nm does not extend 5 sigma ({:.3} nm) beyond the feature [{lo:.3}, {hi:.3}] nm",
            5.0 * sigma_nm
        )));
    }
    let pad = 6.0 * sigma_nm;
    let span = x_max - x_min + 2.0 * pad;
    let n = ((span / (sigma_nm / 16.0)).ceil() as usize).clamp(64, 200_000);
    let h = span / n as f64;
    let out_x: Vec<f64> = (0..=n).map(|k| x_min - pad + k as f64 * h).collect();
    let out_y: Vec<f64> = out_x
        .par_iter()
        .map(|&x| {
            let mut acc = 0.0;
            for j in 0..xs.len() - 1 {
                let (x0, x1) = (xs[j], xs[j + 1]);
                let z0 = (x0 - x) / sigma_nm;
                let z1 = (x1 - x) / sigma_nm;
                if z0 > 9.0 || z1 < -9.0 {
                    continue;
                }
                let m = (ys[j + 1] - ys[j]) / (x1 - x0);
                let a = ys[j] - m * x0;
                acc += (a + m * x) * (norm_cdf(z1) - norm_cdf(z0))
                    + m * sigma_nm * (norm_pdf(z0) - norm_pdf(z1));
            }
            acc.max(0.0)
        })
        .collect();
    ScanProfile::new(out_x, out_y, profile.metadata.clone())
}

/// Region above half maximum, or the peak location if there is none.
fn feature_extent(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let k = (0..ys.len())
        .max_by(|&a, &b| ys[a].total_cmp(&ys[b]))
        .unwrap_or(0);
    let half = 0.5 * ys[k];
    let mut lo = k;
    while lo > 0 && ys[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < ys.len() && ys[hi + 1] >= half {
        hi += 1;
    }
    if fwhm(xs, ys).is_none() {
        return (xs[k], xs[k]);
    }
    (xs[lo], xs[hi])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Pi,
    SigmaPlus,
    SigmaMinus,
}

impl Polarization {
    pub const ALL: [Polarization; 3] = [
        Polarization::Pi,
        Polarization::SigmaPlus,
        Polarization::SigmaMinus,
    ];

    /// Spherical unit vector with the quantization axis along z.
    pub fn unit_vector(self) -> [Complex64; 3] {
        let s = 1.0 / SQRT_2;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match self {
            Polarization::Pi => [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            Polarization::SigmaPlus => [c(-s, 0.0), c(0.0, -s), c(0.0, 0.0)],
            Polarization::SigmaMinus => [c(s, 0.0), c(0.0, -s), c(0.0, 0.0)],
        }
    }
}

/// Matrix element of one F'=0 → F=1 branch, |⟨J‖er‖J'⟩|/√6.
pub fn branch_dipole() -> f64 {
    D2_REDUCED_DIPOLE / 6f64.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleSource {
    /// Complex dipole amplitude (C·m).
    pub moment: [Complex64; 3],
    pub wavelength_nm: f64,
    pub origin_nm: [f64; 3],
}

impl DipoleSource {
    pub fn d2(polarization: Polarization, origin_nm: [f64; 3]) -> Self {
        let d = branch_dipole();
        Self {
            moment: polarization.unit_vector().map(|v| v * d),
            wavelength_nm: LAMBDA_D2_NM,
            origin_nm,
        }
    }
}

/// Field amplitude (V/m) of an oscillating dipole, all zones:
/// k³/(4πε₀) e^{ikr} { (r̂×p)×r̂/(kr) + [3r̂(r̂·p) − p](1/(kr)³ − i/(kr)²) }.
pub fn dipole_field(src: &DipoleSource, r_obs_nm: [f64; 3]) -> Result<[Complex64; 3], CoreError> {
    let d = [
        (r_obs_nm[0] - src.origin_nm[0]) * 1e-9,
        (r_obs_nm[1] - src.origin_nm[1]) * 1e-9,
        (r_obs_nm[2] - src.origin_nm[2]) * 1e-9,
    ];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(r > 0.0) {
        return Err(CoreError::Domain("dipole field evaluated at the source".into()));
    }
    let n = [d[0] / r, d[1] / r, d[2] / r];
    let k = 2.0 * PI / (src.wavelength_nm * 1e-9);
    let kr = k * r;
    let p = src.moment;
    let np: Complex64 = (0..3).map(|i| p[i] * n[i]).sum();
    let pre = Complex64::from_polar(k.powi(3) / (4.0 * PI * EPSILON_0), kr);
    let near = Complex64::new(1.0 / kr.powi(3), -1.0 / kr.powi(2));
    let mut e = [Complex64::new(0.0, 0.0); 3];
    for i in 0..3 {
        let transverse = p[i] - np * n[i];
        let longitudinal = np * (3.0 * n[i]) - p[i];
        e[i] = pre * (transverse / kr + longitudinal * near);
    }
    Ok(e)
}

/// Rabi frequency (Γ units) driven on a `receiver` branch by `field`.
pub fn branch_rabi(field: &[Complex64; 3], receiver: Polarization) -> f64 {
    let u = receiver.unit_vector();
    let proj: Complex64 = (0..3).map(|i| u[i].conj() * field[i]).sum();
    branch_dipole() * proj.norm() / HBAR / GAMMA_D2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationRabi {
    pub emitter: Polarization,
    pub receiver: Polarization,
    pub rabi_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipoleRabiReport {
    pub separation_nm: f64,
    /// π emitter onto the π probe branch, Ω/2π in Hz.
    pub probe_hz: f64,
    /// Largest σ emitter onto σ coupling branch, Ω/2π in Hz.
    pub coupling_hz: f64,
    pub table: Vec<PolarizationRabi>,
}

impl DipoleRabiReport {
    pub fn probe_gamma(&self) -> f64 {
        self.probe_hz * 2.0 * PI / GAMMA_D2
    }

    pub fn coupling_gamma(&self) -> f64 {
        self.coupling_hz * 2.0 * PI / GAMMA_D2
    }
}

/// Lattice along x, quantization axis along z, neighbor at one qubit spacing.
pub fn dipole_rabi_report(lattice: &LatticeGeometry) -> Result<DipoleRabiReport, CoreError> {
    let sep = lattice.qubit_spacing_nm();
    let mut table = Vec::new();
    for em in Polarization::ALL {
        let field = dipole_field(&DipoleSource::d2(em, [0.0; 3]), [sep, 0.0, 0.0])?;
        for rc in Polarization::ALL {
            table.push(PolarizationRabi {
                emitter: em,
                receiver: rc,
                rabi_hz: gamma_units_to_hz(branch_rabi(&field, rc)),
            });
        }
    }
    let pick = |f: &dyn Fn(&PolarizationRabi) -> bool| {
        table
            .iter()
            .filter(|e| f(e))
            .map(|e| e.rabi_hz)
            .fold(0.0, f64::max)
    };
    let probe_hz = pick(&|e| e.emitter == Polarization::Pi && e.receiver == Polarization::Pi);
    let coupling_hz =
        pick(&|e| e.emitter != Polarization::Pi && e.receiver != Polarization::Pi);
    Ok(DipoleRabiReport {
        separation_nm: sep,
        probe_hz,
        coupling_hz,
        table,
    })
}

/// Rabi perturbations at a neighbor, following √ρ_ee(t) of the emitting atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPair {
    /// Peak probe perturbation (Γ units).
    pub probe_peak: f64,
    /// Peak coupling perturbation (Γ units).
    pub coupling_peak: f64,
    pub times_us: Vec<f64>,
    /// Envelope in [0, 1].
    pub envelope: Vec<f64>,
    /// Phase relative to the drive lasers.
    pub phase: f64,
}

impl PerturbationPair {
    pub fn from_excited_trace(
        probe_peak: f64,
        coupling_peak: f64,
        times_us: &[f64],
        excited: &[f64],
    ) -> Result<Self, CoreError> {
        if times_us.len() != excited.len() || times_us.is_empty() {
            return Err(CoreError::Domain("excited trace length mismatch".into()));
        }
        if times_us.windows(2).any(|w| w[1] < w[0]) {
            return Err(CoreError::Domain("excited trace times must be sorted".into()));
        }
        let pmax = excited.iter().copied().fold(0.0, f64::max);
        let envelope = excited
            .iter()
            .map(|&p| if pmax > 0.0 { (p.max(0.0) / pmax).sqrt() } else { 0.0 })
            .collect();
        Ok(Self {
            probe_peak,
            coupling_peak,
            times_us: times_us.to_vec(),
            envelope,
            phase: 0.0,
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            probe_peak: self.probe_peak * factor,
            coupling_peak: self.coupling_peak * factor,
            ..self.clone()
        }
    }

    pub fn with_phase(&self, phase: f64) -> Self {
        Self {
            phase,
            ..self.clone()
        }
    }

    pub fn envelope_at(&self, t_us: f64) -> f64 {
        let ts = &self.times_us;
        if ts.is_empty() || t_us < ts[0] || t_us > ts[ts.len() - 1] {
            return 0.0;
        }
        let j = ts.partition_point(|&t| t <= t_us);
        if j == 0 {
            return self.envelope[0];
        }
        if j >= ts.len() {
            return self.envelope[ts.len() - 1];
        }
        let (t0, t1) = (ts[j - 1], ts[j]);
        if t1 == t0 {
            return self.envelope[j];
        }
        let w = (t_us - t0) / (t1 - t0);
        self.envelope[j - 1] * (1.0 - w) + self.envelope[j] * w
    }

    /// (probe, coupling) perturbation at time t.
    pub fn at(&self, t_us: f64) -> (Complex64, Complex64) {
        let env = self.envelope_at(t_us);
        let ph = Complex64::from_polar(env, self.phase);
        (ph * self.probe_peak, ph * self.coupling_peak)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CrosstalkDelta {
    /// Worst-case relative change (absolute change if `zero_baseline`).
    pub relative: f64,
    pub baseline_photons: f64,
    pub phases: Vec<f64>,
    pub photons_with: Vec<f64>,
    pub worst_phase: f64,
    pub zero_baseline: bool,
    pub diagnostics: Diagnostics,
}

pub const CROSSTALK_PHASES: [f64; 4] = [0.0, 0.5 * PI, PI, 1.5 * PI];

/// Change in the photon count of the atom at `neighbor_nm` when the
/// perturbation is added to its drive; worst case over the relative phase.
pub fn crosstalk_delta(
    scheme: &LevelScheme,
    sw: &StandingWave,
    schedule: &PulseSchedule,
    perturbation: &PerturbationPair,
    neighbor_nm: f64,
    opts: &SimOptions,
) -> Result<CrosstalkDelta, CoreError> {
    schedule.validate()?;
    let sw_rep = match &schedule.repump {
        Some(rp) => sw.with_imbalance(rp.imbalance)?,
        None => *sw,
    };
    let (eit, rep) = (
        sw.rabi_at(neighbor_nm).value(),
        sw_rep.rabi_at(neighbor_nm).value(),
    );
    let run = |p: Option<&PerturbationPair>| {
        simulate_readout_point(scheme, schedule, eit, rep, p, opts, false)
            .map(|r| (r.photons(), r.diagnostics))
            .map_err(|e| e.at(neighbor_nm))
    };
    let (baseline, mut diagnostics) = run(None)?;
    let perturbed: Vec<PerturbationPair> = CROSSTALK_PHASES
        .iter()
        .map(|&ph| perturbation.with_phase(ph))
        .collect();
    let runs: Vec<(f64, Diagnostics)> = perturbed
        .par_iter()
        .map(|p| run(Some(p)))
        .collect::<Result<_, _>>()?;
    let with: Vec<f64> = runs.iter().map(|r| r.0).collect();
    for (_, d) in &runs {
        diagnostics.merge(d);
    }
    let zero_baseline = baseline == 0.0;
    let mut worst = (0.0, CROSSTALK_PHASES[0]);
    for (&n, &ph) in with.iter().zip(CROSSTALK_PHASES.iter()) {
        let d = (n - baseline).abs();
        let v = if zero_baseline { d } else { d / baseline };
        if v > worst.0 {
            worst = (v, ph);
        }
    }
    Ok(CrosstalkDelta {
        relative: worst.0,
        baseline_photons: baseline,
        phases: CROSSTALK_PHASES.to_vec(),
        photons_with: with,
        worst_phase: worst.1,
        zero_baseline,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{ProfileMetadata, Quantity};

    fn meta() -> ProfileMetadata {
        ProfileMetadata {
            quantity: Quantity::Photons,
            omega_c_max: 18.0,
            omega_c_min: 0.0,
            node_nm: 0.0,
            schedule: None,
        }
    }

    #[test]
    fn sigma_at_five_millikelvin() {
        let s = ground_state_sigma(&TrapModel::rb87(5.0).unwrap()).unwrap();
        // independent arithmetic: ω = k √(2U/m)
        let m: f64 = 86.909_180_527 * 1.660_539_066_60e-27;
        let u = 5e-3 * 1.380_649e-23;
        let w = 2.0 * PI / 1.17e-6 * (2.0 * u / m).sqrt();
        let oracle = (1.054_571_817e-34 / (2.0 * m * w)).sqrt() * 1e9;
        assert!((s - oracle).abs() < 1e-12);
        assert!((s - 8.34).abs() < 0.01);
        assert!((gaussian_fwhm(s) - 19.6).abs() < 0.05);
    }

    #[test]
    fn doubling_depth_shrinks_sigma() {
        let a = ground_state_sigma(&TrapModel::rb87(3.0).unwrap()).unwrap();
        let b = ground_state_sigma(&TrapModel::rb87(6.0).unwrap()).unwrap();
        assert!((a / b - 2f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn negative_depth_names_key() {
        let err = TrapModel::rb87(-1.0).unwrap_err();
        assert!(err.to_string().contains("trap.depth"));
    }

    #[test]
    fn delta_spike_becomes_kernel() {
        let xs: Vec<f64> = (-400..=400).map(|k| k as f64 * 0.25).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| if x == 0.0 { 1.0 } else { 0.0 }).collect();
        let p = ScanProfile::new(xs, ys, meta()).unwrap();
        let out = convolve_profile(&p, 8.3).unwrap();
        assert!((out.fwhm_nm.unwrap() - gaussian_fwhm(8.3)).abs() < 0.05);
        assert!((out.integral() / p.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let xs: Vec<f64> = (-50..=50).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (-x * x / 20.0).exp()).collect();
        let p = ScanProfile::new(xs, ys, meta()).unwrap();
        assert_eq!(convolve_profile(&p, 0.0).unwrap(), p);
    }

    #[test]
    fn gaussian_on_gaussian_adds_in_quadrature() {
        let s0 = 3.0;
        let xs: Vec<f64> = (-1200..=1200).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 5.0 * (-x * x / (2.0 * s0 * s0)).exp()).collect();
        let p = ScanProfile::new(xs, ys, meta()).unwrap();
        let out = convolve_profile(&p, 8.3).unwrap();
        let expect = gaussian_fwhm((s0 * s0 + 8.3 * 8.3).sqrt());
        assert!((out.fwhm_nm.unwrap() / expect - 1.0).abs() < 0.02);
        assert!(out.peak().1 <= p.peak().1);
        assert!((out.integral() / p.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn narrow_grid_is_domain_error() {
        let xs: Vec<f64> = (-10..=10).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (-x * x).exp()).collect();
        let p = ScanProfile::new(xs, ys, meta()).unwrap();
        assert!(matches!(convolve_profile(&p, 8.3), Err(CoreError::Domain(_))));
    }

    #[test]
    fn far_field_is_transverse_and_falls_as_one_over_r() {
        let src = DipoleSource::d2(Polarization::Pi, [0.0; 3]);
        let e1 = dipole_field(&src, [1e6, 0.0, 0.0]).unwrap();
        let e2 = dipole_field(&src, [2e6, 0.0, 0.0]).unwrap();
        assert!(e1[0].norm() / e1[2].norm() < 1e-4);
        assert!((e1[2].norm() / e2[2].norm() - 2.0).abs() < 1e-4);
        // on the dipole axis only the near-zone longitudinal part survives
        let on_axis = dipole_field(&src, [0.0, 0.0, 1e6]).unwrap();
        let k = 2.0 * PI / 780e-9;
        let textbook = k * k * branch_dipole() / (4.0 * PI * EPSILON_0 * 1e-3);
        assert!(on_axis[2].norm() / textbook < 1e-3);
    }

    #[test]
    fn far_field_matches_textbook_formula() {
        let src = DipoleSource::d2(Polarization::Pi, [0.0; 3]);
        let r = 780.0 * 100.0 / (2.0 * PI) * 1.2;
        let e = dipole_field(&src, [r, 0.0, 0.0]).unwrap();
        let k = 2.0 * PI / 780e-9;
        let textbook = k * k * branch_dipole() / (4.0 * PI * EPSILON_0 * r * 1e-9);
        assert!((e[2].norm() / textbook - 1.0).abs() < 0.01);
    }

    #[test]
    fn dipole_field_singular_at_origin() {
        let src = DipoleSource::d2(Polarization::SigmaPlus, [1.0, 2.0, 3.0]);
        assert!(dipole_field(&src, [1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn branch_rabi_scale() {
        // d²k³/(4πε₀ħ) = Γ/4 for one F'=0 → F=1 branch
        let k = 2.0 * PI / 780e-9;
        let d = branch_dipole();
        let scale = d * d * k.powi(3) / (4.0 * PI * EPSILON_0 * HBAR) / GAMMA_D2;
        assert!((scale - 0.25).abs() < 0.01);
    }

    #[test]
    fn perturbation_envelope_interpolates() {
        let p = PerturbationPair::from_excited_trace(0.1, 0.2, &[0.0, 1.0, 2.0], &[0.0, 0.25, 0.0])
            .unwrap();
        assert_eq!(p.envelope, vec![0.0, 1.0, 0.0]);
        assert!((p.envelope_at(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(p.envelope_at(3.0), 0.0);
        let (a, b) = p.with_phase(PI).at(1.0);
        assert!((a + Complex64::new(0.1, 0.0)).norm() < 1e-15);
        assert!((b + Complex64::new(0.2, 0.0)).norm() < 1e-15);
    }
}
