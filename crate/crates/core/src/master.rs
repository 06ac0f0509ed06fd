//! Rotating-frame Lindblad equations for the F=1 → F'=0 system and an RK4
//! integrator.
//!
//! Levels: a = |m=−1⟩, b = |m=0⟩, c = |m=+1⟩, e = |F'=0⟩, plus an optional
//! uncoupled reference r. The probe drives b↔e, the coupling drives a↔e and
//! c↔e with the same amplitude. Couplings enter as −Ω/2; E_b = Δ₁ − Δ₂,
//! E_e = Δ₁.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::CoreError;

pub mod levels {
    pub const A: usize = 0;
    pub const B: usize = 1;
    pub const C: usize = 2;
    pub const E: usize = 3;
    pub const R: usize = 4;
}
use levels::{A, B, C, E};

pub type Rho4 = DensityMatrix<4>;
pub type Rho5 = DensityMatrix<5>;

/// Largest stable value of dt·rate.
pub const STABILITY_LIMIT: f64 = 0.1;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    /// Decay rate of e in Γ units.
    pub gamma_e: f64,
    /// Fractions of the e decay into a, b, c.
    pub branching: [f64; 3],
    /// Rates of the dephasing channels √(γ/2)(|i⟩⟨i| − |j⟩⟨j|) for the
    /// (a,b), (a,c), (b,c) pairs. Each damps ρ_ij at γ and the other
    /// coherences of i and j at γ/4.
    pub ground_dephasing: [f64; 3],
    /// Whether the coupling drives the a↔e and c↔e legs.
    pub coupled_legs: [bool; 2],
}

impl Default for LevelScheme {
    fn default() -> Self {
        Self {
            gamma_e: 1.0,
            branching: [1.0 / 3.0; 3],
            ground_dephasing: [0.0; 3],
            coupled_legs: [true, true],
        }
    }
}

impl LevelScheme {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.gamma_e.is_finite() && self.gamma_e >= 0.0) {
            return Err(CoreError::param("gamma_e", "must be finite and >= 0"));
        }
        if self.branching.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(CoreError::param("branching", "fractions must be >= 0"));
        }
        let sum: f64 = self.branching.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(CoreError::param(
                "branching",
                format!("fractions sum to {sum}, expected 1"),
            ));
        }
        if self
            .ground_dephasing
            .iter()
            .any(|g| !(g.is_finite() && *g >= 0.0))
        {
            return Err(CoreError::param("ground_dephasing", "rates must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StarkMode {
    /// Far-detuned a,c ↔ e coupling carried as an oscillating term.
    Explicit,
    /// Adiabatically eliminated light shift and scattering.
    Effective,
}

/// Instantaneous drive at one time. Rates in Γ units, time in 1/Γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSnapshot {
    pub time: f64,
    pub omega_p: Complex64,
    pub omega_c: Complex64,
    pub omega_stark: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta_stark: f64,
    pub stark_mode: StarkMode,
}

impl Default for DriveSnapshot {
    fn default() -> Self {
        Self {
            time: 0.0,
            omega_p: Complex64::new(0.0, 0.0),
            omega_c: Complex64::new(0.0, 0.0),
            omega_stark: 0.0,
            delta1: 0.0,
            delta2: 0.0,
            delta_stark: 0.0,
            stark_mode: StarkMode::Effective,
        }
    }
}

impl DriveSnapshot {
    pub fn is_finite(&self) -> bool {
        self.omega_p.re.is_finite()
            && self.omega_p.im.is_finite()
            && self.omega_c.re.is_finite()
            && self.omega_c.im.is_finite()
            && self.omega_stark.is_finite()
            && self.delta1.is_finite()
            && self.delta2.is_finite()
            && self.delta_stark.is_finite()
    }

    /// Excited-state admixture amplitude ratio Ω_s/(2Δ) in effective mode.
    fn admixture_ratio(&self) -> f64 {
        if self.stark_mode == StarkMode::Effective
            && self.omega_stark != 0.0
            && self.delta_stark != 0.0
        {
            self.omega_stark / (2.0 * self.delta_stark)
        } else {
            0.0
        }
    }
}

/// Fastest rate seen by the integrator, with a label for error reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBound {
    pub label: &'static str,
    pub value: f64,
}

impl RateBound {
    pub fn max_of(items: &[(&'static str, f64)]) -> RateBound {
        let mut best = RateBound {
            label: "none",
            value: 0.0,
        };
        for &(label, v) in items {
            if v.abs() > best.value {
                best = RateBound {
                    label,
                    value: v.abs(),
                };
            }
        }
        best
    }

    pub fn check(&self, dt: f64) -> Result<(), CoreError> {
        let product = dt * self.value;
        if !(dt > 0.0) || product > STABILITY_LIMIT {
            return Err(CoreError::StepSize {
                rate: self.label,
                value: self.value,
                product,
                limit: STABILITY_LIMIT,
            });
        }
        Ok(())
    }
}

pub trait DriveSource: Sync {
    fn snapshot(&self, t: f64) -> DriveSnapshot;
    /// Largest rate over [t0, t1].
    fn max_rate(&self, scheme: &LevelScheme, t0: f64, t1: f64) -> RateBound;
}

/// Time-independent drive.
#[derive(Debug, Clone, Copy)]
pub struct ConstantDrive(pub DriveSnapshot);

impl DriveSource for ConstantDrive {
    fn snapshot(&self, t: f64) -> DriveSnapshot {
        DriveSnapshot { time: t, ..self.0 }
    }

    fn max_rate(&self, scheme: &LevelScheme, _t0: f64, _t1: f64) -> RateBound {
        snapshot_rates(scheme, &self.0)
    }
}

pub fn snapshot_rates(scheme: &LevelScheme, d: &DriveSnapshot) -> RateBound {
    let mut items = vec![
        ("gamma_e", scheme.gamma_e),
        ("omega_p", d.omega_p.norm()),
        ("omega_c", d.omega_c.norm()),
        ("delta1", d.delta1),
        ("delta2", d.delta2),
    ];
    if d.stark_mode == StarkMode::Explicit && d.omega_stark != 0.0 {
        items.push(("omega_stark", d.omega_stark));
        items.push(("delta_stark", d.delta_stark - d.delta1));
    }
    RateBound::max_of(&items)
}

/// Checked right-hand side dρ/dt.
pub fn build_rhs<const N: usize>(
    scheme: &LevelScheme,
    drive: &DriveSnapshot,
    rho: &DensityMatrix<N>,
) -> Result<DensityMatrix<N>, CoreError> {
    if N < 4 {
        return Err(CoreError::Contract(format!("need at least 4 levels, got {N}")));
    }
    rho.check_hermitian(1e-10)?;
    if !drive.is_finite() {
        return Err(CoreError::Contract("non-finite drive".into()));
    }
    Ok(rhs(scheme, drive, rho))
}

/// Coherent part only, −i[H, ρ].
pub fn coherent_rhs<const N: usize>(
    scheme: &LevelScheme,
    drive: &DriveSnapshot,
    rho: &DensityMatrix<N>,
) -> DensityMatrix<N> {
    let h = hamiltonian4(scheme, drive);
    commutator(&h, rho)
}

/// Rotating-frame Hamiltonian on (a, b, c, e).
pub fn hamiltonian4(scheme: &LevelScheme, d: &DriveSnapshot) -> [[Complex64; 4]; 4] {
    let z = Complex64::new(0.0, 0.0);
    let mut h = [[z; 4]; 4];
    h[B][B] = Complex64::new(d.delta1 - d.delta2, 0.0);
    h[E][E] = Complex64::new(d.delta1, 0.0);
    h[E][B] = -0.5 * d.omega_p;
    let mut hea = if scheme.coupled_legs[0] { -0.5 * d.omega_c } else { z };
    let mut hec = if scheme.coupled_legs[1] { -0.5 * d.omega_c } else { z };
    if d.omega_stark != 0.0 {
        match d.stark_mode {
            StarkMode::Explicit => {
                let nu = d.delta_stark - d.delta1;
                let s = -0.5 * d.omega_stark * Complex64::from_polar(1.0, nu * d.time);
                hea += s;
                hec += s;
            }
            StarkMode::Effective => {
                if d.delta_stark != 0.0 {
                    let shift = d.omega_stark * d.omega_stark / (4.0 * d.delta_stark);
                    let s = Complex64::new(-shift, 0.0);
                    h[A][A] += s;
                    h[C][C] += s;
                    h[A][C] += s;
                    h[C][A] += s;
                }
            }
        }
    }
    h[E][A] = hea;
    h[E][C] = hec;
    h[A][E] = hea.conj();
    h[B][E] = h[E][B].conj();
    h[C][E] = hec.conj();
    h
}

fn commutator<const N: usize>(
    h: &[[Complex64; 4]; 4],
    rho: &DensityMatrix<N>,
) -> DensityMatrix<N> {
    let r = rho.as_array();
    let z = Complex64::new(0.0, 0.0);
    let mut m = [[z; N]; N];
    for i in 0..4 {
        for j in 0..N {
            let mut acc = z;
            for k in 0..4 {
                acc += h[i][k] * r[k][j];
            }
            m[i][j] = acc;
        }
    }
    let mut out = [[z; N]; N];
    for i in 0..N {
        for j in 0..N {
            out[i][j] = -I * (m[i][j] - m[j][i].conj());
        }
    }
    DensityMatrix::from_array(out)
}

/// Unchecked right-hand side.
pub fn rhs<const N: usize>(
    scheme: &LevelScheme,
    drive: &DriveSnapshot,
    rho: &DensityMatrix<N>,
) -> DensityMatrix<N> {
    let h = hamiltonian4(scheme, drive);
    let mut out = *commutator(&h, rho).as_array();
    let r = rho.as_array();
    let g = scheme.gamma_e;

    let pee = r[E][E];
    for (k, &beta) in [A, B, C].iter().zip(scheme.branching.iter()) {
        out[*k][*k] += pee * (g * beta);
    }
    for j in 0..N {
        out[E][j] -= r[E][j] * (0.5 * g);
        out[j][E] -= r[j][E] * (0.5 * g);
    }

    // dephasing channels sqrt(γ/2)(|i⟩⟨i| − |j⟩⟨j|)
    for (&(i, j), &gam) in [(A, B), (A, C), (B, C)]
        .iter()
        .zip(scheme.ground_dephasing.iter())
    {
        if gam != 0.0 {
            let w = |k: usize| {
                if k == i {
                    1.0
                } else if k == j {
                    -1.0
                } else {
                    0.0
                }
            };
            for m in 0..N {
                for n in 0..N {
                    let dc = w(m) - w(n);
                    if dc != 0.0 {
                        out[m][n] -= r[m][n] * (0.25 * gam * dc * dc);
                    }
                }
            }
        }
    }

    // Scattering from the eliminated Stark admixture: jump operators
    // sqrt(Γβ_k)·ε·|k⟩(⟨a| + ⟨c|).
    let eps = drive.admixture_ratio();
    if eps != 0.0 {
        let rate = g * eps * eps;
        let ss = r[A][A] + r[C][C] + r[A][C] + r[C][A];
        for (k, &beta) in [A, B, C].iter().zip(scheme.branching.iter()) {
            out[*k][*k] += ss * (rate * beta);
        }
        for j in 0..N {
            let row = r[A][j] + r[C][j];
            out[A][j] -= row * (0.5 * rate);
            out[C][j] -= row * (0.5 * rate);
        }
        for i in 0..N {
            let col = r[i][A] + r[i][C];
            out[i][A] -= col * (0.5 * rate);
            out[i][C] -= col * (0.5 * rate);
        }
    }
    DensityMatrix::from_array(out)
}

/// ρ_ee plus the eliminated Stark admixture ε²⟨s|ρ|s⟩, s = a + c.
pub fn excited_population<const N: usize>(drive: &DriveSnapshot, rho: &DensityMatrix<N>) -> f64 {
    let eps = drive.admixture_ratio();
    let mut p = rho.population(E);
    if eps != 0.0 {
        let ss = rho.get(A, A) + rho.get(C, C) + rho.get(A, C) + rho.get(C, A);
        p += eps * eps * ss.re;
    }
    p
}

/// One classical RK4 step with the stability guard and re-symmetrization.
pub fn step_rk4<const N: usize, F>(
    rho: &DensityMatrix<N>,
    t: f64,
    dt: f64,
    bound: RateBound,
    mut f: F,
) -> Result<DensityMatrix<N>, CoreError>
where
    F: FnMut(f64, &DensityMatrix<N>) -> DensityMatrix<N>,
{
    bound.check(dt)?;
    Ok(rk4_raw(rho, t, dt, &mut f))
}

#[inline]
fn rk4_raw<const N: usize, F>(rho: &DensityMatrix<N>, t: f64, dt: f64, f: &mut F) -> DensityMatrix<N>
where
    F: FnMut(f64, &DensityMatrix<N>) -> DensityMatrix<N>,
{
    let k1 = f(t, rho);
    let k2 = f(t + 0.5 * dt, &rho.add_scaled(&k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, &rho.add_scaled(&k2, 0.5 * dt));
    let k4 = f(t + dt, &rho.add_scaled(&k3, dt));
    let mut out = *rho;
    let (a, b) = (dt / 6.0, dt / 3.0);
    let (k1, k2, k3, k4) = (k1.as_array(), k2.as_array(), k3.as_array(), k4.as_array());
    let mut m = *out.as_array();
    for i in 0..N {
        for j in 0..N {
            m[i][j] += (k1[i][j] + k4[i][j]) * a + (k2[i][j] + k3[i][j]) * b;
        }
    }
    out = DensityMatrix::from_array(m);
    out.hermitize();
    out
}

#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    /// Record times in 1/Γ.
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix<N>>,
    /// Excited population (with Stark admixture) at the record times.
    pub excited: Vec<f64>,
    /// Running ∫ excited dt at the record times, accumulated every step.
    pub emitted: Vec<f64>,
    pub steps: usize,
    pub max_trace_drift: f64,
}

impl<const N: usize> Trajectory<N> {
    /// Builds a trajectory from samples; the integral is trapezoidal over them.
    pub fn from_samples(
        times: Vec<f64>,
        states: Vec<DensityMatrix<N>>,
    ) -> Result<Self, CoreError> {
        if times.len() != states.len() || times.is_empty() {
            return Err(CoreError::Contract("times/states length mismatch".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::Contract("times not strictly increasing".into()));
        }
        let excited: Vec<f64> = states.iter().map(|s| s.population(E)).collect();
        let mut emitted = vec![0.0; times.len()];
        for k in 1..times.len() {
            emitted[k] =
                emitted[k - 1] + 0.5 * (excited[k] + excited[k - 1]) * (times[k] - times[k - 1]);
        }
        let tr0 = states[0].trace().re;
        let max_trace_drift = states
            .iter()
            .map(|s| (s.trace().re - tr0).abs())
            .fold(0.0, f64::max);
        Ok(Self {
            steps: times.len() - 1,
            times,
            states,
            excited,
            emitted,
            max_trace_drift,
        })
    }

    pub fn final_state(&self) -> &DensityMatrix<N> {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.hermiticity_error())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.min_eigenvalue())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Γ_e ∫ (ρ_ee + Stark admixture) dt.
pub fn scattered_photons<const N: usize>(traj: &Trajectory<N>, gamma_e: f64) -> f64 {
    gamma_e * traj.emitted.last().copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Upper bound on stored states (the first and last are always kept).
    pub max_records: usize,
    pub trace_tolerance: f64,
    /// Refuse spans needing more RK4 steps than this.
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            max_records: 257,
            trace_tolerance: 1e-6,
            max_steps: 200_000_000,
        }
    }
}

/// Integrates over `t_span` with a fixed step no larger than `dt`.
pub fn evolve<const N: usize, D: DriveSource + ?Sized>(
    scheme: &LevelScheme,
    rho0: DensityMatrix<N>,
    drive: &D,
    t_span: (f64, f64),
    dt: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory<N>, CoreError> {
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(CoreError::Contract(format!("invalid time span [{t0}, {t1}]")));
    }
    if !(dt > 0.0) {
        return Err(CoreError::Contract(format!("dt must be positive, got {dt}")));
    }
    scheme.validate()?;
    rho0.check_hermitian(1e-10)?;
    let snap0 = drive.snapshot(t0);
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![rho0],
        excited: vec![excited_population(&snap0, &rho0)],
        emitted: vec![0.0],
        steps: 0,
        max_trace_drift: 0.0,
    };
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(traj);
    }
    let bound = drive.max_rate(scheme, t0, t1);
    let n_f = ((span / dt) - 1e-9).ceil().max(1.0);
    if !(n_f <= opts.max_steps as f64) {
        return Err(CoreError::StepBudget {
            rate: bound.label,
            value: bound.value,
            steps: if n_f.is_finite() { n_f as usize } else { usize::MAX },
            limit: opts.max_steps,
        });
    }
    let n = n_f as usize;
    let h = span / n as f64;
    bound.check(h)?;

    let stride = n.div_ceil(opts.max_records.max(2) - 1).max(1);
    let tr0 = rho0.trace().re;
    let mut rho = rho0;
    let mut p_prev = traj.excited[0];
    let mut integral = 0.0;
    let mut f = |t: f64, r: &DensityMatrix<N>| rhs(scheme, &drive.snapshot(t), r);
    for k in 0..n {
        let t = t0 + k as f64 * h;
        rho = rk4_raw(&rho, t, h, &mut f);
        let t_next = if k + 1 == n { t1 } else { t0 + (k + 1) as f64 * h };
        let p = excited_population(&drive.snapshot(t_next), &rho);
        integral += 0.5 * (p + p_prev) * h;
        p_prev = p;
        let drift = (rho.trace().re - tr0).abs();
        traj.max_trace_drift = traj.max_trace_drift.max(drift);
        if drift > opts.trace_tolerance || !drift.is_finite() {
            return Err(CoreError::TraceDrift {
                drift,
                time: t_next,
            });
        }
        if (k + 1) % stride == 0 || k + 1 == n {
            traj.times.push(t_next);
            traj.states.push(rho);
            traj.excited.push(p);
            traj.emitted.push(integral);
        }
    }
    traj.steps = n;
    Ok(traj)
}
