//! Readout and phase-gate protocols as spatial scans.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::environment::PerturbationPair;
use crate::error::CoreError;
use crate::geometry::{LatticeGeometry, StandingWave};
use crate::master::{
    evolve, levels, scattered_photons, DriveSnapshot, DriveSource, EvolveOptions, LevelScheme,
    RateBound, Rho4, Rho5, StarkMode, Trajectory, STABILITY_LIMIT,
};
use crate::pulses::{PulseSchedule, SegmentKind};
use crate::units::{gamma_time_to_us, us_to_gamma_time};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub numerical_aperture: f64,
    pub downstream_efficiency: f64,
    pub combined_efficiency: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self {
            numerical_aperture: 0.5,
            downstream_efficiency: 0.40,
            combined_efficiency: 0.03,
        }
    }
}

impl DetectionModel {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.combined_efficiency > 0.0 && self.combined_efficiency <= 1.0) {
            return Err(CoreError::param(
                "detection.combined_efficiency",
                "must lie in (0, 1]",
            ));
        }
        Ok(())
    }

    pub fn detected(&self, photons: f64) -> f64 {
        photons * self.combined_efficiency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Photons,
    DetectedPhotons,
    PhaseRad,
    SeProbability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMetadata {
    pub quantity: Quantity,
    pub omega_c_max: f64,
    pub omega_c_min: f64,
    pub node_nm: f64,
    pub schedule: Option<PulseSchedule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanProfile {
    pub positions_nm: Vec<f64>,
    pub values: Vec<f64>,
    pub fwhm_nm: Option<f64>,
    pub metadata: ProfileMetadata,
}

impl ScanProfile {
    pub fn new(
        positions_nm: Vec<f64>,
        values: Vec<f64>,
        metadata: ProfileMetadata,
    ) -> Result<Self, CoreError> {
        if positions_nm.len() != values.len() || positions_nm.is_empty() {
            return Err(CoreError::Domain("positions/values length mismatch".into()));
        }
        if positions_nm.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::Domain("positions must be strictly increasing".into()));
        }
        let fwhm_nm = fwhm(&positions_nm, &values);
        Ok(Self {
            positions_nm,
            values,
            fwhm_nm,
            metadata,
        })
    }

    pub fn peak(&self) -> (f64, f64) {
        let k = argmax(&self.values);
        (self.positions_nm[k], self.values[k])
    }

    /// Value at the grid point closest to x.
    pub fn value_near(&self, x_nm: f64) -> f64 {
        let k = self
            .positions_nm
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x_nm).abs().total_cmp(&(b.1 - x_nm).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.values[k]
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.positions_nm
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
            .sum()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut k = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[k] {
            k = i;
        }
    }
    k
}

/// Full width at half maximum around the global peak, by linear
/// interpolation. None if either side never drops below half.
pub fn fwhm(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return None;
    }
    let k = argmax(y);
    let half = 0.5 * y[k];
    if !(y[k] > 0.0) {
        return None;
    }
    let cross = |i: usize, j: usize| x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i]);
    let left = (0..k).rev().find(|&i| y[i] < half).map(|i| cross(i, i + 1))?;
    let right = ((k + 1)..y.len()).find(|&i| y[i] < half).map(|i| cross(i - 1, i))?;
    Some(right - left)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub center_nm: f64,
    pub half_width_nm: f64,
    pub step_nm: f64,
    pub adaptive: bool,
    pub max_refinements: u32,
}

impl ScanGrid {
    pub fn new(half_width_nm: f64, step_nm: f64, adaptive: bool) -> Self {
        Self {
            center_nm: 0.0,
            half_width_nm,
            step_nm,
            adaptive,
            max_refinements: 10,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.half_width_nm > 0.0 && self.step_nm > 0.0) {
            return Err(CoreError::param("grid", "half_width and step must be > 0"));
        }
        if self.half_width_nm / self.step_nm > 1e5 {
            return Err(CoreError::param("grid.step", "too many grid points"));
        }
        Ok(())
    }

    pub fn initial_positions(&self) -> Vec<f64> {
        let n = (self.half_width_nm / self.step_nm).round().max(1.0) as i64;
        (-n..=n)
            .map(|k| self.center_nm + k as f64 * self.step_nm)
            .collect()
    }
}

/// Solver settings shared by all scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// dt·(fastest rate).
    pub dt_factor: f64,
    /// Stored states per segment.
    pub records_per_segment: usize,
    pub check_positivity: bool,
    /// RK4 step limit per segment.
    pub max_steps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt_factor: 0.05,
            records_per_segment: 129,
            check_positivity: true,
            max_steps: 200_000_000,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.dt_factor > 0.0 && self.dt_factor <= STABILITY_LIMIT) {
            return Err(CoreError::param(
                "solver.dt_factor",
                format!("must lie in (0, {STABILITY_LIMIT}]"),
            ));
        }
        if self.max_steps == 0 {
            return Err(CoreError::param("solver.max_steps", "must be >= 1"));
        }
        Ok(())
    }

    fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            max_records: self.records_per_segment.max(2),
            max_steps: self.max_steps,
            ..Default::default()
        }
    }
}

/// Invariant checks gathered over trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub trajectories: usize,
    pub max_trace_drift: f64,
    pub max_hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            trajectories: 0,
            max_trace_drift: 0.0,
            max_hermiticity: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

impl Diagnostics {
    fn observe<const N: usize>(&mut self, tr: &Trajectory<N>, positivity: bool) {
        self.trajectories += 1;
        self.max_trace_drift = self.max_trace_drift.max(tr.max_trace_drift);
        self.max_hermiticity = self.max_hermiticity.max(tr.max_hermiticity_error());
        if positivity {
            self.min_eigenvalue = self.min_eigenvalue.min(tr.min_eigenvalue());
        }
    }

    pub fn merge(&mut self, o: &Diagnostics) {
        self.trajectories += o.trajectories;
        self.max_trace_drift = self.max_trace_drift.max(o.max_trace_drift);
        self.max_hermiticity = self.max_hermiticity.max(o.max_hermiticity);
        self.min_eigenvalue = self.min_eigenvalue.min(o.min_eigenvalue);
    }
}

/// The schedule evaluated at one lattice position.
pub struct LocalDrive<'a> {
    pub schedule: &'a PulseSchedule,
    /// Local coupling amplitude during the EIT pulse.
    pub eit_coupling: f64,
    /// Local coupling amplitude during the repump.
    pub repump_coupling: f64,
    pub stark_mode: StarkMode,
    pub perturbation: Option<&'a PerturbationPair>,
}

impl DriveSource for LocalDrive<'_> {
    fn snapshot(&self, t: f64) -> DriveSnapshot {
        let t_us = gamma_time_to_us(t);
        let s = self.schedule.sample(t_us);
        let mut omega_p = Complex64::new(s.probe, 0.0);
        let mut omega_c =
            Complex64::new(s.coupling * self.eit_coupling + s.repump * self.repump_coupling, 0.0);
        if let Some(p) = self.perturbation {
            let (dp, dc) = p.at(t_us);
            omega_p += dp;
            omega_c += dc;
        }
        let (omega_stark, delta_stark) = match &self.schedule.stark {
            Some(st) => (s.stark, st.detuning.value()),
            None => (0.0, 0.0),
        };
        DriveSnapshot {
            time: t,
            omega_p,
            omega_c,
            omega_stark,
            delta1: self.schedule.delta1.value(),
            delta2: self.schedule.delta2.value(),
            delta_stark,
            stark_mode: self.stark_mode,
        }
    }

    fn max_rate(&self, scheme: &LevelScheme, t0: f64, t1: f64) -> RateBound {
        let (a, b) = (gamma_time_to_us(t0), gamma_time_to_us(t1));
        let sch = self.schedule;
        let period = sch.period_us();
        let active = |start: f64, end: f64| {
            (0..sch.repeat_count).any(|k| {
                let off = k as f64 * period;
                start + off < b && end + off > a
            })
        };
        let (pp, pc) = self
            .perturbation
            .map_or((0.0, 0.0), |p| (p.probe_peak, p.coupling_peak));
        let mut items = vec![
            ("gamma_e", scheme.gamma_e),
            ("delta1", sch.delta1.value()),
            ("delta2", sch.delta2.value()),
            ("omega_p_dipole", pp),
            ("omega_c_dipole", pc),
        ];
        if active(sch.probe.start_us, sch.probe.end_us()) {
            items.push(("omega_p", sch.probe.peak.value()));
        }
        if active(sch.coupling.start_us, sch.coupling.end_us()) {
            items.push(("omega_c", self.eit_coupling));
        }
        if let Some(rp) = &sch.repump {
            if active(rp.envelope.start_us, rp.envelope.end_us()) {
                items.push(("omega_c", self.repump_coupling));
            }
        }
        if let Some(st) = &sch.stark {
            if self.stark_mode == StarkMode::Explicit
                && active(st.envelope.start_us, st.envelope.end_us())
            {
                items.push(("omega_stark", st.envelope.peak.value()));
                items.push(("delta_stark", st.detuning.value() - sch.delta1.value()));
            }
        }
        RateBound::max_of(&items)
    }
}

/// Photon accounting and final state of one readout position.
#[derive(Debug, Clone)]
pub struct ReadoutPoint {
    pub photons_eit: f64,
    pub photons_repump: f64,
    pub final_state: Rho4,
    pub steps: usize,
    pub diagnostics: Diagnostics,
    /// (time µs, excited population) records, if requested.
    pub excited_trace: Option<(Vec<f64>, Vec<f64>)>,
}

impl ReadoutPoint {
    pub fn photons(&self) -> f64 {
        self.photons_eit + self.photons_repump
    }
}

/// Runs the whole repeated readout sequence at one position, starting in |b⟩.
pub fn simulate_readout_point(
    scheme: &LevelScheme,
    schedule: &PulseSchedule,
    eit_coupling: f64,
    repump_coupling: f64,
    perturbation: Option<&PerturbationPair>,
    opts: &SimOptions,
    keep_trace: bool,
) -> Result<ReadoutPoint, CoreError> {
    let drive = LocalDrive {
        schedule,
        eit_coupling,
        repump_coupling,
        stark_mode: StarkMode::Effective,
        perturbation,
    };
    let eo = opts.evolve_options();
    let mut rho = Rho4::pure_level(levels::B);
    let mut out = ReadoutPoint {
        photons_eit: 0.0,
        photons_repump: 0.0,
        final_state: rho,
        steps: 0,
        diagnostics: Diagnostics::default(),
        excited_trace: keep_trace.then(|| (Vec::new(), Vec::new())),
    };
    for seg in schedule.segments() {
        let t0 = us_to_gamma_time(seg.start_us);
        let t1 = us_to_gamma_time(seg.end_us);
        let dt = opts.dt_factor / drive.max_rate(scheme, t0, t1).value;
        let tr = evolve(scheme, rho, &drive, (t0, t1), dt, &eo)?;
        let n = scattered_photons(&tr, scheme.gamma_e);
        match seg.kind {
            SegmentKind::Eit => out.photons_eit += n,
            SegmentKind::Repump => out.photons_repump += n,
        }
        out.steps += tr.steps;
        out.diagnostics.observe(&tr, opts.check_positivity);
        if let Some((ts, ps)) = out.excited_trace.as_mut() {
            let skip = usize::from(!ts.is_empty());
            ts.extend(tr.times.iter().skip(skip).map(|&t| gamma_time_to_us(t)));
            ps.extend(tr.excited.iter().skip(skip));
        }
        rho = *tr.final_state();
    }
    out.final_state = rho;
    Ok(out)
}

/// Evaluates `f` on a grid, refining near the peak until the spacing inside
/// the half-maximum region is at most FWHM/10. Positions sharing a cache key
/// are simulated once.
fn adaptive_scan<T, K, F, V>(
    grid: &ScanGrid,
    key: K,
    eval: F,
    value: V,
) -> Result<BTreeMap<u64, (f64, T)>, CoreError>
where
    T: Send + Sync + Clone,
    K: Fn(f64) -> (u64, u64) + Sync,
    F: Fn(f64) -> Result<T, CoreError> + Sync,
    V: Fn(&T) -> f64,
{
    grid.validate()?;
    let mut cache: BTreeMap<(u64, u64), T> = BTreeMap::new();
    let mut points: BTreeMap<u64, (f64, T)> = BTreeMap::new();
    let mut pending: Vec<f64> = grid.initial_positions();
    let order_key = |x: f64| {
        // monotone map of f64 to u64 for ordered storage
        let b = x.to_bits();
        if x >= 0.0 {
            b | (1 << 63)
        } else {
            !b
        }
    };
    for round in 0..=grid.max_refinements {
        let mut todo: Vec<(f64, (u64, u64))> = Vec::new();
        for &x in &pending {
            let k = key(x);
            if !cache.contains_key(&k) && !todo.iter().any(|(_, kk)| *kk == k) {
                todo.push((x, k));
            }
        }
        let results: Vec<Result<T, CoreError>> = todo
            .par_iter()
            .map(|(x, _)| eval(*x).map_err(|e| e.at(*x)))
            .collect();
        for ((_, k), r) in todo.iter().zip(results) {
            cache.insert(*k, r?);
        }
        for &x in &pending {
            points.insert(order_key(x), (x, cache[&key(x)].clone()));
        }
        if !grid.adaptive || round == grid.max_refinements {
            break;
        }
        let xs: Vec<f64> = points.values().map(|p| p.0).collect();
        let ys: Vec<f64> = points.values().map(|p| value(&p.1)).collect();
        let Some(w) = fwhm(&xs, &ys) else { break };
        let (xp, yp) = {
            let k = argmax(&ys);
            (xs[k], ys[k])
        };
        let target = w / 10.0;
        let half = 0.5 * yp;
        pending.clear();
        for i in 0..xs.len() - 1 {
            let near = (xs[i] - xp).abs() <= 1.5 * w || (xs[i + 1] - xp).abs() <= 1.5 * w;
            let straddles = (ys[i] - half) * (ys[i + 1] - half) <= 0.0;
            if (near || straddles) && xs[i + 1] - xs[i] > target {
                pending.push(0.5 * (xs[i] + xs[i + 1]));
            }
        }
        if pending.is_empty() {
            break;
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReadoutScan {
    pub omega_c_max: f64,
    pub photons: ScanProfile,
    pub detected: ScanProfile,
    pub photons_eit: Vec<f64>,
    pub photons_repump: Vec<f64>,
    pub steps: Vec<usize>,
    pub diagnostics: Diagnostics,
}

impl ReadoutScan {
    pub fn node_photons(&self) -> f64 {
        self.photons.value_near(self.photons.metadata.node_nm)
    }
}

/// Photon profile of the repeated readout across `grid`.
pub fn readout_scan(
    scheme: &LevelScheme,
    sw: &StandingWave,
    schedule: &PulseSchedule,
    detection: &DetectionModel,
    grid: &ScanGrid,
    opts: &SimOptions,
) -> Result<ReadoutScan, CoreError> {
    scheme.validate()?;
    sw.validate()?;
    schedule.validate()?;
    detection.validate()?;
    opts.validate()?;
    if sw.omega_min.value() != 0.0 {
        return Err(CoreError::param(
            "standing_wave.omega_min",
            "readout needs balanced beams (0) during the EIT pulse",
        ));
    }
    let sw_rep = match &schedule.repump {
        Some(rp) => sw.with_imbalance(rp.imbalance)?,
        None => *sw,
    };
    let grid = ScanGrid {
        center_nm: sw.node_nm,
        ..*grid
    };
    let locals = |x: f64| (sw.rabi_at(x).value(), sw_rep.rabi_at(x).value());
    let points = adaptive_scan(
        &grid,
        |x| {
            let (a, b) = locals(x);
            (a.to_bits(), b.to_bits())
        },
        |x| {
            let (a, b) = locals(x);
            simulate_readout_point(scheme, schedule, a, b, None, opts, false)
        },
        |p: &ReadoutPoint| p.photons(),
    )?;
    let xs: Vec<f64> = points.values().map(|p| p.0).collect();
    let photons: Vec<f64> = points.values().map(|p| p.1.photons()).collect();
    let mut diagnostics = Diagnostics::default();
    for p in points.values() {
        diagnostics.merge(&p.1.diagnostics);
    }
    let meta = |quantity| ProfileMetadata {
        quantity,
        omega_c_max: sw.omega_max.value(),
        omega_c_min: sw.omega_min.value(),
        node_nm: sw.node_nm,
        schedule: Some(*schedule),
    };
    let detected: Vec<f64> = photons.iter().map(|&n| detection.detected(n)).collect();
    Ok(ReadoutScan {
        omega_c_max: sw.omega_max.value(),
        photons: ScanProfile::new(xs.clone(), photons, meta(Quantity::Photons))?,
        detected: ScanProfile::new(xs, detected, meta(Quantity::DetectedPhotons))?,
        photons_eit: points.values().map(|p| p.1.photons_eit).collect(),
        photons_repump: points.values().map(|p| p.1.photons_repump).collect(),
        steps: points.values().map(|p| p.1.steps).collect(),
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitArrayContext {
    pub target_nm: f64,
    pub lattice: LatticeGeometry,
}

impl Default for QubitArrayContext {
    fn default() -> Self {
        Self {
            target_nm: 0.0,
            lattice: LatticeGeometry::default(),
        }
    }
}

impl QubitArrayContext {
    pub fn neighbors_nm(&self) -> [f64; 2] {
        let [l, r] = self.lattice.neighbor_offsets_nm();
        [self.target_nm + l, self.target_nm + r]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NeighborCrosstalk {
    pub positions_nm: [f64; 2],
    pub photons: [f64; 2],
    pub node_photons: f64,
    /// Largest neighbor count over the node count.
    pub ratio: f64,
    /// (δω/Ω_C)² at the neighbor sites.
    pub adiabaticity: f64,
    pub diagnostics: Diagnostics,
}

/// Photons scattered by the neighbor qubits during the readout of the target.
pub fn neighbor_crosstalk(
    scheme: &LevelScheme,
    sw: &StandingWave,
    schedule: &PulseSchedule,
    context: &QubitArrayContext,
    opts: &SimOptions,
) -> Result<NeighborCrosstalk, CoreError> {
    schedule.validate()?;
    let sw = StandingWave {
        node_nm: context.target_nm,
        ..*sw
    };
    let sw_rep = match &schedule.repump {
        Some(rp) => sw.with_imbalance(rp.imbalance)?,
        None => sw,
    };
    let positions = context.neighbors_nm();
    let mut all = vec![context.target_nm];
    all.extend(positions);
    let runs: Vec<Result<ReadoutPoint, CoreError>> = all
        .par_iter()
        .map(|&x| {
            simulate_readout_point(
                scheme,
                schedule,
                sw.rabi_at(x).value(),
                sw_rep.rabi_at(x).value(),
                None,
                opts,
                false,
            )
            .map_err(|e| e.at(x))
        })
        .collect();
    let mut diagnostics = Diagnostics::default();
    let mut photons = Vec::new();
    for r in runs {
        let r = r?;
        diagnostics.merge(&r.diagnostics);
        photons.push(r.photons());
    }
    let node = photons[0];
    let neigh = [photons[1], photons[2]];
    let omega_local = sw.rabi_at(positions[1]).value();
    let adiabaticity = if omega_local > 0.0 {
        (schedule.bandwidth() / omega_local).powi(2)
    } else {
        f64::INFINITY
    };
    Ok(NeighborCrosstalk {
        positions_nm: positions,
        photons: neigh,
        node_photons: node,
        ratio: neigh[0].max(neigh[1]) / node,
        adiabaticity,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkShift {
    pub shift: f64,
    pub excited_fraction: f64,
    /// Set when Δ < 10·Ω and the expansion is unreliable.
    pub precision_warning: bool,
}

/// Ω²/(2Δ) and (Ω/(2Δ))².
pub fn stark_effective_shift(omega_stark: f64, delta: f64) -> Result<StarkShift, CoreError> {
    if delta == 0.0 {
        return Err(CoreError::Division("stark_effective_shift: delta = 0"));
    }
    if delta.is_infinite() {
        return Ok(StarkShift {
            shift: 0.0,
            excited_fraction: 0.0,
            precision_warning: false,
        });
    }
    let r = omega_stark / (2.0 * delta);
    Ok(StarkShift {
        shift: omega_stark * omega_stark / (2.0 * delta),
        excited_fraction: r * r,
        precision_warning: delta.abs() < 10.0 * omega_stark.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub phase_rad: f64,
    pub se_prob: f64,
    /// |ρ_br| at the end of the gate.
    pub coherence: f64,
    pub steps: usize,
    pub diagnostics: Diagnostics,
}

/// Runs the gate at one position from (|b⟩ + |r⟩)/√2.
pub fn simulate_phase_point(
    scheme: &LevelScheme,
    schedule: &PulseSchedule,
    eit_coupling: f64,
    mode: StarkMode,
    opts: &SimOptions,
) -> Result<PhasePoint, CoreError> {
    let drive = LocalDrive {
        schedule,
        eit_coupling,
        repump_coupling: 0.0,
        stark_mode: mode,
        perturbation: None,
    };
    let h = Complex64::new(0.5f64.sqrt(), 0.0);
    let z = Complex64::new(0.0, 0.0);
    let rho0 = Rho5::from_state(&[z, h, z, z, h]);
    let t1 = us_to_gamma_time(schedule.total_duration_us());
    let dt = opts.dt_factor / drive.max_rate(scheme, 0.0, t1).value;
    let tr = evolve(scheme, rho0, &drive, (0.0, t1), dt, &opts.evolve_options())?;
    let mut diagnostics = Diagnostics::default();
    diagnostics.observe(&tr, opts.check_positivity);
    let end: &DensityMatrix<5> = tr.final_state();
    let c0 = rho0.get(levels::B, levels::R);
    let c1 = end.get(levels::B, levels::R);
    Ok(PhasePoint {
        phase_rad: wrap_phase(c1.arg() - c0.arg()),
        se_prob: scattered_photons(&tr, scheme.gamma_e),
        coherence: c1.norm(),
        steps: tr.steps,
        diagnostics,
    })
}

fn wrap_phase(p: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = p.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeComparison {
    pub x_nm: f64,
    pub scan: PhasePoint,
    pub other: PhasePoint,
    pub phase_rel_diff: f64,
    pub se_rel_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseGateScan {
    pub omega_c_max: f64,
    pub mode: StarkMode,
    pub phase: ScanProfile,
    pub se_prob: ScanProfile,
    pub coherence: Vec<f64>,
    pub steps: Vec<usize>,
    pub validation: Vec<ModeComparison>,
    pub warnings: Vec<String>,
    pub diagnostics: Diagnostics,
}

/// Phase and spontaneous-emission profiles of the Stark phase gate. Points in
/// `validation_nm` are rerun in the other Stark mode and compared.
#[allow(clippy::too_many_arguments)]
pub fn phase_gate_scan(
    scheme: &LevelScheme,
    sw: &StandingWave,
    schedule: &PulseSchedule,
    grid: &ScanGrid,
    mode: StarkMode,
    validation_nm: &[f64],
    opts: &SimOptions,
) -> Result<PhaseGateScan, CoreError> {
    scheme.validate()?;
    sw.validate()?;
    schedule.validate()?;
    opts.validate()?;
    let grid = ScanGrid {
        center_nm: sw.node_nm,
        ..*grid
    };
    let points = adaptive_scan(
        &grid,
        |x| (sw.rabi_at(x).value().to_bits(), 0),
        |x| simulate_phase_point(scheme, schedule, sw.rabi_at(x).value(), mode, opts),
        |p: &PhasePoint| p.phase_rad,
    )?;
    let xs: Vec<f64> = points.values().map(|p| p.0).collect();
    let mut diagnostics = Diagnostics::default();
    for p in points.values() {
        diagnostics.merge(&p.1.diagnostics);
    }
    let other_mode = match mode {
        StarkMode::Explicit => StarkMode::Effective,
        StarkMode::Effective => StarkMode::Explicit,
    };
    let checks: Vec<Result<ModeComparison, CoreError>> = validation_nm
        .par_iter()
        .map(|&x| {
            let om = sw.rabi_at(x).value();
            let a = simulate_phase_point(scheme, schedule, om, mode, opts).map_err(|e| e.at(x))?;
            let b = simulate_phase_point(scheme, schedule, om, other_mode, opts)
                .map_err(|e| e.at(x))?;
            Ok(ModeComparison {
                x_nm: x,
                phase_rel_diff: rel_diff(a.phase_rad, b.phase_rad),
                se_rel_diff: rel_diff(a.se_prob, b.se_prob),
                scan: a,
                other: b,
            })
        })
        .collect();
    let mut validation = Vec::new();
    let mut warnings = Vec::new();
    for c in checks {
        let c = c?;
        diagnostics.merge(&c.scan.diagnostics);
        diagnostics.merge(&c.other.diagnostics);
        if c.phase_rel_diff > 0.05 || c.se_rel_diff > 0.05 {
            warnings.push(format!(
                "stark modes disagree at x = {} nm: phase {:.3}%, se {:.3}%",
                c.x_nm,
                100.0 * c.phase_rel_diff,
                100.0 * c.se_rel_diff
            ));
        }
        validation.push(c);
    }
    let meta = |quantity| ProfileMetadata {
        quantity,
        omega_c_max: sw.omega_max.value(),
        omega_c_min: sw.omega_min.value(),
        node_nm: sw.node_nm,
        schedule: Some(*schedule),
    };
    Ok(PhaseGateScan {
        omega_c_max: sw.omega_max.value(),
        mode,
        phase: ScanProfile::new(
            xs.clone(),
            points.values().map(|p| p.1.phase_rad).collect(),
            meta(Quantity::PhaseRad),
        )?,
        se_prob: ScanProfile::new(
            xs,
            points.values().map(|p| p.1.se_prob).collect(),
            meta(Quantity::SeProbability),
        )?,
        coherence: points.values().map(|p| p.1.coherence).collect(),
        steps: points.values().map(|p| p.1.steps).collect(),
        validation,
        warnings,
        diagnostics,
    })
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
