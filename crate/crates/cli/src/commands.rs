//! Subcommands.

use std::path::PathBuf;
use std::time::Instant;

use eit_core::dressed::{dark_state_b_population, hamiltonian};
use eit_core::environment::{dipole_rabi_report, gaussian_fwhm, PerturbationPair};
use eit_core::master::{levels, rhs, RateBound, Rho4};
use eit_core::protocols::{
    simulate_phase_point, simulate_readout_point, ProfileMetadata, Quantity, ReadoutScan,
};
use eit_core::units::{GAMMA_D2, LAMBDA_D2_NM};
use eit_core::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::SimConfig;
use crate::error::CliError;
use crate::output::{config_hash, fmt_f64, OutputDir, RunManifest, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Mixing angles, dark-state populations and dressed energies.
    DarkState,
    /// Photon profile of the repeated readout.
    ReadoutScan,
    /// Readout profile convolved with the trap ground-state density.
    Convolve,
    /// Neighbor dipole field and crosstalk.
    DipoleCheck,
    /// Phase and spontaneous-emission profiles of the Stark gate.
    PhaseScan,
    /// Cross-module invariant checks.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::DarkState => "dark-state",
            Command::ReadoutScan => "readout-scan",
            Command::Convolve => "convolve",
            Command::DipoleCheck => "dipole-check",
            Command::PhaseScan => "phase-scan",
            Command::Validate => "validate",
        }
    }

    fn stem(self) -> &'static str {
        match self {
            Command::DarkState => "dark_state",
            Command::ReadoutScan => "readout_scan",
            Command::Convolve => "convolve",
            Command::DipoleCheck => "dipole_check",
            Command::PhaseScan => "phase_scan",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// 0 = all available cores.
    pub jobs: usize,
    pub out: PathBuf,
}

/// `EIT_LOCALIZER_THREADS` wins over the flag.
pub fn resolve_jobs(flag: Option<usize>) -> Result<usize, CliError> {
    if let Ok(v) = std::env::var("EIT_LOCALIZER_THREADS") {
        return v.trim().parse::<usize>().map_err(|_| {
            CliError::Usage(format!("EIT_LOCALIZER_THREADS must be an integer, got {v:?}"))
        });
    }
    Ok(flag.unwrap_or(0))
}

#[derive(Default)]
struct Report {
    steps: Vec<(String, Vec<f64>, Vec<usize>)>,
    warnings: Vec<String>,
    extra: Map<String, Value>,
    failed: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub manifest: PathBuf,
}

pub fn run(cmd: Command, cfg: &SimConfig, opts: &RunOptions) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?;
    let mut out = OutputDir::create(&opts.out)?;
    let start = Instant::now();
    let report = pool.install(|| match cmd {
        Command::DarkState => dark_state_cmd(cfg, &mut out),
        Command::ReadoutScan => readout_cmd(cfg, &mut out),
        Command::Convolve => convolve_cmd(cfg, &mut out),
        Command::DipoleCheck => dipole_cmd(cfg, &mut out),
        Command::PhaseScan => phase_cmd(cfg, &mut out),
        Command::Validate => validate_cmd(cfg, &mut out),
    })?;
    let manifest = RunManifest {
        subcommand: cmd.name().to_string(),
        config_hash: config_hash(cfg),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        jobs: pool.current_num_threads(),
        steps: report.steps,
        warnings: report.warnings.clone(),
        outputs: out.written.clone(),
        extra: report.extra,
    };
    let path = out.write_json(&format!("{}_manifest.json", cmd.stem()), &manifest.to_json(cfg))?;
    if !report.failed.is_empty() {
        return Err(CliError::Validation(format!(
            "{} check(s) failed: {}",
            report.failed.len(),
            report.failed.join(", ")
        )));
    }
    Ok(RunSummary {
        outputs: out.written,
        warnings: report.warnings,
        manifest: path,
    })
}

fn dark_state_cmd(cfg: &SimConfig, out: &mut OutputDir) -> Result<Report, CliError> {
    let mut rep = Report::default();
    let mut t = Table::new(&[
        "omega_p_over_gamma",
        "omega_c_over_gamma",
        "delta1_over_gamma",
        "theta_rad",
        "phi_rad",
        "dark_b_population",
        "eig_plus_over_gamma",
        "eig_zero_over_gamma",
        "eig_minus_over_gamma",
        "transfer_fwhm_nm",
    ]);
    let d = &cfg.dark_state;
    for &p in &d.omega_p {
        for &c in &d.omega_c {
            for &d1 in &d.delta1 {
                let (rp, rc, dd) = (RabiFrequency::new(p)?, RabiFrequency::new(c)?, Detuning::new(d1)?);
                let angles = match mixing_angles(rp, rc, dd) {
                    Ok(a) => a,
                    Err(CoreError::DegenerateDrive) => {
                        rep.warnings.push(format!("skipped degenerate drive omega_p = omega_c = 0 at delta1 = {d1}"));
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                let es = dressed_eigensystem(rp, rc, dd, dd)?;
                let fwhm = if c > 0.0 {
                    transfer_fwhm_estimate(rp, rc, LAMBDA_D2_NM)?
                } else {
                    f64::INFINITY
                };
                t.push(vec![
                    p.into(),
                    c.into(),
                    d1.into(),
                    angles.theta.into(),
                    angles.phi.into(),
                    dark_state_b_population(rp, rc)?.into(),
                    es.eigenvalues[0].into(),
                    es.eigenvalues[1].into(),
                    es.eigenvalues[2].into(),
                    fwhm.into(),
                ]);
            }
        }
    }
    out.write_table("dark_state.csv", &t)?;
    Ok(rep)
}

fn readout_scans(cfg: &SimConfig, rep: &mut Report) -> Result<Vec<ReadoutScan>, CliError> {
    let schedule = readout_schedule(&cfg.readout_params())?;
    let mut scans = Vec::new();
    for &om in &cfg.readout.omega_c_max {
        let mut sw = StandingWave::new(om, 0.0)?;
        sw.node_nm = cfg.node_nm;
        let scan = readout_scan(
            &cfg.scheme(),
            &sw,
            &schedule,
            &cfg.detection(),
            &cfg.grid(),
            &cfg.sim_options(),
        )?;
        rep.steps.push((
            format!("readout omega_c_max={}", fmt_f64(om)),
            scan.photons.positions_nm.clone(),
            scan.steps.clone(),
        ));
        if scan.photons.fwhm_nm.is_none() {
            rep.warnings.push(format!(
                "readout omega_c_max={}: profile has no half-maximum crossing inside the grid",
                fmt_f64(om)
            ));
        }
        scans.push(scan);
    }
    Ok(scans)
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn readout_cmd(cfg: &SimConfig, out: &mut OutputDir) -> Result<Report, CliError> {
    let mut rep = Report::default();
    let schedule = readout_schedule(&cfg.readout_params())?;
    let scans = readout_scans(cfg, &mut rep)?;
    let mut main = Table::new(&["x_nm", "omega_c_max_over_gamma", "photons", "detected", "note"]);
    let mut brk = Table::new(&[
        "x_nm",
        "omega_c_max_over_gamma",
        "photons_eit",
        "photons_repump",
        "steps",
    ]);
    let mut sum = Table::new(&[
        "omega_c_max_over_gamma",
        "fwhm_nm",
        "node_photons",
        "node_detected",
        "transfer_fwhm_estimate_nm",
        "neighbor_photons",
        "neighbor_ratio",
        "bandwidth_ratio_sq",
        "measurement_time_us",
        "protocol_duration_us",
    ]);
    let ctx = QubitArrayContext {
        target_nm: cfg.node_nm,
        lattice: cfg.lattice(),
    };
    for s in &scans {
        let p = &s.photons;
        for (i, &x) in p.positions_nm.iter().enumerate() {
            let note = if x == cfg.node_nm { "node" } else { "" };
            main.push(vec![
                x.into(),
                s.omega_c_max.into(),
                p.values[i].into(),
                s.detected.values[i].into(),
                note.into(),
            ]);
            brk.push(vec![
                x.into(),
                s.omega_c_max.into(),
                s.photons_eit[i].into(),
                s.photons_repump[i].into(),
                s.steps[i].into(),
            ]);
        }
        let mut sw = StandingWave::new(s.omega_c_max, 0.0)?;
        sw.node_nm = cfg.node_nm;
        let nc = neighbor_crosstalk(&cfg.scheme(), &sw, &schedule, &ctx, &cfg.sim_options())?;
        let node = s.node_photons();
        sum.push(vec![
            s.omega_c_max.into(),
            opt(p.fwhm_nm).into(),
            node.into(),
            cfg.detection().detected(node).into(),
            transfer_fwhm_estimate(
                RabiFrequency::new(cfg.readout.probe_peak)?,
                RabiFrequency::new(s.omega_c_max)?,
                LAMBDA_D2_NM,
            )?
            .into(),
            nc.photons[0].max(nc.photons[1]).into(),
            nc.ratio.into(),
            nc.adiabaticity.into(),
            schedule.measurement_time_us().into(),
            schedule.total_duration_us().into(),
        ]);
    }
    out.write_table("readout_scan.csv", &main)?;
    out.write_table("readout_breakdown.csv", &brk)?;
    out.write_table("readout_summary.csv", &sum)?;
    Ok(rep)
}

fn convolve_cmd(cfg: &SimConfig, out: &mut OutputDir) -> Result<Report, CliError> {
    let mut rep = Report::default();
    let trap = TrapModel {
        lambda_lattice_nm: cfg.lattice_nm,
        ..TrapModel::rb87(cfg.trap_depth_mk)?
    };
    let sigma = ground_state_sigma(&trap)?;
    let scans = readout_scans(cfg, &mut rep)?;
    let mut main = Table::new(&[
        "x_nm",
        "omega_c_max_over_gamma",
        "photons_convolved",
        "detected_convolved",
    ]);
    let mut sum = Table::new(&[
        "omega_c_max_over_gamma",
        "trap_depth_mk",
        "sigma_nm",
        "kernel_fwhm_nm",
        "fwhm_nm",
        "fwhm_convolved_nm",
        "integral_photons_nm",
        "integral_convolved_photons_nm",
        "mass_rel_error",
    ]);
    for s in &scans {
        let c = convolve_profile(&s.photons, sigma)?;
        for (i, &x) in c.positions_nm.iter().enumerate() {
            main.push(vec![
                x.into(),
                s.omega_c_max.into(),
                c.values[i].into(),
                cfg.detection().detected(c.values[i]).into(),
            ]);
        }
        let (a, b) = (s.photons.integral(), c.integral());
        sum.push(vec![
            s.omega_c_max.into(),
            cfg.trap_depth_mk.into(),
            sigma.into(),
            gaussian_fwhm(sigma).into(),
            opt(s.photons.fwhm_nm).into(),
            opt(c.fwhm_nm).into(),
            a.into(),
            b.into(),
            ((b - a).abs() / a.abs()).into(),
        ]);
    }
    out.write_table("convolve.csv", &main)?;
    out.write_table("convolve_summary.csv", &sum)?;
    Ok(rep)
}

#[derive(Serialize)]
struct DipoleCheck {
    separation_nm: f64,
    rabi_perturbation_hz: f64,
    rabi_perturbation_rad_per_s: f64,
    computed_probe_hz: f64,
    computed_coupling_hz: f64,
    polarization_table: Vec<Value>,
    omega_c_max_over_gamma: f64,
    neighbor_x_nm: f64,
    crosstalk_delta: f64,
    crosstalk_absolute: f64,
    zero_baseline: bool,
    baseline_photons: f64,
    phases_rad: Vec<f64>,
    photons_with: Vec<f64>,
    worst_phase_rad: f64,
}

fn dipole_cmd(cfg: &SimConfig, out: &mut OutputDir) -> Result<Report, CliError> {
    let mut rep = Report::default();
    let lattice = cfg.lattice();
    let report = dipole_rabi_report(&lattice)?;
    let schedule = readout_schedule(&cfg.readout_params())?;
    let om = cfg.readout.omega_c_max.iter().copied().fold(0.0, f64::max);
    let mut sw = StandingWave::new(om, 0.0)?;
    sw.node_nm = cfg.node_nm;
    let sw_rep = sw.with_imbalance(cfg.readout.repump_imbalance)?;
    let scheme = cfg.scheme();
    let so = cfg.sim_options();
    let node = simulate_readout_point(
        &scheme,
        &schedule,
        sw.rabi_at(cfg.node_nm).value(),
        sw_rep.rabi_at(cfg.node_nm).value(),
        None,
        &so,
        true,
    )?;
    let (ts, ps) = node.excited_trace.expect("trace requested");
    let peak = 2.0 * std::f64::consts::PI * cfg.dipole_peak_hz / GAMMA_D2;
    let pert = PerturbationPair::from_excited_trace(peak, peak, &ts, &ps)?;
    let x = cfg.node_nm + lattice.qubit_spacing_nm();
    let d = crosstalk_delta(&scheme, &sw, &schedule, &pert, x, &so)?;
    let absolute = d
        .photons_with
        .iter()
        .map(|n| (n - d.baseline_photons).abs())
        .fold(0.0, f64::max);
    if d.zero_baseline {
        rep.warnings.push("neighbor baseline count is zero; crosstalk_delta is absolute".into());
    }
    let check = DipoleCheck {
        separation_nm: report.separation_nm,
        rabi_perturbation_hz: cfg.dipole_peak_hz,
        rabi_perturbation_rad_per_s: 2.0 * std::f64::consts::PI * cfg.dipole_peak_hz,
        computed_probe_hz: report.probe_hz,
        computed_coupling_hz: report.coupling_hz,
        polarization_table: report
            .table
            .iter()
            .map(|e| json!({"emitter": e.emitter, "receiver": e.receiver, "rabi_hz": e.rabi_hz}))
            .collect(),
        omega_c_max_over_gamma: om,
        neighbor_x_nm: x,
        crosstalk_delta: d.relative,
        crosstalk_absolute: absolute,
        zero_baseline: d.zero_baseline,
        baseline_photons: d.baseline_photons,
        phases_rad: d.phases.clone(),
        photons_with: d.photons_with.clone(),
        worst_phase_rad: d.worst_phase,
    };
    out.write_json("dipole_check.json", &check)?;
    Ok(rep)
}

fn phase_cmd(cfg: &SimConfig, out: &mut OutputDir) -> Result<Report, CliError> {
    let mut rep = Report::default();
    let schedule = phase_gate_schedule(&cfg.gate_params())?;
    let validation: Vec<f64> = cfg.stark.validation_nm.iter().map(|v| v + cfg.node_nm).collect();
    let mut all = Table::new(&[
        "omega_c_max_over_gamma",
        "x_nm",
        "phase_rad",
        "se_prob",
        "coherence",
    ]);
    let mut sum = Table::new(&[
        "omega_c_max_over_gamma",
        "stark_mode",
        "phase_fwhm_nm",
        "node_phase_rad",
        "node_se_prob",
        "nominal_phase_bound_rad",
        "mode_phase_rel_diff",
        "mode_se_rel_diff",
    ]);
    for &om in &cfg.gate.omega_c_max {
        let mut sw = StandingWave::new(om, cfg.gate.omega_c_min)?;
        sw.node_nm = cfg.node_nm;
        let scan = phase_gate_scan(
            &cfg.scheme(),
            &sw,
            &schedule,
            &cfg.grid(),
            cfg.stark.mode,
            &validation,
            &cfg.sim_options(),
        )?;
        let label = fmt_f64(om);
        rep.steps.push((
            format!("phase omega_c_max={label}"),
            scan.phase.positions_nm.clone(),
            scan.steps.clone(),
        ));
        rep.warnings.extend(scan.warnings.iter().cloned());
        let mut one = Table::new(&["x_nm", "phase_rad", "se_prob"]);
        for (i, &x) in scan.phase.positions_nm.iter().enumerate() {
            one.push(vec![x.into(), scan.phase.values[i].into(), scan.se_prob.values[i].into()]);
            all.push(vec![
                om.into(),
                x.into(),
                scan.phase.values[i].into(),
                scan.se_prob.values[i].into(),
                scan.coherence[i].into(),
            ]);
        }
        out.write_table(&format!("phase_scan_omega{label}.csv"), &one)?;
        let worst = |f: fn(&protocols::ModeComparison) -> f64| {
            scan.validation.iter().map(f).fold(f64::NAN, f64::max)
        };
        sum.push(vec![
            om.into(),
            match cfg.stark.mode {
                StarkMode::Explicit => "explicit",
                StarkMode::Effective => "effective",
            }
            .into(),
            opt(scan.phase.fwhm_nm).into(),
            scan.phase.value_near(cfg.node_nm).into(),
            scan.se_prob.value_near(cfg.node_nm).into(),
            schedule.nominal_stark_phase().into(),
            worst(|c| c.phase_rel_diff).into(),
            worst(|c| c.se_rel_diff).into(),
        ]);
    }
    out.write_table("phase_scan.csv", &all)?;
    out.write_table("phase_summary.csv", &sum)?;
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

fn check(name: &'static str, value: f64, limit: f64, pass: bool) -> Check {
    Check {
        name,
        value,
        limit,
        pass: pass && value.is_finite(),
    }
}

fn rabi_benchmark(dt: f64) -> Rho4 {
    let scheme = LevelScheme {
        gamma_e: 0.0,
        ..Default::default()
    };
    let d = DriveSnapshot {
        omega_p: num_complex::Complex64::new(1.0, 0.0),
        ..Default::default()
    };
    let t_end = 2.0 * std::f64::consts::PI;
    let n = (t_end / dt).round() as usize;
    let h = t_end / n as f64;
    let bound = RateBound {
        label: "omega_p",
        value: 1.0,
    };
    let mut rho = Rho4::pure_level(levels::B);
    for k in 0..n {
        rho = step_rk4(&rho, k as f64 * h, h, bound, |_, r| rhs(&scheme, &d, r))
            .expect("step within the stability limit");
    }
    rho
}

/// Measured RK4 convergence ratio on the two-level Rabi problem.
pub fn rk4_order_ratio() -> f64 {
    let reference = rabi_benchmark(0.08 / 64.0);
    let e1 = rabi_benchmark(0.08).max_abs_diff(&reference);
    let e2 = rabi_benchmark(0.04).max_abs_diff(&reference);
    e1 / e2
}

/// Dark-state identities over a fixed parameter grid: (max norm error,
/// max |e| amplitude, max relative residual).
pub fn dark_state_identities() -> Result<(f64, f64, f64), CoreError> {
    let vals = [0.0, 0.01, 0.2, 1.0, 8.0, 18.0, 208.0];
    let (mut norm, mut e, mut res) = (0.0f64, 0.0f64, 0.0f64);
    for &p in &vals {
        for &c in &vals {
            if p == 0.0 && c == 0.0 {
                continue;
            }
            for d1 in [-5.0, 0.0, 3.0] {
                let (rp, rc, dd) = (RabiFrequency::new(p)?, RabiFrequency::new(c)?, Detuning::new(d1)?);
                let v = dark_state(rp, rc)?;
                norm = norm.max((v.norm() - 1.0).abs());
                e = e.max(v[2].norm());
                let h = hamiltonian(rp, rc, dd, dd).map(|x| num_complex::Complex64::new(x, 0.0));
                let es = dressed_eigensystem(rp, rc, dd, dd)?;
                res = res.max((h * es.states.a_zero).norm() / h.norm());
            }
        }
    }
    Ok((norm, e, res))
}

fn validate_cmd(cfg: &SimConfig, out: &mut OutputDir) -> Result<Report, CliError> {
    let mut rep = Report::default();
    let mut checks = Vec::new();
    let (norm, e, res) = dark_state_identities()?;
    checks.push(check("dark_state_norm", norm, 1e-12, norm <= 1e-12));
    checks.push(check("dark_state_excited_component", e, 0.0, e == 0.0));
    checks.push(check("dark_state_eigen_residual", res, 1e-12, res <= 1e-12));
    let ratio = rk4_order_ratio();
    checks.push(check("rk4_order_ratio", ratio, 16.0, (ratio - 16.0).abs() <= 3.2));

    let scheme = cfg.scheme();
    let so = cfg.sim_options();
    let readout = readout_schedule(&ReadoutParams {
        repeats: 1,
        ..cfg.readout_params()
    })?;
    let om = cfg.readout.omega_c_max.iter().copied().fold(0.0, f64::max);
    let mut diag = protocols::Diagnostics::default();
    for (eit, repump) in [(0.0, cfg.readout.repump_imbalance * om), (om, om)] {
        let r = simulate_readout_point(&scheme, &readout, eit, repump, None, &so, false)?;
        diag.merge(&r.diagnostics);
    }
    let gate = phase_gate_schedule(&cfg.gate_params())?;
    let p = simulate_phase_point(&scheme, &gate, cfg.gate.omega_c_min, cfg.stark.mode, &so)?;
    diag.merge(&p.diagnostics);
    checks.push(check("trace_drift", diag.max_trace_drift, 1e-9, diag.max_trace_drift <= 1e-9));
    checks.push(check("hermiticity", diag.max_hermiticity, 1e-10, diag.max_hermiticity <= 1e-10));
    checks.push(check("positivity", diag.min_eigenvalue, -1e-8, diag.min_eigenvalue >= -1e-8));

    let sigma = ground_state_sigma(&TrapModel::rb87(cfg.trap_depth_mk)?)?;
    let xs: Vec<f64> = (-800..=800).map(|k| k as f64 * 0.25).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (-x * x / 50.0).exp()).collect();
    let meta = ProfileMetadata {
        quantity: Quantity::Photons,
        omega_c_max: 0.0,
        omega_c_min: 0.0,
        node_nm: 0.0,
        schedule: None,
    };
    let prof = ScanProfile::new(xs, ys, meta)?;
    let conv = convolve_profile(&prof, sigma)?;
    let mass = (conv.integral() - prof.integral()).abs() / prof.integral();
    checks.push(check("convolution_mass", mass, 1e-6, mass <= 1e-6));
    let peak_ok = conv.peak().1 <= prof.peak().1;
    checks.push(check("convolution_peak", conv.peak().1, prof.peak().1, peak_ok));

    let mut sw = StandingWave::new(om, 0.0)?;
    sw.node_nm = cfg.node_nm;
    let period = (0..50)
        .map(|k| {
            let x = -300.0 + 13.7 * k as f64;
            (standing_wave_rabi(&sw, x).value() - standing_wave_rabi(&sw, x + LAMBDA_D2_NM / 2.0).value()).abs()
        })
        .fold(0.0, f64::max);
    checks.push(check("standing_wave_period", period, 1e-9 * om, period <= 1e-9 * om));
    let det = cfg.detection();
    let ident = (det.detected(33.0) - 33.0 * det.combined_efficiency).abs();
    checks.push(check("detection_identity", ident, 0.0, ident == 0.0));

    rep.failed = checks.iter().filter(|c| !c.pass).map(|c| c.name.to_string()).collect();
    let passed = rep.failed.is_empty();
    out.write_json("validate.json", &json!({"passed": passed, "checks": checks}))?;
    Ok(rep)
}
