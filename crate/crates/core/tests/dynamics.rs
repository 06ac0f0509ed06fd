use eit_core::environment::PerturbationPair;
use eit_core::master::{levels, rhs, ConstantDrive, EvolveOptions, RateBound, Rho4, Rho5};
use eit_core::protocols::{simulate_phase_point, simulate_readout_point, LocalDrive};
use eit_core::units::us_to_gamma_time;
use eit_core::units::GAMMA_D2;
use eit_core::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn drive(p: f64, cc: f64, d1: f64, d2: f64) -> DriveSnapshot {
    DriveSnapshot {
        omega_p: c(p),
        omega_c: c(cc),
        delta1: d1,
        delta2: d2,
        ..Default::default()
    }
}

fn normalize(v: [Complex64; 4]) -> [Complex64; 4] {
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.map(|z| z / n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_keeps_density_invariants(
        p in 0.0f64..5.0,
        cc in 0.0f64..5.0,
        d1 in -3.0f64..3.0,
        d2 in -3.0f64..3.0,
        psi in prop::array::uniform4((-1.0f64..1.0, -1.0f64..1.0)),
        deph in 0.0f64..0.2,
    ) {
        let v = psi.map(|(a, b)| Complex64::new(a, b));
        prop_assume!(v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3);
        let rho0 = Rho4::from_state(&normalize(v));
        let scheme = LevelScheme { ground_dephasing: [deph, 0.5 * deph, 0.0], ..Default::default() };
        scheme.validate().unwrap();
        let dr = ConstantDrive(drive(p, cc, d1, d2));
        let tr = evolve(&scheme, rho0, &dr, (0.0, 20.0), 0.01, &EvolveOptions::default()).unwrap();
        prop_assert!(tr.max_trace_drift <= 1e-9);
        prop_assert!(tr.max_hermiticity_error() <= 1e-10);
        prop_assert!(tr.min_eigenvalue() >= -1e-8);
        prop_assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn dark_state_does_not_leak(p in 0.01f64..3.0, cc in 0.05f64..3.0, d1 in -2.0f64..2.0) {
        // both legs coupled: dark combination 2Ω_C|b⟩ − Ω_P(|a⟩ + |c⟩)
        let dark = normalize([c(-p), c(2.0 * cc), c(-p), c(0.0)]);
        let rho0 = Rho4::from_state(&dark);
        let dr = ConstantDrive(drive(p, cc, d1, d1));
        let scheme = LevelScheme::default();
        let tr = evolve(&scheme, rho0, &dr, (0.0, 10.0), 0.005, &EvolveOptions::default()).unwrap();
        for s in &tr.states {
            let mut overlap = Complex64::new(0.0, 0.0);
            for i in 0..4 {
                for j in 0..4 {
                    overlap += dark[i].conj() * s.get(i, j) * dark[j];
                }
            }
            prop_assert!(1.0 - overlap.re < 1e-6);
            prop_assert!(s.population(levels::E) < 1e-6);
        }
    }
}

fn rabi_run(dt: f64, t_end: f64) -> Rho4 {
    let scheme = LevelScheme { gamma_e: 0.0, ..Default::default() };
    let d = drive(1.0, 0.0, 0.0, 0.0);
    let n = (t_end / dt).round() as usize;
    let h = t_end / n as f64;
    let bound = RateBound { label: "omega_p", value: 1.0 };
    let mut rho = Rho4::pure_level(levels::B);
    for k in 0..n {
        rho = step_rk4(&rho, k as f64 * h, h, bound, |_, r| rhs(&scheme, &d, r)).unwrap();
    }
    rho
}

fn rabi_error(dt: f64) -> f64 {
    let t_end = 2.0 * std::f64::consts::PI;
    let rho = rabi_run(dt, t_end);
    (rho.population(levels::B) - (0.5 * t_end).cos().powi(2)).abs()
}

#[test]
fn rk4_global_order_four() {
    let t_end = 2.0 * std::f64::consts::PI;
    let reference = rabi_run(0.08 / 64.0, t_end);
    let runs: Vec<Rho4> = [0.08, 0.04, 0.02].iter().map(|&dt| rabi_run(dt, t_end)).collect();
    let err: Vec<f64> = runs.iter().map(|r| r.max_abs_diff(&reference)).collect();
    for w in err.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "ratio {ratio}");
    }
    let richardson = runs[0].max_abs_diff(&runs[1]) / runs[1].max_abs_diff(&runs[2]);
    assert!((richardson - 16.0).abs() <= 0.2 * 16.0, "richardson {richardson}");
}

#[test]
fn rabi_cycle_at_period_over_thousand() {
    assert!(rabi_error(2.0 * std::f64::consts::PI / 1000.0) < 1e-8);
}

#[test]
fn one_leg_four_level_matches_three_level_eigensystem() {
    let (p, cc, d1) = (0.7, 1.3, 0.4);
    let scheme = LevelScheme { gamma_e: 0.0, coupled_legs: [true, false], ..Default::default() };
    let dr = ConstantDrive(drive(p, cc, d1, d1));
    let t_end = 10.0;
    let tr = evolve(&scheme, Rho4::pure_level(levels::B), &dr, (0.0, t_end), 0.002, &EvolveOptions::default())
        .unwrap();
    let es = dressed_eigensystem(
        RabiFrequency::new(p).unwrap(),
        RabiFrequency::new(cc).unwrap(),
        Detuning::new(d1).unwrap(),
        Detuning::new(d1).unwrap(),
    )
    .unwrap();
    let s = &es.states;
    let vecs = [&s.a_plus, &s.a_zero, &s.a_minus];
    // analytic basis (a, b, e) has the probe on its first level: a ↦ b, b ↦ a
    let mut psi = [Complex64::new(0.0, 0.0); 3];
    for (v, l) in vecs.iter().zip(es.eigenvalues) {
        let amp = v[0].conj() * Complex64::from_polar(1.0, -l * t_end);
        for k in 0..3 {
            psi[k] += v[k] * amp;
        }
    }
    let map = [levels::B, levels::A, levels::E];
    let end = tr.final_state();
    for i in 0..3 {
        for j in 0..3 {
            let want = psi[i] * psi[j].conj();
            assert!((end.get(map[i], map[j]) - want).norm() < 1e-6);
        }
    }
    assert!(end.population(levels::C) < 1e-15);
    for v in vecs {
        let pop0 = v[0].norm_sqr();
        let mut pop = Complex64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                pop += v[i].conj() * end.get(map[i], map[j]) * v[j];
            }
        }
        assert!((pop.re - pop0).abs() < 1e-6);
    }
}

#[test]
fn adiabatic_following_of_the_dark_state() {
    // counter-intuitive sequence on one leg; mid-pulse the atom sits in a⁰
    let mut s = short_readout();
    s.repump = None;
    let scheme = LevelScheme { coupled_legs: [true, false], ..Default::default() };
    let dr = LocalDrive {
        schedule: &s,
        eit_coupling: 18.0,
        repump_coupling: 0.0,
        stark_mode: StarkMode::Effective,
        perturbation: None,
    };
    let t_mid = us_to_gamma_time(4.0);
    let dt = 0.05 / 18.0;
    let tr = evolve(&scheme, Rho4::pure_level(levels::B), &dr, (0.0, t_mid), dt, &EvolveOptions::default())
        .unwrap();
    let es = dressed_eigensystem(
        RabiFrequency::new(0.2).unwrap(),
        RabiFrequency::new(18.0).unwrap(),
        Detuning::ZERO,
        Detuning::ZERO,
    )
    .unwrap();
    let dark = &es.states.a_zero;
    let end = tr.final_state();
    assert!((end.population(levels::B) - dark[0].norm_sqr()).abs() < 1e-6);
    assert!((end.population(levels::A) - dark[1].norm_sqr()).abs() < 1e-6);
    assert!(end.population(levels::E) < 1e-6);
}

#[test]
fn node_count_over_sixteen_cycles_and_breakdown() {
    let s = readout_schedule(&ReadoutParams::default()).unwrap();
    let sw = StandingWave::new(18.0, 0.0).unwrap().with_imbalance(0.1).unwrap();
    let r = simulate_readout_point(
        &LevelScheme::default(),
        &s,
        0.0,
        sw.rabi_at(0.0).value(),
        None,
        &SimOptions::default(),
        false,
    )
    .unwrap();
    assert!((r.photons() - r.photons_eit - r.photons_repump).abs() < 1e-12);
    assert!(r.photons_eit > 1.4 && r.photons_repump > 0.0);
    assert!(r.diagnostics.max_trace_drift <= 1e-9);
    assert!(r.diagnostics.max_hermiticity <= 1e-10);
    assert!(r.diagnostics.min_eigenvalue >= -1e-8);
}

fn short_readout() -> PulseSchedule {
    readout_schedule(&ReadoutParams { repeats: 1, ..Default::default() }).unwrap()
}

#[test]
fn neighbor_crosstalk_falls_with_coupling() {
    let s = short_readout();
    let ctx = QubitArrayContext::default();
    let mut last = f64::INFINITY;
    for om in [4.0, 8.0, 18.0, 40.0] {
        let sw = StandingWave::new(om, 0.0).unwrap();
        let n = neighbor_crosstalk(&LevelScheme::default(), &sw, &s, &ctx, &SimOptions::default()).unwrap();
        let v = n.photons[0].max(n.photons[1]);
        assert!(v < last, "omega {om}: {v} vs {last}");
        last = v;
        if om == 18.0 {
            assert!(n.ratio < 1e-2);
            assert!((n.photons[0] - n.photons[1]).abs() <= 1e-12 * n.photons[0].max(1e-300));
        }
    }
}

#[test]
fn shorter_pulse_raises_crosstalk() {
    let ctx = QubitArrayContext::default();
    let sw = StandingWave::new(4.0, 0.0).unwrap();
    let long = short_readout();
    let short = readout_schedule(&ReadoutParams {
        repeats: 1,
        probe_duration_us: 3.0,
        rise_us: 0.5,
        repump_duration_us: 3.0,
        ..Default::default()
    })
    .unwrap();
    let sc = LevelScheme::default();
    let o = SimOptions::default();
    let a = neighbor_crosstalk(&sc, &sw, &long, &ctx, &o).unwrap();
    let b = neighbor_crosstalk(&sc, &sw, &short, &ctx, &o).unwrap();
    assert!(b.photons[0] > a.photons[0]);
    assert!(b.adiabaticity > a.adiabaticity);
}

#[test]
fn crosstalk_monotone_in_amplitude() {
    let s = short_readout();
    let sw = StandingWave::new(18.0, 0.0).unwrap();
    let rep = sw.with_imbalance(0.1).unwrap();
    let sc = LevelScheme::default();
    let o = SimOptions::default();
    let node = simulate_readout_point(&sc, &s, 0.0, rep.rabi_at(0.0).value(), None, &o, true).unwrap();
    let (ts, ps) = node.excited_trace.unwrap();
    let peak = 2.0 * std::f64::consts::PI * 159e3 / GAMMA_D2;
    let base = PerturbationPair::from_excited_trace(peak, peak, &ts, &ps).unwrap();
    let mut last = -1.0;
    for f in [0.0, 1.0, 2.0, 5.0, 10.0] {
        let d = crosstalk_delta(&sc, &sw, &s, &base.scaled(f), 585.0, &o).unwrap();
        if f == 0.0 {
            assert_eq!(d.relative, 0.0);
        }
        assert!(d.relative >= last, "factor {f}: {} < {last}", d.relative);
        last = d.relative;
    }
}

#[test]
fn phase_gate_node_and_antinode() {
    let g = phase_gate_schedule(&PhaseGateParams::default()).unwrap();
    let sw = StandingWave::new(208.0, 8.0).unwrap();
    let sc = LevelScheme::default();
    let o = SimOptions::default();
    let node = simulate_phase_point(&sc, &g, sw.rabi_at(0.0).value(), StarkMode::Effective, &o).unwrap();
    let anti = simulate_phase_point(&sc, &g, sw.rabi_at(195.0).value(), StarkMode::Effective, &o).unwrap();
    assert!(node.coherence >= 0.5 * (1.0 - 2.0 * node.se_prob));
    assert!(anti.phase_rad.abs() < 0.05 * node.phase_rad.abs());
    assert!(node.phase_rad > 0.0);
}

#[test]
fn zero_stark_phase_everywhere() {
    let g = phase_gate_schedule(&PhaseGateParams { stark_peak: 0.0, ..Default::default() }).unwrap();
    let sw = StandingWave::new(16.0, 8.0).unwrap();
    let grid = ScanGrid::new(195.0, 39.0, false);
    let scan = phase_gate_scan(&LevelScheme::default(), &sw, &g, &grid, StarkMode::Effective, &[], &SimOptions::default())
        .unwrap();
    assert!(scan.phase.values.iter().all(|p| p.abs() < 1e-3));
}

#[test]
fn explicit_stark_needs_small_steps() {
    let rho0 = Rho5::pure_level(levels::B);
    let d = DriveSnapshot {
        omega_stark: 1.6,
        delta_stark: 200.0,
        stark_mode: StarkMode::Explicit,
        ..Default::default()
    };
    let err = evolve(&LevelScheme::default(), rho0, &ConstantDrive(d), (0.0, 1.0), 0.01, &EvolveOptions::default())
        .unwrap_err();
    assert!(err.to_string().contains("delta_stark"), "{err}");
}
