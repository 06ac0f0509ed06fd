use eit_core::dressed::{dark_state_b_population, hamiltonian};
use eit_core::environment::gaussian_fwhm;
use eit_core::protocols::{fwhm, ProfileMetadata, Quantity};
use eit_core::pulses::PulseEnvelope;
use eit_core::*;
use nalgebra::Matrix3;
use num_complex::Complex64;
use proptest::prelude::*;

fn r(v: f64) -> RabiFrequency {
    RabiFrequency::new(v).unwrap()
}
fn d(v: f64) -> Detuning {
    Detuning::new(v).unwrap()
}

fn residual(h: &Matrix3<f64>, v: &nalgebra::Vector3<Complex64>, lambda: f64) -> f64 {
    let hc = h.map(|x| Complex64::new(x, 0.0));
    (hc * v - v * Complex64::new(lambda, 0.0)).norm()
}

proptest! {
    #[test]
    fn dark_state_is_normalized_and_dark(p in 0.0f64..50.0, c in 0.0f64..50.0) {
        prop_assume!(p > 0.0 || c > 0.0);
        let v = dark_state(r(p), r(c)).unwrap();
        prop_assert!((v.norm() - 1.0).abs() < 1e-15);
        prop_assert_eq!(v[2], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn b_population_monotone(p in 0.01f64..20.0, c in 0.01f64..20.0, f in 1.0001f64..3.0) {
        let base = dark_state_b_population(r(p), r(c)).unwrap();
        prop_assert!(dark_state_b_population(r(p * f), r(c)).unwrap() > base);
        prop_assert!(dark_state_b_population(r(p), r(c * f)).unwrap() < base);
    }

    #[test]
    fn mixing_angles_continuous(
        p in 0.01f64..20.0,
        c in 0.01f64..20.0,
        d1 in -20.0f64..20.0,
        s in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let a = mixing_angles(r(p), r(c), d(d1)).unwrap();
        let b = mixing_angles(
            r(p * (1.0 + 1e-8 * s[0])),
            r(c * (1.0 + 1e-8 * s[1])),
            d(d1 * (1.0 + 1e-8 * s[2])),
        )
        .unwrap();
        prop_assert!((a.theta - b.theta).abs() <= 1e-6);
        prop_assert!((a.phi - b.phi).abs() <= 1e-6);
        let half_pi = std::f64::consts::FRAC_PI_2;
        prop_assert!((0.0..=half_pi).contains(&a.theta));
        prop_assert!((0.0..=half_pi).contains(&a.phi));
    }

    #[test]
    fn envelope_is_lipschitz(
        start in 0.0f64..5.0,
        dur in 2.5f64..40.0,
        rise in 0.1f64..1.0,
        peak in 0.0f64..20.0,
        t in -1.0f64..50.0,
        eps in 1e-6f64..0.05,
    ) {
        let e = PulseEnvelope::symmetric(start, dur, rise, r(peak)).unwrap();
        let a = envelope_value(&e, t).value();
        let b = envelope_value(&e, t + eps).value();
        prop_assert!((b - a).abs() <= peak * std::f64::consts::PI * eps / rise + 1e-12);
        prop_assert!((0.0..=peak).contains(&a));
    }

    #[test]
    fn standing_wave_periodic_and_even(
        max in 0.0f64..50.0,
        frac in 0.0f64..1.0,
        node in -300.0f64..300.0,
        x in -1000.0f64..1000.0,
    ) {
        let mut sw = StandingWave::new(max, frac * max).unwrap();
        sw.node_nm = node;
        let v = standing_wave_rabi(&sw, x).value();
        let tol = 1e-9 * (1.0 + max);
        prop_assert!((standing_wave_rabi(&sw, x + 390.0).value() - v).abs() < tol);
        prop_assert!((standing_wave_rabi(&sw, 2.0 * node - x).value() - v).abs() < tol);
        let anti = node + 195.0;
        prop_assert!((standing_wave_rabi(&sw, 2.0 * anti - x).value() - v).abs() < tol);
        prop_assert!(v >= sw.omega_min.value() - tol && v <= sw.omega_max.value() + tol);
    }

    #[test]
    fn bandwidth_ratio_decreases(o in 0.5f64..100.0, f in 1.001f64..4.0) {
        let s = readout_schedule(&ReadoutParams::default()).unwrap();
        prop_assert!(s.bandwidth() / (o * f) < s.bandwidth() / o);
    }

    #[test]
    fn coupling_full_while_probe_on(t in 0.0f64..224.0) {
        let s = readout_schedule(&ReadoutParams::default()).unwrap();
        let e = s.sample(t);
        if e.probe > 0.0 {
            prop_assert_eq!(e.coupling, 1.0);
            prop_assert_eq!(e.repump, 0.0);
        }
    }

    #[test]
    fn convolution_conserves_mass(w in 2.0f64..30.0, sigma in 0.5f64..10.0, skew in 0.5f64..2.0) {
        let half = 4.0 * w * skew.max(1.0) + 8.0 * sigma;
        let n = 2 * ((half / (w / 20.0)).ceil() as i64);
        let xs: Vec<f64> = (0..=n).map(|k| -half + k as f64 * (2.0 * half / n as f64)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let s = if x < 0.0 { w } else { w * skew };
                (-x * x / (2.0 * s * s)).exp()
            })
            .collect();
        let meta = ProfileMetadata {
            quantity: Quantity::Photons,
            omega_c_max: 1.0,
            omega_c_min: 0.0,
            node_nm: 0.0,
            schedule: None,
        };
        let p = ScanProfile::new(xs, ys, meta).unwrap();
        let c = convolve_profile(&p, sigma).unwrap();
        prop_assert!((c.integral() - p.integral()).abs() <= 1e-6 * p.integral());
        prop_assert!(c.peak().1 <= p.peak().1 + 1e-12);
        let wi = p.fwhm_nm.unwrap();
        let wo = c.fwhm_nm.unwrap();
        prop_assert!(wo >= wi.max(gaussian_fwhm(sigma)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn dressed_residuals_at_two_photon_resonance(
        p in 0.0f64..50.0,
        c in 0.0f64..50.0,
        d1 in -50.0f64..50.0,
    ) {
        prop_assume!(p > 1e-6 || c > 1e-6);
        let h = hamiltonian(r(p), r(c), d(d1), d(d1));
        let es = dressed_eigensystem(r(p), r(c), d(d1), d(d1)).unwrap();
        let scale = h.norm();
        prop_assert!(residual(&h, &es.states.a_zero, 0.0) <= 1e-12 * scale);
        prop_assert!(residual(&h, &es.states.a_plus, es.eigenvalues[0]) <= 1e-12 * scale);
        prop_assert!(residual(&h, &es.states.a_minus, es.eigenvalues[2]) <= 1e-12 * scale);
        let s = &es.states;
        for v in [&s.a_plus, &s.a_zero, &s.a_minus] {
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        prop_assert!(s.a_plus.dotc(&s.a_zero).norm() < 1e-12);
        prop_assert!(s.a_plus.dotc(&s.a_minus).norm() < 1e-12);
        prop_assert!(s.a_zero.dotc(&s.a_minus).norm() < 1e-12);
        let dark = dark_state(r(p), r(c)).unwrap();
        prop_assert!((dark - s.a_zero).norm() < 1e-12);
    }
}

#[test]
fn numeric_path_off_resonance() {
    let (p, c, d1, d2) = (0.7, 2.3, 0.4, -1.1);
    let h = hamiltonian(r(p), r(c), d(d1), d(d2));
    let es = dressed_eigensystem(r(p), r(c), d(d1), d(d2)).unwrap();
    assert!(es.eigenvalues[0] >= es.eigenvalues[1] && es.eigenvalues[1] >= es.eigenvalues[2]);
    let s = &es.states;
    for (v, l) in [(&s.a_plus, es.eigenvalues[0]), (&s.a_zero, es.eigenvalues[1]), (&s.a_minus, es.eigenvalues[2])] {
        assert!(residual(&h, v, l) < 1e-12 * h.norm());
    }
    let tr: f64 = es.eigenvalues.iter().sum();
    assert!((tr - h.trace()).abs() < 1e-12);
}

#[test]
fn convolved_fig_scale_kernel() {
    let sigma = ground_state_sigma(&TrapModel::rb87(5.0).unwrap()).unwrap();
    let xs: Vec<f64> = (-2000..=2000).map(|k| k as f64 * 0.05).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| if x == 0.0 { 1.0 } else { 0.0 }).collect();
    let meta = ProfileMetadata {
        quantity: Quantity::Photons,
        omega_c_max: 18.0,
        omega_c_min: 0.0,
        node_nm: 0.0,
        schedule: None,
    };
    let p = ScanProfile::new(xs, ys, meta).unwrap();
    let c = convolve_profile(&p, sigma).unwrap();
    let w = fwhm(&c.positions_nm, &c.values).unwrap();
    assert!((w - 19.6).abs() < 0.05);
}
