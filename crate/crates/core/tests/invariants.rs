use std::sync::Arc;

use larmor_core::quadrature::{aligned_grid, uniform};
use larmor_core::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn staircase() -> impl Strategy<Value = BarrierSpec> {
    (0.5f64..8.0, 0.2f64..3.0, prop::collection::vec(-1.0f64..6.0, 1..6)).prop_map(|(a, d, heights)| {
        let n = heights.len();
        BarrierSpec::staircase(a, a + d, n, |off| heights[((off / (0.5 * d)) * n as f64) as usize % n]).unwrap()
    })
}

fn wavenumber() -> impl Strategy<Value = f64> {
    0.05f64..4.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn barrier_is_mirror_symmetric(spec in staircase(), xi in 0.0f64..2.0) {
        let xc = spec.midpoint();
        prop_assert_eq!(barrier_value(&spec, xc - xi), barrier_value(&spec, xc + xi));
        prop_assert_eq!(spec.value(spec.a() - xi - 1e-9), 0.0);
        prop_assert_eq!(spec.value(spec.b() + xi + 1e-9), 0.0);
    }

    #[test]
    fn zero_field_leaves_barrier_unchanged(spec in staircase()) {
        for spin in [Spin::Up, Spin::Down] {
            prop_assert_eq!(&effective_barrier(&spec, &FieldSpec::zero(), spin).unwrap(), &spec);
        }
    }

    #[test]
    fn flux_is_conserved(spec in staircase(), k in wavenumber()) {
        let s = ScatteringSolution::new(&spec, k).unwrap();
        prop_assert!((s.transmission() + s.reflection() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn amplitudes_do_not_depend_on_position(spec in staircase(), k in wavenumber(), shift in 0.1f64..20.0) {
        let moved = BarrierSpec::new(spec.a() + shift, spec.b() + shift, spec.segments().to_vec(), spec.floor()).unwrap();
        let s0 = ScatteringSolution::new(&spec, k).unwrap();
        let s1 = ScatteringSolution::new(&moved, k).unwrap();
        prop_assert!((s0.a_out().norm() - s1.a_out().norm()).abs() < 1e-10 * (1.0 + s0.a_out().norm()));
        prop_assert!((s0.transmission() - s1.transmission()).abs() < 1e-10);
    }

    #[test]
    fn outer_solution_is_plane_waves(spec in staircase(), k in wavenumber(), dx in 0.0f64..10.0) {
        let s = ScatteringSolution::new(&spec, k).unwrap();
        let i = Complex64::i();
        let xl = spec.a() - dx;
        let want_l = (i * k * xl).exp() + s.b_out() * (-i * k * xl).exp();
        prop_assert!((s.psi(xl) - want_l).norm() < 1e-10 * (1.0 + want_l.norm()));
        let xr = spec.b() + dx;
        let want_r = s.a_out() * (i * k * xr).exp();
        prop_assert!((s.psi(xr) - want_r).norm() < 1e-10 * (1.0 + want_r.norm()));
    }

    #[test]
    fn sampling_does_not_change_values(spec in staircase(), k in wavenumber()) {
        let xs = aligned_grid(spec.a(), spec.b(), spec.a() - 3.0, spec.b() + 3.0, 0.05);
        let mut dense = Vec::with_capacity(2 * xs.len());
        for w in xs.windows(2) {
            dense.push(w[0]);
            dense.push(0.5 * (w[0] + w[1]));
        }
        dense.push(xs[xs.len() - 1]);
        let c = solve_stationary(&spec, k, xs.into()).unwrap();
        let f = solve_stationary(&spec, k, dense.into()).unwrap();
        for (j, v) in c.psi_full.values().iter().enumerate() {
            prop_assert_eq!(*v, f.psi_full.values()[2 * j]);
        }
    }

    #[test]
    fn split_coefficients(spec in staircase(), k in wavenumber()) {
        let sp = SplitSolution::new(&spec, k).unwrap();
        let (t, r) = (sp.full().transmission(), sp.full().reflection());
        prop_assert!((sp.a_in() + sp.b_in() - 1.0).norm() < 1e-12);
        if !sp.is_degenerate() {
            prop_assert!((sp.a_in().norm_sqr() - t).abs() < 1e-8);
            prop_assert!((sp.b_in().norm_sqr() - r).abs() < 1e-8);
        }
    }

    #[test]
    fn reflected_part_stays_left_of_midpoint(spec in staircase(), k in wavenumber(), xi in 0.0f64..5.0) {
        let sp = SplitSolution::new(&spec, k).unwrap();
        let xc = spec.midpoint();
        prop_assert_eq!(sp.psi_ref(xc), Complex64::new(0.0, 0.0));
        prop_assert_eq!(sp.psi_ref(xc + xi), Complex64::new(0.0, 0.0));
        let (psi, dpsi) = sp.eval_ref(xc);
        prop_assert!((psi.conj() * dpsi).im.abs() < 1e-9);
        let x = spec.a() - 2.0 + xi * (xc - spec.a() + 4.0) / 5.0;
        let sum = sp.psi_tr(x) + sp.psi_ref(x);
        prop_assert!((sum - sp.psi_full(x)).norm() < 1e-9 * (1.0 + sp.psi_full(x).norm()));
    }

    #[test]
    fn decomposition_is_linear(spec in staircase(), k in wavenumber(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let c = Complex64::new(re, im);
        prop_assume!(c.norm() > 1e-3);
        let xs: Arc<[f64]> = aligned_grid(spec.a(), spec.b(), spec.a() - 2.0, spec.b() + 2.0, 0.05).into();
        let state = solve_stationary(&spec, k, xs).unwrap();
        let d1 = decompose(&state, &spec).unwrap();
        let dc = decompose(&state.scaled(c), &spec).unwrap();
        let tol = 1e-10 * c.norm() * (1.0 + state.psi_full.values().iter().map(|v| v.norm()).fold(0.0, f64::max));
        prop_assert!(dc.psi_ref.max_abs_diff(&d1.psi_ref.scaled(c)) < tol);
        prop_assert!(dc.psi_tr.max_abs_diff(&d1.psi_tr.scaled(c)) < tol);
        prop_assert_eq!(dc.a_in, d1.a_in);
    }

    #[test]
    fn stationary_times_are_non_negative(spec in staircase(), k in wavenumber()) {
        let dwell = dwell_time_stationary(&spec, k).unwrap();
        prop_assert!(dwell.tr.is_finite() && dwell.tr >= 0.0);
        if let Some(r) = dwell.reflected {
            prop_assert!(r.is_finite() && r >= 0.0);
        }
    }

    #[test]
    fn gaussian_spectrum_moments(k0 in 0.5f64..4.0, l0 in 5.0f64..100.0) {
        prop_assume!(k0 * l0 > 4.5);
        let amp = build_gaussian_amplitude(k0, l0, 8.0).unwrap();
        prop_assert!((amp.norm_sqr() - 1.0).abs() < 1e-10);
        prop_assert!((amp.mean_k() / k0 - 1.0).abs() < 1e-3);
        prop_assert!((amp.position_variance().sqrt() / l0 - 1.0).abs() < 1e-3);
        prop_assert!(amp.values().iter().all(|&a| a >= 0.0));
        prop_assert!(amp.ks().iter().all(|&k| k > 0.0));
    }

    #[test]
    fn bloch_vector_is_bounded(
        ups in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 40),
        downs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 40),
    ) {
        // Random spinors that vanish inside the barrier, which sits on [5, 6].
        let xs: Arc<[f64]> = uniform(-20.0, 31.0, 1020).into();
        let field = |c: &[(f64, f64)]| {
            ComplexField::from_fn(xs.clone(), |x| {
                if (4.9..=6.1).contains(&x) {
                    return Complex64::new(0.0, 0.0);
                }
                let j = ((x + 20.0) / 51.0 * 39.0).round() as usize;
                Complex64::new(c[j].0, c[j].1) + 1e-3
            })
            .unwrap()
        };
        let s = SpinorField::new(field(&ups), field(&downs)).unwrap();
        let spec = BarrierSpec::rectangular(5.0, 6.0, 2.0).unwrap();
        let m = asymptotic_spin_measurement(&s, &spec, (1.0, 1.0)).unwrap();
        for b in [m.tr, m.reflected] {
            prop_assert!(b.norm_sqr() <= 0.25 + 1e-12);
            prop_assert!((b.theta - (2.0 * b.sz).acos()).abs() < 1e-12);
            prop_assert!((b.phi - b.sy.atan2(b.sx)).abs() < 1e-12);
        }
    }
}
