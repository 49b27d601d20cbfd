//! Exact structural laws of the closed-form observables, checked as
//! properties over random tables.

mod common;

use common::{c, map_table, random_table, rel};
use num_complex::Complex64;
use phd_core::model::EnsembleParams;
use phd_core::nscaling::{brute_force_moment, evaluate_moment, expand_moment, required_tuples, MomentTable};
use phd_core::observables::{g2, g2_coefficients, quadrature_min_variance, row_transforms, spectrum, FrequencyGrid};
use phd_core::quad::{integrate, ordered_double, ordered_prefix, trapezoid_weights};
use proptest::prelude::*;

fn table_strategy() -> impl Strategy<Value = (usize, usize, f64, usize, u64)> {
    (2usize..6, 6usize..40, 0.05f64..0.5, any::<u64>()).prop_flat_map(|(m, k, dt, seed)| (Just(m), Just(k), Just(dt), 0..m, Just(seed)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn variance_excess_is_linear_in_n((m, k, dt, i, seed) in table_strategy(), n1 in 1u32..1000, n2 in 1u32..1_000_000, omega in 0.2f64..6.0) {
        let t = random_table(m, k, dt, i, seed);
        for full in [true, false] {
            let v1 = quadrature_min_variance(&t, omega, &EnsembleParams::new(n1 as f64, 1e-4).unwrap(), full).unwrap();
            let v2 = quadrature_min_variance(&t, omega, &EnsembleParams::new(n2 as f64, 1e-4).unwrap(), full).unwrap();
            prop_assert!(rel(v2.excess / v1.excess, n2 as f64 / n1 as f64) < 1e-12);
            prop_assert!(rel(v1.min_variance - 0.25, v1.excess) < 1e-6);
            prop_assert!(v2.theta_star == v1.theta_star);
        }
    }

    #[test]
    fn spectrum_scales_with_pair_and_single_counts((m, k, dt, i, seed) in table_strategy(), n1 in 2u32..1000, n2 in 2u32..1_000_000) {
        let t = random_table(m, k, dt, i, seed);
        let f = FrequencyGrid::new(vec![0.4, 1.7, 4.1]).unwrap();
        let s1 = spectrum(&t, &f, &EnsembleParams::new(n1 as f64, 1e-6).unwrap()).unwrap();
        let s2 = spectrum(&t, &f, &EnsembleParams::new(n2 as f64, 1e-6).unwrap()).unwrap();
        let (a, b) = (n1 as f64, n2 as f64);
        for (p, q) in s1.points.iter().zip(&s2.points) {
            prop_assert!(rel(q.s_coh * a * (a - 1.0), p.s_coh * b * (b - 1.0)) < 1e-12);
            prop_assert!(rel(q.s_inc * a, p.s_inc * b) < 1e-12);
        }
    }

    #[test]
    fn g2_independent_of_coupling((m, k, dt, i, seed) in table_strategy(), n in 1u32..100_000, omega in 0.2f64..6.0) {
        let t = random_table(m, k, dt, i, seed);
        let a = g2(&t, omega, &EnsembleParams::new(n as f64, 1e-5).unwrap()).unwrap();
        let b = g2(&t, omega, &EnsembleParams::new(n as f64, 2e-5).unwrap()).unwrap();
        prop_assert!(rel(a.g2.unwrap(), b.g2.unwrap()) < 1e-12);
    }

    #[test]
    fn g2_coefficients_are_non_negative((m, k, dt, i, seed) in table_strategy(), omega in 0.2f64..6.0) {
        let co = g2_coefficients(&random_table(m, k, dt, i, seed), omega, 0.01).unwrap();
        prop_assert!(co.d0 >= 0.0 && co.d4 >= 0.0 && co.d2_tilde >= 0.0);
        for n in 1..12 {
            prop_assert!(co.evaluate(n as f64).numerator >= 0.0);
        }
    }

    /// Rephasing the eigenbasis, φ_m → e^{iα_m}φ_m, is unobservable.
    #[test]
    fn observables_invariant_under_eigenstate_phases((m, k, dt, i, seed) in table_strategy(), alphas in prop::collection::vec(0.0f64..6.3, 6), omega in 0.2f64..6.0) {
        let t = random_table(m, k, dt, i, seed);
        let r = map_table(&t, |a, b, _, p| p * Complex64::from_polar(1.0, alphas[b] - alphas[a]));
        let ens = EnsembleParams::new(1e4, 1e-3).unwrap();
        let f = FrequencyGrid::new(vec![omega]).unwrap();
        let (s, sr) = (spectrum(&t, &f, &ens).unwrap(), spectrum(&r, &f, &ens).unwrap());
        prop_assert!(rel(s.points[0].s_total, sr.points[0].s_total) < 1e-10);
        for full in [true, false] {
            let (v, vr) = (quadrature_min_variance(&t, omega, &ens, full).unwrap(), quadrature_min_variance(&r, omega, &ens, full).unwrap());
            prop_assert!(rel(v.excess, vr.excess) < 1e-10);
        }
        let (g, gr) = (g2(&t, omega, &ens).unwrap(), g2(&r, omega, &ens).unwrap());
        prop_assert!(rel(g.g2.unwrap(), gr.g2.unwrap()) < 1e-10);
    }

    #[test]
    fn ordered_halves_sum_to_the_square(vals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 2..80), steps in prop::collection::vec(0.01f64..1.0, 80)) {
        let k = vals.len();
        let times: Vec<f64> = steps[..k].iter().scan(0.0, |acc, h| { let t = *acc; *acc += h; Some(t) }).collect();
        let g: Vec<Complex64> = vals.iter().map(|v| c(v.0, v.1)).collect();
        let f: Vec<Complex64> = vals.iter().map(|v| c(v.2, v.3)).collect();
        let square = integrate(&times, &g) * integrate(&times, &f);
        let sum = ordered_double(&times, &g, &f) + ordered_double(&times, &f, &g);
        prop_assert!((sum - square).norm() <= 1e-12 * (1.0 + square.norm()));
        let w = trapezoid_weights(&times);
        let pre = ordered_prefix(&w, &f);
        let last = integrate(&times, &f) - f[k - 1] * (0.5 * w[k - 1]);
        prop_assert!((pre[k - 1] - last).norm() <= 1e-12 * (1.0 + last.norm()));
    }

    /// The reverse ordering is the forward one with the factors exchanged.
    #[test]
    fn reverse_integral_is_forward_of_swapped_pair((m, k, dt, i, seed) in table_strategy(), omega in 0.2f64..6.0) {
        let t = random_table(m, k, dt, i, seed);
        let rt = row_transforms(&t, omega);
        let mut rev = c(0.0, 0.0);
        for n in (0..m).filter(|&n| n != i) {
            let e = |a: usize, b: usize| -> Vec<Complex64> { (0..k).map(|j| Complex64::from_polar(1.0, omega * t.times[j]) * t.get(a, b, j)).collect() };
            rev += ordered_double(&t.times, &e(n, i), &e(i, n));
        }
        prop_assert!((rt.ordered_reverse - rev).norm() <= 1e-12 * (1.0 + rev.norm()));
    }

    #[test]
    fn moment_expansion_equals_enumeration(k in 2usize..=4, n in 1usize..=6, vals in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 15)) {
        let moments: MomentTable = required_tuples(k).into_iter().zip(&vals).map(|(t, v)| (t, c(v.0, v.1))).collect();
        let fast = evaluate_moment(&expand_moment(k, n as u64).unwrap(), &moments).unwrap();
        let slow = brute_force_moment(k, n, &moments).unwrap();
        prop_assert!((fast - slow).norm() <= 1e-12 * slow.norm().max(1.0));
    }

    /// Multiplicities of all partitions add up to N^k.
    #[test]
    fn multiplicities_count_all_assignments(k in 2usize..=4, n in 1u64..50) {
        let total: f64 = expand_moment(k, n).unwrap().iter().map(|t| t.multiplicity).sum();
        prop_assert_eq!(total, (n as f64).powi(k as i32));
    }
}
