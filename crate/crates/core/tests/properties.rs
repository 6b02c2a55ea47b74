mod common;

use common::{power_singular, power_weighted, RawSystem};
use nalgebra::DMatrix;
use num_complex::Complex64;
use pbcert::charroots::{count_roots_right_of, count_roots_right_of_with, ContourConfig};
use pbcert::ddesim::{check_invariance, detect_limit, integrate, DdeProblem, DetectConfig, GoodwinRhs, History, Interpolation, OrbitVerdict, Section};
use pbcert::freqcheck::{
    check_circle_condition, check_gain_condition, check_gain_condition_with, eval_transfer, weighted_norm, SweepConfig,
    SystemLine,
};
use pbcert::goodwin::{
    classify_point, closed_form_transfer, compute_delta_beta, compute_kappa0, g, linearization, lurje_lipschitz,
    lurje_system, region_bounds, solve_eta0, solve_theta1, stationary_point, ClassifyConfig, Label,
};
use pbcert::parabolic::{spectral_gap_check, DiagonalParabolicModel};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_complex(rng: &mut StdRng, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
}

fn random_spd(rng: &mut StdRng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn enlarging_contour_keeps_count(seed in any::<u64>(), c in prop_oneof![Just(0.0), Just(-0.5)], scale in 1.5f64..4.0) {
        let raw = RawSystem::random(seed);
        let qp = raw.quasi_polynomial();
        if let Ok(base) = count_roots_right_of(&qp, c) {
            let cfg = ContourConfig { enlarge: scale, ..ContourConfig::default() };
            let big = count_roots_right_of_with(&qp, c, &cfg).unwrap();
            prop_assert_eq!(base.count, big.count);
            let doubled = count_roots_right_of_with(&qp, c, &ContourConfig::default().doubled()).unwrap();
            prop_assert_eq!(base.count, doubled.count);
        }
    }

    #[test]
    fn count_parity_matches_real_axis_sign(seed in any::<u64>(), c in -0.5f64..0.5) {
        let raw = RawSystem::random(seed);
        let qp = raw.quasi_polynomial();
        if let Ok(rc) = count_roots_right_of(&qp, c) {
            let right = raw.root_bound(c) + 1.0;
            let a = qp.det(Complex64::new(c, 0.0)).re;
            let b = qp.det(Complex64::new(right, 0.0)).re;
            prop_assert_eq!(rc.count % 2 == 1, (a > 0.0) != (b > 0.0));
        }
    }

    #[test]
    fn newton_oracle_agrees(seed in any::<u64>(), c in prop_oneof![Just(0.0), Just(-0.5)]) {
        let raw = RawSystem::random(seed);
        prop_assume!(raw.line_min(c) > 1e-6);
        let rc = count_roots_right_of(&raw.quasi_polynomial(), c).unwrap();
        prop_assert_eq!(rc.count, raw.newton_count(c));
    }

    #[test]
    fn determinant_matches_cofactor_oracle(seed in any::<u64>(), re in -2.0f64..2.0, im in -5.0f64..5.0) {
        let raw = RawSystem::random(seed);
        let p = Complex64::new(re, im);
        let a = raw.quasi_polynomial().det(p);
        let b = raw.det(p);
        prop_assert!((a - b).norm() <= 1e-10 * (1.0 + b.norm()));
    }

    #[test]
    fn weighted_norm_matches_power_iteration(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (r, m) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let w = random_complex(&mut rng, r, m);
        let plain = weighted_norm(&w, &DMatrix::identity(m, m), &DMatrix::identity(r, r)).unwrap();
        let oracle = power_singular(&w);
        prop_assert!((plain - oracle).abs() <= 1e-10 * (1.0 + oracle), "{} vs {}", plain, oracle);
        let (m1, m2) = (random_spd(&mut rng, m), random_spd(&mut rng, r));
        let weighted = weighted_norm(&w, &m1, &m2).unwrap();
        let oracle = power_weighted(&w, &m1, &m2);
        prop_assert!((weighted - oracle).abs() <= 1e-8 * (1.0 + oracle), "{} vs {}", weighted, oracle);
    }

    #[test]
    fn closed_form_transfer_matches_pipeline(tau in 0.05f64..3.0, lambda in 0.05f64..1.5, rho in 0.01f64..0.84, re in -1.0f64..1.0, im in -20.0f64..20.0) {
        let sys = lurje_system(tau, lambda, rho, 1.0);
        let p = Complex64::new(re, im);
        let pipeline = eval_transfer(&sys, p).unwrap()[(0, 0)];
        let closed = closed_form_transfer(tau, lambda, rho, p);
        prop_assert!((pipeline - closed).norm() <= 1e-10 * (1.0 + closed.norm()));
    }

    #[test]
    fn sweep_sup_covers_negative_frequencies(tau in 0.1f64..3.0, lambda in 0.1f64..1.5, rho in 0.5f64..0.8, w in 0.0f64..50.0) {
        let delta = compute_delta_beta(1.5, lambda).unwrap();
        let sys = lurje_system(tau, lambda, rho, lurje_lipschitz(rho, compute_kappa0(), delta));
        let rep = check_gain_condition(&sys, lambda).unwrap();
        let v = eval_transfer(&sys, Complex64::new(-lambda, -w)).unwrap()[(0, 0)].norm();
        prop_assert!(v <= rep.extremum + 1e-9);
    }

    #[test]
    fn sweep_sup_stable_under_doubling(tau in 0.1f64..3.0, lambda in 0.1f64..1.5, rho in 0.5f64..0.8) {
        let sys = lurje_system(tau, lambda, rho, 1.0);
        let base = SweepConfig::default();
        let doubled = SweepConfig { initial_samples: 1024, max_uniform_samples: base.max_uniform_samples * 2, ..base };
        let a = check_gain_condition_with(&sys, lambda, &base).unwrap().extremum;
        let b = check_gain_condition_with(&sys, lambda, &doubled).unwrap().extremum;
        prop_assert!(b >= a - 1e-12 && (b - a).abs() < 1e-8, "{} {}", a, b);
    }

    #[test]
    fn gain_condition_implies_circle_condition(tau in 0.05f64..3.0, lambda in 0.05f64..1.5, frac in 0.5f64..1.0, beta in prop_oneof![Just(1.5), Just(3.0)]) {
        let kappa0 = compute_kappa0();
        let delta = compute_delta_beta(beta, lambda).unwrap();
        let rho = frac * kappa0;
        let sys = lurje_system(tau, lambda, rho, lurje_lipschitz(rho, kappa0, delta));
        let gain = check_gain_condition(&sys, lambda).unwrap();
        if gain.passed {
            let circle = check_circle_condition(&SystemLine::new(&sys, lambda).unwrap(), rho - kappa0, rho + delta).unwrap();
            prop_assert!(circle.passed, "{:?}", circle);
        }
    }

    #[test]
    fn theta1_and_eta0_residuals(tau in 0.01f64..10.0, lambda in 0.01f64..3.0) {
        let t = solve_theta1(tau, lambda);
        prop_assert!(t > 0.0 && t < std::f64::consts::FRAC_PI_3);
        prop_assert!((tau * lambda * t.tan() - std::f64::consts::PI + 3.0 * t).abs() < 1e-12);
        let eta = solve_eta0(lambda);
        let l3 = lambda.powi(3);
        prop_assert!((g(eta) - l3 * eta).abs() < 1e-12);
        // the residual is strictly decreasing, so the root is unique
        let samples: Vec<f64> = (0..=200).map(|i| { let s = i as f64 / 200.0 / l3; g(s) - l3 * s }).collect();
        prop_assert!(samples.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn delta_beta_nondecreasing_in_beta(lambda in 0.05f64..1.5, b1 in 1.01f64..4.0, db in 0.0f64..3.0) {
        let lo = compute_delta_beta(b1, lambda).unwrap();
        let hi = compute_delta_beta(b1 + db, lambda).unwrap();
        prop_assert!(lo < 0.0 && hi < 0.0);
        prop_assert!(hi >= lo - 1e-14);
    }

    #[test]
    fn spectral_gap_equivalence(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.random_range(2..12);
        let mut ev: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..50.0)).collect();
        ev.sort_by(f64::total_cmp);
        let j = rng.random_range(1..n);
        for alpha in [0.0, 0.25, 0.5, 0.75] {
            let lipschitz = rng.random_range(0.01..5.0);
            let model = DiagonalParabolicModel::new(ev.clone(), alpha, lipschitz, j).unwrap();
            let r = spectral_gap_check(&model).unwrap();
            prop_assert_eq!(r.passed, r.resolvent_condition_passed, "{:?}", r);
            for w in [0.0, 0.5, 3.0, 40.0] {
                prop_assert!(pbcert::parabolic::resolvent_norm_at(&model, r.nu_opt, w) <= r.resolvent_sup_at_nu);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn certified_labels_survive_candidate_supersets(tau in 0.05f64..3.0, lambda in 0.05f64..1.5) {
        let base = classify_point(tau, lambda, &ClassifyConfig { beta_set: vec![3.0], ..ClassifyConfig::default() });
        let wider = classify_point(tau, lambda, &ClassifyConfig { beta_set: vec![3.0, 1.5, 2.0], ..ClassifyConfig::default() });
        if base.is_certified() {
            prop_assert_eq!(base.label, wider.label);
        }
    }

    #[test]
    fn labels_match_recounted_roots(tau in 0.05f64..3.0, lambda in 0.05f64..1.5) {
        let p = classify_point(tau, lambda, &ClassifyConfig::default());
        let qp = linearization(tau, lambda, p.slope_at_eta0);
        let expected = match p.label {
            Label::StablePoint => 0,
            Label::StablePeriodicOrbit => 2,
            Label::Uncertified => return Ok(()),
        };
        let rc = count_roots_right_of_with(&qp, 0.0, &ContourConfig::default().doubled()).unwrap();
        prop_assert_eq!(rc.count, expected);
    }

    #[test]
    fn region_is_invariant(seed in any::<u64>(), tau in 0.3f64..2.5, lambda in 0.3f64..1.2) {
        let mut rng = StdRng::seed_from_u64(seed);
        let bounds = region_bounds(1.5, lambda);
        let samples: Vec<Vec<f64>> = (0..9)
            .map(|_| bounds.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)).collect())
            .collect();
        let history = History::from_samples(samples, Interpolation::Linear).unwrap();
        let prob = DdeProblem::new(GoodwinRhs { lambda }, tau, history).unwrap();
        let traj = integrate(&prob, 0.05, 50.0 * tau).unwrap();
        prop_assert!(check_invariance(&traj, 1.5, lambda).unwrap());
    }
}

#[test]
fn period_stable_under_refinement() {
    for &(tau, lambda) in &[(2.5, 0.5), (2.9, 0.35)] {
        let phi0 = stationary_point(lambda);
        let history = History::constant(vec![phi0[0] * 1.2, phi0[1] * 0.9, phi0[2] * 1.1]);
        let section = Section { component: 2, level: phi0[2] };
        let period = |h: f64, tol: f64| {
            let prob = DdeProblem::new(GoodwinRhs { lambda }, tau, history.clone()).unwrap();
            let traj = integrate(&prob, h, 300.0 * tau).unwrap();
            let cfg = DetectConfig { crossing_tolerance: tol, ..DetectConfig::default() };
            match detect_limit(&traj, &phi0, section, &cfg) {
                OrbitVerdict::ConvergedToPeriodicOrbit { period, .. } => period,
                v => panic!("{v:?}"),
            }
        };
        let base = period(tau / 50.0, 1e-10);
        for other in [period(tau / 100.0, 1e-10), period(tau / 50.0, 5e-11)] {
            assert!(((other - base) / base).abs() < 1e-4, "{base} {other}");
        }
    }
}
