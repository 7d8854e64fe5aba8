use apstab_core::certificate::{
    brute_force_feasibility, build_comparison_matrix, certify_at_beta, check_pointwise_criterion, maximize_beta,
    row_slacks, spectral_radius, uniform_times, CertMethod, StabilityCertificate, DEFAULT_BETA_TOL,
};
use apstab_core::integrator::HistoryFunction;
use apstab_core::model::{
    derive_bounds, ActivationSpec, Atom, BoundsSummary, Coefficients, DelayKernel, Density, NetworkModel,
    QuasiPeriodicSignal, Term,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bounds(seed: u64, n: usize) -> BoundsSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |lo: f64, hi: f64| rng.gen_range(lo..hi);
    let a_sup: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| u(0.0, 1.0)).collect()).collect();
    let tau_sup: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| u(0.0, 1.0)).collect()).collect();
    let kernels: Vec<Vec<DelayKernel>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    DelayKernel::new(
                        vec![Atom {
                            lag: u(0.0, 1.0),
                            weight: QuasiPeriodicSignal::constant(u(0.0, 1.0)),
                        }],
                        vec![Density {
                            coefficient: QuasiPeriodicSignal::constant(u(0.0, 1.0)),
                            p: u(0.0, 2.0),
                            q: 0,
                            lambda: u(1.0, 3.0),
                        }],
                    )
                    .unwrap()
                })
                .collect()
        })
        .collect();
    let d_inf = (0..n).map(|_| u(0.5, 3.0 * n as f64)).collect();
    let g_lip = (0..n).map(|_| u(0.0, 1.5)).collect();
    let f_lip = (0..n).map(|_| u(0.0, 1.5)).collect();
    BoundsSummary::from_parts(
        d_inf,
        a_sup,
        tau_sup,
        g_lip,
        f_lip,
        kernels,
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    )
    .unwrap()
}

fn min_slack(bounds: &BoundsSummary, xi: &[f64], beta: f64) -> f64 {
    row_slacks(bounds, xi, beta)
        .unwrap()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Coefficients of `det(λI − A)` (leading first) by Faddeev–LeVerrier.
fn char_poly(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut coeffs = vec![1.0];
    let mut m = vec![vec![0.0; n]; n];
    for k in 1..=n {
        // M_k = A·M_{k−1} + c_{k−1} I
        let prev = m.clone();
        for i in 0..n {
            for j in 0..n {
                m[i][j] = (0..n).map(|l| a[i][l] * prev[l][j]).sum::<f64>();
            }
            m[i][i] += coeffs[k - 1];
        }
        let trace: f64 = (0..n).map(|i| (0..n).map(|l| a[i][l] * m[l][i]).sum::<f64>()).sum();
        coeffs.push(-trace / k as f64);
    }
    coeffs
}

/// Largest real root of the characteristic polynomial of a positive matrix.
fn perron_by_roots(a: &[Vec<f64>]) -> f64 {
    let p = char_poly(a);
    let eval = |x: f64| p.iter().fold(0.0, |acc, c| acc * x + c);
    let mut hi = a.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max) * (1.0 + 1e-12) + 1e-12;
    let steps = 20_000;
    let width = hi / steps as f64;
    let mut lo = hi;
    for _ in 0..steps {
        lo -= width;
        if eval(lo) <= 0.0 {
            break;
        }
        hi = lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn scalar_model(d: QuasiPeriodicSignal, a: f64, b: QuasiPeriodicSignal) -> NetworkModel {
    NetworkModel::from_discrete_delays(
        "scalar",
        Coefficients {
            d: vec![d],
            a: vec![vec![QuasiPeriodicSignal::constant(a)]],
            b: vec![vec![b]],
            tau: vec![vec![QuasiPeriodicSignal::zero()]],
            inputs: vec![QuasiPeriodicSignal::zero()],
            g: vec![ActivationSpec::tanh()],
            f: vec![ActivationSpec::tanh()],
            history: HistoryFunction::constant(vec![0.0]),
        },
    )
    .unwrap()
}

fn sig(offset: f64, amp: f64, freq: f64, phase: f64) -> QuasiPeriodicSignal {
    QuasiPeriodicSignal::new(offset, vec![Term { amp, freq, phase }]).unwrap()
}

#[test]
fn pointwise_slack_follows_varying_inhibition() {
    let model = scalar_model(sig(2.0, 1.0, 1.0, 0.0), 0.0, QuasiPeriodicSignal::constant(0.5));
    let cert = StabilityCertificate {
        xi: vec![1.0],
        beta: 0.0,
        eta: 0.5,
        method: CertMethod::Spectral,
        pointwise_checked: false,
        spectral_radius: None,
    };
    // the grid hits t = 3π/2 where sin t = −1
    let times = uniform_times(0.0, 3.0 * std::f64::consts::PI, 3001);
    let report = check_pointwise_criterion(&model, &cert, &times).unwrap();
    assert!((report.min_slack - 0.5).abs() < 1e-12, "{}", report.min_slack);
    assert!((report.at_time - 1.5 * std::f64::consts::PI).abs() < 1e-2);
}

#[test]
fn pointwise_slack_of_constant_model_equals_eta() {
    let model = scalar_model(
        QuasiPeriodicSignal::constant(2.0),
        0.5,
        QuasiPeriodicSignal::constant(0.5),
    );
    let bounds = derive_bounds(&model).unwrap();
    let cert = certify_at_beta(&bounds, 0.3).unwrap().certificate().unwrap();
    let report = check_pointwise_criterion(&model, &cert, &uniform_times(0.0, 10.0, 101)).unwrap();
    assert!((report.min_slack - cert.eta).abs() < 1e-12);
}

#[test]
fn scalar_failure_and_boundary() {
    let fails = scalar_model(
        QuasiPeriodicSignal::constant(1.0),
        1.0,
        QuasiPeriodicSignal::constant(0.5),
    );
    let b = derive_bounds(&fails).unwrap();
    assert_eq!(min_slack(&b, &[1.0], 0.0), -0.5);
    assert!(!certify_at_beta(&b, 0.0).unwrap().is_feasible());
    assert!(maximize_beta(&b, DEFAULT_BETA_TOL).is_err());

    let boundary = scalar_model(
        QuasiPeriodicSignal::constant(2.0),
        1.0,
        QuasiPeriodicSignal::constant(1.0),
    );
    let b = derive_bounds(&boundary).unwrap();
    assert!(!certify_at_beta(&b, 0.0).unwrap().is_feasible());
    for resolution in [1, 5, 50] {
        assert!(!brute_force_feasibility(&b, 0.0, resolution).unwrap().feasible);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feasibility_is_monotone_in_beta(seed in any::<u64>(), n in 1usize..4, frac in 0.0f64..1.0) {
        let bounds = random_bounds(seed, n);
        let cap = bounds.beta_cap();
        let beta1 = 0.9 * cap * frac;
        if certify_at_beta(&bounds, beta1).unwrap().is_feasible() {
            for beta0 in [0.0, 0.25 * beta1, 0.5 * beta1, 0.99 * beta1] {
                prop_assert!(certify_at_beta(&bounds, beta0).unwrap().is_feasible());
            }
        }
    }

    #[test]
    fn slack_scales_with_weights(seed in any::<u64>(), n in 1usize..4, c in 0.01f64..100.0) {
        let bounds = random_bounds(seed, n);
        let xi: Vec<f64> = (0..n).map(|i| 0.3 + 0.2 * i as f64).collect();
        let scaled: Vec<f64> = xi.iter().map(|v| c * v).collect();
        let base = row_slacks(&bounds, &xi, 0.0).unwrap();
        let big = row_slacks(&bounds, &scaled, 0.0).unwrap();
        for (s, t) in base.iter().zip(&big) {
            prop_assert!((t - c * s).abs() <= 1e-9 * (1.0 + (c * s).abs()));
        }
    }

    #[test]
    fn witnesses_resubstitute(seed in any::<u64>(), n in 1usize..5, frac in 0.0f64..0.9) {
        let bounds = random_bounds(seed, n);
        let beta = frac * bounds.beta_cap();
        if let Some(cert) = certify_at_beta(&bounds, beta).unwrap().certificate() {
            prop_assert!(cert.eta > 0.0);
            prop_assert!((cert.xi.iter().copied().fold(0.0, f64::max) - 1.0).abs() < 1e-15);
            prop_assert!(min_slack(&bounds, &cert.xi, beta) >= cert.eta - 1e-12);
        }
    }

    #[test]
    fn spectral_decision_matches_search(seed in any::<u64>(), n in 1usize..4) {
        let bounds = random_bounds(seed, n);
        let rho = spectral_radius(&build_comparison_matrix(&bounds, 0.0).unwrap().entries).unwrap();
        prop_assume!((rho - 1.0).abs() >= 1e-6);
        let spectral = certify_at_beta(&bounds, 0.0).unwrap().is_feasible();
        prop_assert_eq!(spectral, rho < 1.0);
        prop_assert_eq!(brute_force_feasibility(&bounds, 0.0, 16).unwrap().feasible, spectral);
    }

    #[test]
    fn spectral_radius_matches_characteristic_polynomial(entries in prop::collection::vec(0.01f64..2.0, 16)) {
        let m: Vec<Vec<f64>> = entries.chunks(4).map(<[f64]>::to_vec).collect();
        let rho = spectral_radius(&m).unwrap();
        let oracle = perron_by_roots(&m);
        prop_assert!((rho - oracle).abs() <= 1e-9 * oracle.max(1.0), "{} vs {}", rho, oracle);
    }

    #[test]
    fn pointwise_audit_never_undercuts_eta(
        seed in any::<u64>(),
        amp_d in 0.0f64..0.5,
        amp_a in 0.0f64..0.3,
        amp_b in 0.0f64..0.2,
        frac in 0.0f64..0.9,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2;
        let s = |rng: &mut ChaCha8Rng, offset: f64, amp: f64| {
            sig(offset, amp, rng.gen_range(0.5..2.0), rng.gen_range(0.0..6.0))
        };
        let d: Vec<_> = (0..n).map(|_| { let o = rng.gen_range(2.0..4.0); s(&mut rng, o, amp_d) }).collect();
        let a: Vec<Vec<_>> = (0..n).map(|_| (0..n).map(|_| { let o = rng.gen_range(-0.5..0.5); s(&mut rng, o, amp_a) }).collect()).collect();
        let b: Vec<Vec<_>> = (0..n).map(|_| (0..n).map(|_| { let o = rng.gen_range(-0.5..0.5); s(&mut rng, o, amp_b) }).collect()).collect();
        let tau: Vec<Vec<_>> = (0..n).map(|_| (0..n).map(|_| s(&mut rng, 0.5, 0.3)).collect()).collect();
        let model = NetworkModel::from_discrete_delays("random", Coefficients {
            d, a, b, tau,
            inputs: vec![QuasiPeriodicSignal::zero(); n],
            g: vec![ActivationSpec::tanh(); n],
            f: vec![ActivationSpec::tanh(); n],
            history: HistoryFunction::constant(vec![0.0; n]),
        }).unwrap();
        let bounds = derive_bounds(&model).unwrap();
        let beta = frac * bounds.beta_cap();
        if let Some(cert) = certify_at_beta(&bounds, beta).unwrap().certificate() {
            let report = check_pointwise_criterion(&model, &cert, &uniform_times(0.0, 50.0, 2001)).unwrap();
            prop_assert!(report.min_slack >= cert.eta - 1e-12);
        }
    }
}
