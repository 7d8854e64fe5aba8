use apstab_core::integrator::{integrate, integrate_unchecked, HistoryFunction, SimConfig, Trajectory};
use apstab_core::presets;

/// Method-of-steps pieces of `u' = −u(t−1)`, `u ≡ 1` before 0, in `s = t − k`.
fn pure_delay_exact(horizon: usize) -> Vec<Vec<f64>> {
    let mut pieces: Vec<Vec<f64>> = Vec::new();
    let mut prev = vec![1.0];
    for _ in 0..horizon {
        let start: f64 = if pieces.is_empty() { 1.0 } else { prev.iter().sum() };
        let mut next = vec![start];
        next.extend(prev.iter().enumerate().map(|(k, c)| -c / (k + 1) as f64));
        pieces.push(next.clone());
        prev = next;
    }
    pieces
}

fn exact_at(pieces: &[Vec<f64>], t: f64) -> f64 {
    let k = (t.floor() as usize).min(pieces.len() - 1);
    let s = t - k as f64;
    pieces[k].iter().rev().fold(0.0, |acc, c| acc * s + c)
}

fn max_error(h: f64, horizon: f64) -> f64 {
    let model = presets::pure_delay().unwrap();
    let cfg = SimConfig {
        step: h,
        horizon,
        ..SimConfig::default()
    };
    let traj = integrate_unchecked(&model, cfg).unwrap();
    let exact = pure_delay_exact(horizon.ceil() as usize);
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(t, u)| (u[0] - exact_at(&exact, *t)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn method_of_steps_oracle_is_consistent() {
    let pieces = pure_delay_exact(3);
    assert_eq!(exact_at(&pieces, 0.5), 0.5);
    assert!(exact_at(&pieces, 1.0).abs() < 1e-15);
    // u(2) = −1 + 1/2
    assert!((exact_at(&pieces, 2.0) + 0.5).abs() < 1e-15);
}

#[test]
fn halving_the_step_gains_at_least_third_order() {
    let factor = max_error(1e-2, 8.0) / max_error(5e-3, 8.0);
    assert!(factor >= 8.0, "factor {factor}");
}

#[test]
fn pure_delay_is_not_admitted_without_override() {
    let model = presets::pure_delay().unwrap();
    assert!(integrate(&model, SimConfig::default()).is_err());
}

#[test]
fn csv_export_row_count_and_round_trip() {
    let model = presets::scalar_atom(0.0)
        .with_history(HistoryFunction::constant(vec![1.0]))
        .unwrap();
    let cfg = SimConfig {
        step: 0.01,
        horizon: 1.0,
        record_stride: 5,
        ..SimConfig::default()
    };
    let traj = integrate(&model, cfg).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), 1 + 1 + 20);
    let back = Trajectory::read_csv(buf.as_slice(), "scalar-atom").unwrap();
    assert_eq!(back.states, traj.states);
    assert!((back.spacing - 0.05).abs() < 1e-15);
}

#[test]
fn recorded_samples_are_reproduced_by_interpolation() {
    let traj = integrate(
        &presets::periodic_network(),
        SimConfig {
            horizon: 5.0,
            ..SimConfig::default()
        },
    )
    .unwrap();
    for k in (0..traj.len()).step_by(37) {
        assert_eq!(traj.interpolate(traj.times[k]).unwrap(), traj.states[k]);
    }
}

#[test]
fn distributed_constant_history_is_an_equilibrium_for_linear_activations() {
    // u' = −u + ∫2e^{−2s}·u(t−s)ds with scalar_distributed's shape but unit gains
    let mut model = presets::scalar_distributed();
    model.d[0] = apstab_core::model::QuasiPeriodicSignal::constant(1.0);
    model.a[0][0] = apstab_core::model::QuasiPeriodicSignal::zero();
    model.kernels[0][0].densities[0].coefficient = apstab_core::model::QuasiPeriodicSignal::constant(1.0);
    model.activations.f[0] = apstab_core::model::ActivationSpec::identity();
    let c = 0.8;
    let model = model.with_history(HistoryFunction::constant(vec![c])).unwrap();
    let cfg = SimConfig {
        step: 0.01,
        horizon: 5.0,
        tail_tolerance: 1e-10,
        ..SimConfig::default()
    };
    let traj = integrate_unchecked(&model, cfg).unwrap();
    for u in &traj.states {
        assert!((u[0] - c).abs() <= 1e-10 + 1e-6);
    }
}
