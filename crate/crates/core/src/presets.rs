//! Ready-made models: scalar examples with closed-form decay rates and three
//! small networks covering constant, periodic and quasi-periodic coefficients.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use crate::integrator::HistoryFunction;
use crate::model::{
    ActivationSpec, Coefficients, DelayKernel, KernelShape, ModelError, NetworkModel, QuasiPeriodicSignal, Term,
};

fn c(v: f64) -> QuasiPeriodicSignal {
    QuasiPeriodicSignal::constant(v)
}

/// `offset + Σ amp·sin(freq·t + phase)`
fn sig(offset: f64, terms: &[(f64, f64, f64)]) -> QuasiPeriodicSignal {
    QuasiPeriodicSignal {
        offset,
        terms: terms
            .iter()
            .map(|&(amp, freq, phase)| Term { amp, freq, phase })
            .collect(),
    }
}

fn consts(m: &[&[f64]]) -> Vec<Vec<QuasiPeriodicSignal>> {
    m.iter().map(|row| row.iter().map(|&v| c(v)).collect()).collect()
}

/// `u' = −2u + 0.5·tanh(u) + 0.5·tanh(u) + I`; the largest certified rate is 1.
pub fn scalar_atom(input: f64) -> NetworkModel {
    NetworkModel::from_discrete_delays(
        "scalar-atom",
        Coefficients {
            d: vec![c(2.0)],
            a: consts(&[&[0.5]]),
            b: consts(&[&[0.5]]),
            tau: consts(&[&[0.0]]),
            inputs: vec![c(input)],
            g: vec![ActivationSpec::tanh()],
            f: vec![ActivationSpec::tanh()],
            history: HistoryFunction::constant(vec![0.0]),
        },
    )
    .expect("valid preset")
}

/// Like [`scalar_atom`] with `b = 0.5` spread by the density `2e^{−2s}`;
/// the largest certified rate solves `(2−β)² − 0.5(2−β) − 1 = 0`.
pub fn scalar_distributed() -> NetworkModel {
    NetworkModel::from_distributed_delays(
        "scalar-distributed",
        Coefficients {
            d: vec![c(2.0)],
            a: consts(&[&[0.5]]),
            b: consts(&[&[0.5]]),
            tau: consts(&[&[0.0]]),
            inputs: vec![c(0.0)],
            g: vec![ActivationSpec::tanh()],
            f: vec![ActivationSpec::tanh()],
            history: HistoryFunction::constant(vec![0.0]),
        },
        vec![vec![KernelShape {
            p: 2.0,
            q: 0,
            lambda: 2.0,
        }]],
    )
    .expect("valid preset")
}

/// Two neurons with constant coefficients, one discrete and one gamma-type
/// distributed delay. Converges to an equilibrium.
pub fn constant_network() -> NetworkModel {
    let kernels = vec![
        vec![DelayKernel::zero(), DelayKernel::atom(1.0, c(0.4)).expect("valid")],
        vec![
            DelayKernel::density(
                c(0.4),
                KernelShape {
                    p: 9.0,
                    q: 1,
                    lambda: 3.0,
                },
            )
            .expect("valid"),
            DelayKernel::zero(),
        ],
    ];
    NetworkModel::assemble(
        "constant",
        2,
        vec![c(3.0), c(2.5)],
        consts(&[&[0.5, -0.4], &[0.3, 0.2]]),
        kernels,
        consts(&[&[0.0, 0.5], &[0.0, 0.0]]),
        vec![c(1.0), c(-0.5)],
        vec![ActivationSpec::tanh(), ActivationSpec::tanh()],
        vec![ActivationSpec::tanh(), ActivationSpec::tanh()],
        HistoryFunction::constant(vec![0.2, -0.1]),
    )
    .expect("valid preset")
}

/// Two neurons whose coefficients all have period `2π`, with time-varying
/// discrete delays.
pub fn periodic_network() -> NetworkModel {
    NetworkModel::from_discrete_delays(
        "periodic",
        Coefficients {
            d: vec![sig(3.0, &[(0.5, 1.0, 0.0)]), sig(2.5, &[(0.5, 1.0, FRAC_PI_2)])],
            a: vec![
                vec![sig(0.2, &[(0.2, 1.0, 0.0)]), sig(0.0, &[(0.3, 1.0, FRAC_PI_2)])],
                vec![c(-0.3), sig(0.1, &[(0.2, 1.0, 1.0)])],
            ],
            b: vec![
                vec![sig(0.3, &[(0.2, 1.0, 0.0)]), c(0.0)],
                vec![c(0.2), sig(0.0, &[(0.3, 1.0, 0.5)])],
            ],
            tau: vec![
                vec![sig(0.5, &[(0.25, 1.0, 0.0)]), c(0.0)],
                vec![c(1.0), sig(0.8, &[(0.3, 1.0, 2.0)])],
            ],
            inputs: vec![sig(0.0, &[(1.0, 1.0, 0.0)]), sig(0.2, &[(0.5, 1.0, FRAC_PI_2)])],
            g: vec![ActivationSpec::tanh(), ActivationSpec::tanh()],
            f: vec![ActivationSpec::tanh(), ActivationSpec::tanh()],
            history: HistoryFunction::constant(vec![0.5, -0.5]),
        },
    )
    .expect("valid preset")
}

/// Two neurons driven by inputs with the incommensurate frequencies 1 and
/// `√2`, coupled through exponential distributed delays.
pub fn quasi_periodic_network() -> NetworkModel {
    NetworkModel::from_distributed_delays(
        "quasi-periodic",
        Coefficients {
            d: vec![c(3.0), c(2.5)],
            a: consts(&[&[0.3, -0.2], &[0.4, 0.1]]),
            b: consts(&[&[0.4, 0.0], &[-0.3, 0.3]]),
            tau: consts(&[&[0.5, 0.0], &[0.5, 0.25]]),
            inputs: vec![
                sig(0.0, &[(1.0, 1.0, 0.0), (1.0, SQRT_2, 0.0)]),
                sig(0.0, &[(0.5, SQRT_2, FRAC_PI_2)]),
            ],
            g: vec![ActivationSpec::tanh(), ActivationSpec::tanh()],
            f: vec![ActivationSpec::tanh(), ActivationSpec::tanh()],
            history: HistoryFunction::constant(vec![0.0, 0.0]),
        },
        vec![
            vec![
                KernelShape {
                    p: 3.0,
                    q: 0,
                    lambda: 3.0
                };
                2
            ],
            vec![
                KernelShape {
                    p: 3.0,
                    q: 0,
                    lambda: 3.0
                };
                2
            ],
        ],
    )
    .expect("valid preset")
}

/// `u' = −u(t−1)` with history ≡ 1; `d = 0`, so it only runs unchecked.
pub fn pure_delay() -> Result<NetworkModel, ModelError> {
    NetworkModel::from_discrete_delays(
        "pure-delay",
        Coefficients {
            d: vec![c(0.0)],
            a: consts(&[&[0.0]]),
            b: consts(&[&[-1.0]]),
            tau: consts(&[&[1.0]]),
            inputs: vec![c(0.0)],
            g: vec![ActivationSpec::identity()],
            f: vec![ActivationSpec::identity()],
            history: HistoryFunction::constant(vec![1.0]),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{certify_at_beta, maximize_beta, DEFAULT_BETA_TOL};
    use crate::model::{derive_bounds, validate_assumptions, ValidationGrid};

    #[test]
    fn network_presets_are_certified() {
        for m in [
            scalar_atom(0.0),
            scalar_distributed(),
            constant_network(),
            periodic_network(),
            quasi_periodic_network(),
        ] {
            assert!(
                validate_assumptions(&m, &ValidationGrid::default()).all_passed(),
                "{}",
                m.name
            );
            let b = derive_bounds(&m).unwrap();
            assert!(certify_at_beta(&b, 0.0).unwrap().is_feasible(), "{}", m.name);
            let cert = maximize_beta(&b, DEFAULT_BETA_TOL).unwrap();
            assert!(cert.beta > 0.3, "{} {}", m.name, cert.beta);
        }
        assert!(constant_network().is_autonomous());
        assert!(!periodic_network().is_autonomous());
    }

    #[test]
    fn presets_round_trip_through_json() {
        let m = quasi_periodic_network();
        let text = serde_json::to_string(&m).unwrap();
        let back: NetworkModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
