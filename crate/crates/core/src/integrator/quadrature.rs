use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::model::{ActivationSpec, DelayKernel, QuasiPeriodicSignal};

struct DensityRule {
    coefficient: QuasiPeriodicSignal,
    /// Lags `s_k` of all panel nodes on `[0, s_max]`.
    lags: Vec<f64>,
    /// Panel weights already multiplied by `p·s^q·e^{−λs}`.
    weights: Vec<f64>,
}

/// A delay kernel discretized for repeated convolution: atoms are kept exact,
/// densities become composite Gauss–Legendre rules on `[0, s_max]`.
pub struct KernelQuadrature {
    atoms: Vec<(f64, QuasiPeriodicSignal)>,
    densities: Vec<DensityRule>,
    s_max: f64,
}

impl KernelQuadrature {
    /// `panel_width` is the target panel length; the cutoff is rounded up to a
    /// whole number of panels.
    pub fn new(kernel: &DelayKernel, tail_tolerance: f64, nodes_per_panel: usize, panel_width: f64) -> Self {
        let atoms = kernel.atoms.iter().map(|a| (a.lag, a.weight.clone())).collect();
        let cutoff = kernel.cutoff_for(tail_tolerance);
        if kernel.densities.is_empty() || cutoff == 0.0 {
            return Self {
                atoms,
                densities: Vec::new(),
                s_max: 0.0,
            };
        }
        let panels = (cutoff / panel_width).ceil().max(1.0) as usize;
        let s_max = panels as f64 * panel_width;
        let rule = GaussLegendre::new(NonZeroUsize::new(nodes_per_panel.max(1)).unwrap());
        let pairs = rule.as_node_weight_pairs();

        let densities = kernel
            .densities
            .iter()
            .map(|d| {
                let mut lags = Vec::with_capacity(panels * pairs.len());
                let mut weights = Vec::with_capacity(panels * pairs.len());
                for k in 0..panels {
                    let a = k as f64 * panel_width;
                    let half = 0.5 * panel_width;
                    for &(x, w) in pairs {
                        let s = a + half * (x + 1.0);
                        lags.push(s);
                        weights.push(half * w * d.profile(s));
                    }
                }
                DensityRule {
                    coefficient: d.coefficient.clone(),
                    lags,
                    weights,
                }
            })
            .collect();
        Self {
            atoms,
            densities,
            s_max,
        }
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.densities.is_empty()
    }

    /// `∫₀^∞ f(u(t − τ − s)) dK(t, s)` with the density part truncated at
    /// `s_max`; `lookup` returns the delayed state at an absolute time.
    pub fn convolve(&self, t: f64, tau_t: f64, f: &ActivationSpec, lookup: impl Fn(f64) -> f64) -> f64 {
        let base = t - tau_t;
        let mut acc = 0.0;
        for (lag, weight) in &self.atoms {
            let w = weight.value(t);
            if w != 0.0 {
                acc += w * f.eval(lookup(base - lag));
            }
        }
        for rule in &self.densities {
            let c = rule.coefficient.value(t);
            if c == 0.0 {
                continue;
            }
            let integral: f64 = rule
                .lags
                .iter()
                .zip(&rule.weights)
                .map(|(s, w)| w * f.eval(lookup(base - s)))
                .sum();
            acc += c * integral;
        }
        acc
    }
}

/// Free-function form of [`KernelQuadrature::convolve`].
pub fn kernel_convolve(
    rule: &KernelQuadrature,
    t: f64,
    tau_t: f64,
    f: &ActivationSpec,
    lookup: impl Fn(f64) -> f64,
) -> f64 {
    rule.convolve(t, tau_t, f, lookup)
}
