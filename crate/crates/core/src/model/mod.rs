//! The delayed network
//!
//! ```text
//! du_i/dt = −d_i(t)u_i(t) + Σ_j a_ij(t) g_j(u_j(t))
//!           + Σ_j ∫₀^∞ f_j(u_j(t − τ_ij(t) − s)) dK_ij(t, s) + I_i(t)
//! ```
//!
//! with initial history `u(s) = φ(s)` for `s ≤ 0`, together with the scalar
//! bounds the certificate search works from.

mod activation;
mod kernel;
mod signal;

pub use activation::{ActivationKind, ActivationReport, ActivationSpec, ValidationGrid};
pub use kernel::{Atom, DelayKernel, Density, KernelShape};
pub use signal::{find_almost_period, signal_shift_defect, AlmostPeriodScan, QuasiPeriodicSignal, Term};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::HistoryFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid activation: {0}")]
    InvalidActivation(String),
    #[error("invalid history: {0}")]
    InvalidHistory(String),
    #[error("invalid almost-period scan: {0}")]
    InvalidScan(String),
    #[error("validation grid needs at least 2 points, got {0}")]
    DegenerateGrid(usize),
    #[error("{field}: expected dimension {expected}, found {found}")]
    Dimension {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("kernel moment diverges: beta {beta} >= decay {decay}")]
    DivergentMoment { beta: f64, decay: f64 },
    #[error("self-inhibition d_{index}(t) has lower bound {lower} <= 0")]
    NonPositiveInhibition { index: usize, lower: f64 },
    #[error("delay tau_{i}{j}(t) has lower bound {lower} < 0", i = .index.0, j = .index.1)]
    NegativeDelay { index: (usize, usize), lower: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activations {
    pub g: Vec<ActivationSpec>,
    pub f: Vec<ActivationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    #[serde(default = "default_name")]
    pub name: String,
    pub n: usize,
    pub d: Vec<QuasiPeriodicSignal>,
    pub a: Vec<Vec<QuasiPeriodicSignal>>,
    pub kernels: Vec<Vec<DelayKernel>>,
    pub tau: Vec<Vec<QuasiPeriodicSignal>>,
    pub inputs: Vec<QuasiPeriodicSignal>,
    pub activations: Activations,
    pub history: HistoryFunction,
}

fn default_name() -> String {
    "model".to_string()
}

fn check_len<T>(field: &'static str, v: &[T], n: usize) -> Result<(), ModelError> {
    if v.len() == n {
        Ok(())
    } else {
        Err(ModelError::Dimension {
            field,
            expected: n,
            found: v.len(),
        })
    }
}

fn check_square<T>(field: &'static str, m: &[Vec<T>], n: usize) -> Result<(), ModelError> {
    check_len(field, m, n)?;
    m.iter().try_for_each(|row| check_len(field, row, n))
}

/// Coefficients shared by the discrete- and distributed-delay constructors.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub d: Vec<QuasiPeriodicSignal>,
    pub a: Vec<Vec<QuasiPeriodicSignal>>,
    pub b: Vec<Vec<QuasiPeriodicSignal>>,
    pub tau: Vec<Vec<QuasiPeriodicSignal>>,
    pub inputs: Vec<QuasiPeriodicSignal>,
    pub g: Vec<ActivationSpec>,
    pub f: Vec<ActivationSpec>,
    pub history: HistoryFunction,
}

impl NetworkModel {
    /// Checks dimensions and parameter well-formedness. Sign conditions on
    /// `d` and `τ` are reported by [`validate_assumptions`] instead, so that a
    /// violating model can still be inspected.
    pub fn check(&self) -> Result<(), ModelError> {
        let n = self.n;
        if n == 0 {
            return Err(ModelError::Dimension {
                field: "n",
                expected: 1,
                found: 0,
            });
        }
        check_len("d", &self.d, n)?;
        check_square("a", &self.a, n)?;
        check_square("kernels", &self.kernels, n)?;
        check_square("tau", &self.tau, n)?;
        check_len("inputs", &self.inputs, n)?;
        check_len("activations.g", &self.activations.g, n)?;
        check_len("activations.f", &self.activations.f, n)?;
        self.history.check(n)?;
        let signals = self
            .d
            .iter()
            .chain(self.a.iter().flatten())
            .chain(self.tau.iter().flatten())
            .chain(&self.inputs);
        for s in signals {
            s.check()?;
        }
        self.kernels.iter().flatten().try_for_each(DelayKernel::check)?;
        self.activations
            .g
            .iter()
            .chain(&self.activations.f)
            .try_for_each(ActivationSpec::check)
    }

    /// Discrete delays: `dK_ij(t, ·) = b_ij(t)·δ₀`, so the kernel term is
    /// `b_ij(t) f_j(u_j(t − τ_ij(t)))`.
    pub fn from_discrete_delays(name: &str, c: Coefficients) -> Result<Self, ModelError> {
        let n = c.d.len();
        check_square("b", &c.b, n)?;
        let kernels =
            c.b.into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|b| {
                            if b.is_zero() {
                                Ok(DelayKernel::zero())
                            } else {
                                DelayKernel::atom(0.0, b)
                            }
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
        Self::assemble(name, n, c.d, c.a, kernels, c.tau, c.inputs, c.g, c.f, c.history)
    }

    /// Distributed delays: `dK_ij(t, s) = b_ij(t) k_ij(s) ds` with
    /// `k_ij(s) = p·s^q·e^{−λs}`.
    pub fn from_distributed_delays(
        name: &str,
        c: Coefficients,
        shapes: Vec<Vec<KernelShape>>,
    ) -> Result<Self, ModelError> {
        let n = c.d.len();
        check_square("b", &c.b, n)?;
        check_square("k_params", &shapes, n)?;
        let kernels =
            c.b.into_iter()
                .zip(shapes)
                .map(|(row, shapes)| {
                    row.into_iter()
                        .zip(shapes)
                        .map(|(b, shape)| {
                            let k = DelayKernel::density(b, shape)?;
                            Ok(if k.is_zero() { DelayKernel::zero() } else { k })
                        })
                        .collect::<Result<Vec<_>, ModelError>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
        Self::assemble(name, n, c.d, c.a, kernels, c.tau, c.inputs, c.g, c.f, c.history)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        name: &str,
        n: usize,
        d: Vec<QuasiPeriodicSignal>,
        a: Vec<Vec<QuasiPeriodicSignal>>,
        kernels: Vec<Vec<DelayKernel>>,
        tau: Vec<Vec<QuasiPeriodicSignal>>,
        inputs: Vec<QuasiPeriodicSignal>,
        g: Vec<ActivationSpec>,
        f: Vec<ActivationSpec>,
        history: HistoryFunction,
    ) -> Result<Self, ModelError> {
        let model = Self {
            name: name.to_string(),
            n,
            d,
            a,
            kernels,
            tau,
            inputs,
            activations: Activations { g, f },
            history,
        };
        model.check()?;
        Ok(model)
    }

    pub fn with_history(mut self, history: HistoryFunction) -> Result<Self, ModelError> {
        history.check(self.n)?;
        self.history = history;
        Ok(self)
    }

    /// Every time-varying coefficient signal of the model.
    pub fn coefficient_signals(&self) -> Vec<QuasiPeriodicSignal> {
        let mut out: Vec<QuasiPeriodicSignal> = self
            .d
            .iter()
            .chain(self.a.iter().flatten())
            .chain(self.tau.iter().flatten())
            .chain(&self.inputs)
            .cloned()
            .collect();
        for k in self.kernels.iter().flatten() {
            out.extend(k.atoms.iter().map(|a| a.weight.clone()));
            out.extend(k.densities.iter().map(|d| d.coefficient.clone()));
        }
        out
    }

    /// True when no coefficient depends on time.
    pub fn is_autonomous(&self) -> bool {
        self.coefficient_signals().iter().all(QuasiPeriodicSignal::is_constant)
    }

    /// `max_ij (τ*_ij + largest atom lag of K_ij)`.
    pub fn max_discrete_delay(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max(self.tau[i][j].upper_bound().max(0.0) + self.kernels[i][j].max_atom_lag());
            }
        }
        m
    }
}

/// Scalar bounds derived from a [`NetworkModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSummary {
    pub n: usize,
    /// `d_i`, lower bound of `d_i(t)`.
    pub d_inf: Vec<f64>,
    /// `|a*_ij|`
    pub a_sup: Vec<Vec<f64>>,
    /// `τ*_ij`
    pub tau_sup: Vec<Vec<f64>>,
    /// `G_j`
    pub g_lip: Vec<f64>,
    /// `F_j`
    pub f_lip: Vec<f64>,
    pub kernels: Vec<Vec<DelayKernel>>,
    /// `|b*_ij| = κ_ij(0)`
    pub b_sup: Vec<Vec<f64>>,
    /// `|I*_i|`
    pub i_sup: Vec<f64>,
    pub g_zero: Vec<f64>,
    pub f_zero: Vec<f64>,
    /// `Î = max_i { |I*_i| + Σ_j [ |a*_ij||g_j(0)| + |b*_ij||f_j(0)| ] }`
    pub i_hat: f64,
}

impl BoundsSummary {
    /// Builds a summary from raw bounds; `b_sup` and `i_hat` are derived.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        d_inf: Vec<f64>,
        a_sup: Vec<Vec<f64>>,
        tau_sup: Vec<Vec<f64>>,
        g_lip: Vec<f64>,
        f_lip: Vec<f64>,
        kernels: Vec<Vec<DelayKernel>>,
        i_sup: Vec<f64>,
        g_zero: Vec<f64>,
        f_zero: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let n = d_inf.len();
        check_square("a_sup", &a_sup, n)?;
        check_square("tau_sup", &tau_sup, n)?;
        check_square("kernels", &kernels, n)?;
        for (field, v) in [
            ("g_lip", &g_lip),
            ("f_lip", &f_lip),
            ("i_sup", &i_sup),
            ("g_zero", &g_zero),
            ("f_zero", &f_zero),
        ] {
            check_len(field, v, n)?;
        }
        if let Some((index, &lower)) = d_inf.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
            return Err(ModelError::NonPositiveInhibition { index, lower });
        }
        let b_sup: Vec<Vec<f64>> = kernels
            .iter()
            .map(|row| row.iter().map(|k| k.moment(0.0)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        let i_hat = (0..n)
            .map(|i| {
                i_sup[i].abs()
                    + (0..n)
                        .map(|j| a_sup[i][j] * g_zero[j].abs() + b_sup[i][j] * f_zero[j].abs())
                        .sum::<f64>()
            })
            .fold(0.0, f64::max);
        Ok(Self {
            n,
            d_inf,
            a_sup,
            tau_sup,
            g_lip,
            f_lip,
            kernels,
            b_sup,
            i_sup,
            g_zero,
            f_zero,
            i_hat,
        })
    }

    /// `κ_ij(β) = ∫₀^∞ e^{βs}|dK_ij(s)|`
    pub fn kappa(&self, i: usize, j: usize, beta: f64) -> Result<f64, ModelError> {
        self.kernels[i][j].moment(beta)
    }

    pub fn min_d(&self) -> f64 {
        self.d_inf.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_decay(&self) -> f64 {
        self.kernels
            .iter()
            .flatten()
            .map(DelayKernel::min_decay)
            .fold(f64::INFINITY, f64::min)
    }

    /// Exclusive upper end of the admissible β range.
    pub fn beta_cap(&self) -> f64 {
        self.min_d().min(self.min_decay())
    }
}

/// Sup/inf bounds of every coefficient together with `Î`.
pub fn derive_bounds(model: &NetworkModel) -> Result<BoundsSummary, ModelError> {
    model.check()?;
    let n = model.n;
    let d_inf: Vec<f64> = model.d.iter().map(QuasiPeriodicSignal::lower_bound).collect();
    if let Some((index, &lower)) = d_inf.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
        return Err(ModelError::NonPositiveInhibition { index, lower });
    }
    for i in 0..n {
        for j in 0..n {
            let lower = model.tau[i][j].lower_bound();
            if lower < 0.0 {
                return Err(ModelError::NegativeDelay { index: (i, j), lower });
            }
        }
    }
    let sup_matrix = |m: &[Vec<QuasiPeriodicSignal>]| -> Vec<Vec<f64>> {
        m.iter()
            .map(|row| row.iter().map(QuasiPeriodicSignal::sup_abs).collect())
            .collect()
    };
    let acts = &model.activations;
    BoundsSummary::from_parts(
        d_inf,
        sup_matrix(&model.a),
        model
            .tau
            .iter()
            .map(|row| row.iter().map(QuasiPeriodicSignal::upper_bound).collect())
            .collect(),
        acts.g.iter().map(|s| s.lipschitz_bound).collect(),
        acts.f.iter().map(|s| s.lipschitz_bound).collect(),
        model.kernels.clone(),
        model.inputs.iter().map(QuasiPeriodicSignal::sup_abs).collect(),
        acts.g.iter().map(ActivationSpec::at_zero).collect(),
        acts.f.iter().map(ActivationSpec::at_zero).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub item: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub items: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|c| c.passed)
    }

    pub fn item(&self, item: u8) -> Option<&AssumptionCheck> {
        self.items.iter().find(|c| c.item == item)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.items.iter().filter(|c| !c.passed)
    }
}

/// Checks the five standing assumptions on a model. Item 2 is split into the
/// inhibition and delay-sign parts.
pub fn validate_assumptions(model: &NetworkModel, grid: &ValidationGrid) -> AssumptionReport {
    let mut items = Vec::new();
    let mut push = |item: u8, name: &str, passed: bool, detail: String| {
        items.push(AssumptionCheck {
            item,
            name: name.to_string(),
            passed,
            detail,
        })
    };

    if let Err(e) = model.check() {
        push(0, "well-formed model", false, e.to_string());
        return AssumptionReport { items };
    }

    // item 1: g ∈ H{G}, f ∈ H1{F}
    let mut failures = Vec::new();
    for (label, specs, monotone) in [("g", &model.activations.g, true), ("f", &model.activations.f, false)] {
        for (j, spec) in specs.iter().enumerate() {
            let mut spec = spec.clone();
            spec.requires_monotone |= monotone;
            match spec.validate(grid) {
                Ok(r) if r.passed => {}
                Ok(r) => failures.push(format!(
                    "{label}_{j}: quotient {:.6} vs bound {} at {:?}, monotone={}",
                    r.worst_quotient, spec.lipschitz_bound, r.worst_pair, r.monotone_ok
                )),
                Err(e) => failures.push(format!("{label}_{j}: {e}")),
            }
        }
    }
    push(1, "activation classes", failures.is_empty(), failures.join("; "));

    let bad_d: Vec<String> = model
        .d
        .iter()
        .enumerate()
        .filter(|(_, s)| !(s.lower_bound() > 0.0))
        .map(|(i, s)| format!("d_{i} lower bound {}", s.lower_bound()))
        .collect();
    push(2, "positive self-inhibition", bad_d.is_empty(), bad_d.join("; "));

    let mut bad_tau = Vec::new();
    for (i, row) in model.tau.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            if s.lower_bound() < 0.0 {
                bad_tau.push(format!("tau_{i}{j} lower bound {}", s.lower_bound()));
            }
        }
    }
    push(2, "nonnegative delays", bad_tau.is_empty(), bad_tau.join("; "));

    push(
        3,
        "kernel continuity in t",
        true,
        "holds by construction: kernel weights are finite trigonometric sums".into(),
    );
    push(
        4,
        "common almost periods",
        true,
        "holds by construction: every coefficient is a finite trigonometric sum".into(),
    );

    let min_decay = model
        .kernels
        .iter()
        .flatten()
        .map(DelayKernel::min_decay)
        .fold(f64::INFINITY, f64::min);
    let probe = if min_decay.is_finite() {
        (0.5 * min_decay).min(1e-3)
    } else {
        1e-3
    };
    let bad_moment: Vec<String> = model
        .kernels
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, k)| (i, j, k)))
        .filter_map(|(i, j, k)| match k.moment(probe) {
            Ok(m) if m.is_finite() => None,
            Ok(m) => Some(format!("K_{i}{j}: moment {m}")),
            Err(e) => Some(format!("K_{i}{j}: {e}")),
        })
        .collect();
    let detail = if bad_moment.is_empty() {
        format!("exponential moments finite at probe beta {probe:e}")
    } else {
        bad_moment.join("; ")
    };
    push(5, "exponential kernel moments", bad_moment.is_empty(), detail);

    AssumptionReport { items }
}
