//! Fixed-step RK4 for the delayed network with cubic Hermite dense output.
//!
//! Every accepted step stores `(u_k, f_k)` with `f_k = du/dt(t_k)`, so the
//! solution between nodes is the cubic Hermite interpolant. Delayed lookups
//! that fall inside the step being computed are served by extending the
//! previous step's cubic; a lookup at exactly the current time (zero total
//! delay) returns the current stage state.

mod history;
mod quadrature;
mod trajectory;

pub use history::{HistoryFunction, HistoryKind};
pub use quadrature::{kernel_convolve, KernelQuadrature};
pub use trajectory::{format_sig17, hermite, Trajectory};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_assumptions, ModelError, NetworkModel, ValidationGrid};

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("model violates standing assumptions: {0}")]
    Assumptions(String),
    #[error("state blew up at t = {time}")]
    BlowUp { time: f64, partial: Box<Trajectory> },
    #[error("lookup at t = {time} is beyond the integration frontier {frontier}")]
    BeyondFrontier { time: f64, frontier: f64 },
    #[error("trajectory I/O: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub step: f64,
    pub horizon: f64,
    /// Budget for the truncated density tail of each kernel, per unit of
    /// activation magnitude.
    pub tail_tolerance: f64,
    /// Gauss–Legendre nodes per quadrature panel.
    pub quadrature_nodes: usize,
    pub record_stride: usize,
    /// Target quadrature panel length, rounded to a whole number of steps.
    #[serde(default = "default_panel_width")]
    pub panel_width: f64,
}

fn default_panel_width() -> f64 {
    0.25
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: 1e-2,
            horizon: 20.0,
            tail_tolerance: 1e-12,
            quadrature_nodes: 8,
            record_stride: 1,
            panel_width: default_panel_width(),
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<(), IntegrateError> {
        let bad = |msg: &str| Err(IntegrateError::InvalidConfig(msg.to_string()));
        if !(self.step.is_finite() && self.step > 0.0) {
            return bad("step must be positive");
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad("horizon must be positive");
        }
        if !(self.tail_tolerance > 0.0) {
            return bad("tail_tolerance must be positive");
        }
        if self.quadrature_nodes < 8 {
            return bad("quadrature_nodes must be at least 8");
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1");
        }
        if !(self.panel_width > 0.0) {
            return bad("panel_width must be positive");
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.step - 1e-9).ceil().max(1.0) as usize
    }

    fn effective_panel_width(&self) -> f64 {
        self.step * (self.panel_width / self.step).round().max(1.0)
    }
}

/// What the integrator chose while setting up a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimInfo {
    pub step: f64,
    pub horizon: f64,
    pub steps: usize,
    /// Largest density cutoff over all kernels.
    pub s_max: f64,
    /// Largest truncation bound achieved, per unit activation magnitude.
    pub tail_bound: f64,
    /// Oldest history time that can influence the run.
    pub history_horizon: f64,
}

/// Solution buffer at full step resolution.
struct Dense {
    n: usize,
    h: f64,
    states: Vec<f64>,
    derivs: Vec<f64>,
}

impl Dense {
    fn nodes(&self) -> usize {
        self.states.len() / self.n
    }

    /// Index of the last node whose derivative is known.
    fn complete(&self) -> Option<usize> {
        (self.derivs.len() / self.n).checked_sub(1)
    }

    fn state(&self, k: usize, j: usize) -> f64 {
        self.states[k * self.n + j]
    }

    fn deriv(&self, k: usize, j: usize) -> f64 {
        self.derivs[k * self.n + j]
    }

    fn cubic(&self, k: usize, j: usize, t: f64) -> f64 {
        let theta = (t - k as f64 * self.h) / self.h;
        hermite(
            theta,
            self.h,
            self.state(k, j),
            self.deriv(k, j),
            self.state(k + 1, j),
            self.deriv(k + 1, j),
        )
    }

    /// `u_j(t)` for `0 < t`; past the last complete node the previous
    /// interval's cubic is extended.
    fn value(&self, j: usize, t: f64) -> f64 {
        let Some(c) = self.complete() else {
            return self.state(0, j);
        };
        if c == 0 {
            return self.state(0, j) + t * self.deriv(0, j);
        }
        let k = ((t / self.h).floor().max(0.0) as usize).min(c - 1);
        self.cubic(k, j, t)
    }
}

struct Compiled<'m> {
    model: &'m NetworkModel,
    rules: Vec<Vec<KernelQuadrature>>,
}

impl Compiled<'_> {
    /// Right-hand side at `(t, u)`; `lookup(j, s)` returns `u_j(s)` for `s ≤ t`.
    fn rhs(&self, t: f64, u: &[f64], lookup: &dyn Fn(usize, f64) -> f64, out: &mut [f64]) {
        let m = self.model;
        let acts = &m.activations;
        for i in 0..m.n {
            let mut acc = -m.d[i].value(t) * u[i] + m.inputs[i].value(t);
            for j in 0..m.n {
                let a = m.a[i][j].value(t);
                if a != 0.0 {
                    acc += a * acts.g[j].eval(u[j]);
                }
                let rule = &self.rules[i][j];
                if !rule.is_empty() {
                    let tau = m.tau[i][j].value(t).max(0.0);
                    acc += rule.convolve(t, tau, &acts.f[j], |s| lookup(j, s));
                }
            }
            out[i] = acc;
        }
    }
}

/// Right-hand side of the network at `(t, u)` with an arbitrary delayed-state
/// accessor `lookup(j, s) = u_j(s)`.
pub fn rhs(model: &NetworkModel, cfg: &SimConfig, t: f64, u: &[f64], lookup: &dyn Fn(usize, f64) -> f64) -> Vec<f64> {
    let compiled = compile(model, cfg);
    let mut out = vec![0.0; model.n];
    compiled.rhs(t, u, lookup, &mut out);
    out
}

fn compile<'m>(model: &'m NetworkModel, cfg: &SimConfig) -> Compiled<'m> {
    let width = cfg.effective_panel_width();
    let rules = model
        .kernels
        .iter()
        .map(|row| {
            row.iter()
                .map(|k| KernelQuadrature::new(k, cfg.tail_tolerance, cfg.quadrature_nodes, width))
                .collect()
        })
        .collect();
    Compiled { model, rules }
}

/// Magnitude beyond which a run is declared divergent.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// A prepared run: validated model, discretized kernels.
pub struct Integrator<'m> {
    compiled: Compiled<'m>,
    cfg: SimConfig,
    info: SimInfo,
}

impl<'m> Integrator<'m> {
    /// Validates the model against the standing assumptions first.
    pub fn new(model: &'m NetworkModel, cfg: SimConfig) -> Result<Self, IntegrateError> {
        let report = validate_assumptions(model, &ValidationGrid::default());
        if !report.all_passed() {
            let msg = report
                .failures()
                .map(|c| format!("item {} ({}): {}", c.item, c.name, c.detail))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(IntegrateError::Assumptions(msg));
        }
        Self::new_unchecked(model, cfg)
    }

    /// Skips the assumption check; the caller accepts responsibility for,
    /// e.g., zero self-inhibition in test problems.
    pub fn new_unchecked(model: &'m NetworkModel, cfg: SimConfig) -> Result<Self, IntegrateError> {
        model.check()?;
        cfg.check()?;
        let compiled = compile(model, &cfg);
        let s_max = compiled
            .rules
            .iter()
            .flatten()
            .map(KernelQuadrature::s_max)
            .fold(0.0, f64::max);
        let tail_bound = model
            .kernels
            .iter()
            .flatten()
            .zip(compiled.rules.iter().flatten())
            .map(|(k, r)| k.truncation_bound(r.s_max(), 1.0))
            .fold(0.0, f64::max);
        let info = SimInfo {
            step: cfg.step,
            horizon: cfg.steps() as f64 * cfg.step,
            steps: cfg.steps(),
            s_max,
            tail_bound,
            history_horizon: (model.max_discrete_delay() + s_max).max(model.history.window),
        };
        Ok(Self { compiled, cfg, info })
    }

    pub fn info(&self) -> SimInfo {
        self.info
    }

    pub fn run(&self) -> Result<Trajectory, IntegrateError> {
        let model = self.compiled.model;
        let n = model.n;
        let h = self.cfg.step;
        let steps = self.cfg.steps();
        let history = &model.history;
        let mut dense = Dense {
            n,
            h,
            states: Vec::with_capacity((steps + 1) * n),
            derivs: Vec::with_capacity((steps + 1) * n),
        };
        dense.states.extend(history.eval(0.0));

        let mut u = vec![0.0; n];
        let mut stage = vec![0.0; n];
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];

        // `now` and `current` describe the stage being evaluated
        let eval = |dense: &Dense, now: f64, current: &[f64], out: &mut [f64]| {
            let lookup = |j: usize, s: f64| -> f64 {
                if s >= now {
                    current[j]
                } else if s <= 0.0 {
                    history.eval_component(j, s)
                } else {
                    dense.value(j, s)
                }
            };
            self.compiled.rhs(now, current, &lookup, out);
        };

        for k in 0..=steps {
            let t = k as f64 * h;
            u.copy_from_slice(&dense.states[k * n..(k + 1) * n]);
            eval(&dense, t, &u, &mut k1);
            dense.derivs.extend_from_slice(&k1);
            if k == steps {
                break;
            }

            for i in 0..n {
                stage[i] = u[i] + 0.5 * h * k1[i];
            }
            eval(&dense, t + 0.5 * h, &stage, &mut k2);
            for i in 0..n {
                stage[i] = u[i] + 0.5 * h * k2[i];
            }
            eval(&dense, t + 0.5 * h, &stage, &mut k3);
            for i in 0..n {
                stage[i] = u[i] + h * k3[i];
            }
            eval(&dense, t + h, &stage, &mut k4);

            let mut diverged = false;
            for i in 0..n {
                let next = u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                diverged |= !(next.abs() <= BLOW_UP_THRESHOLD);
                dense.states.push(next);
            }
            if diverged {
                let time = (k + 1) as f64 * h;
                log::warn!("blow-up at t = {time}");
                // drop the diverged node; the partial run ends at t_k
                dense.states.truncate((k + 1) * n);
                return Err(IntegrateError::BlowUp {
                    time,
                    partial: Box::new(self.record(&dense)),
                });
            }
        }
        debug_assert_eq!(dense.nodes(), steps + 1);
        Ok(self.record(&dense))
    }

    fn record(&self, dense: &Dense) -> Trajectory {
        let n = dense.n;
        let stride = self.cfg.record_stride;
        let complete = dense.complete().map_or(0, |c| c + 1).min(dense.nodes());
        let mut traj = Trajectory::new(n, dense.h * stride as f64, self.compiled.model.name.clone());
        for k in (0..complete).step_by(stride) {
            traj.push(
                k as f64 * dense.h,
                dense.states[k * n..(k + 1) * n].to_vec(),
                dense.derivs[k * n..(k + 1) * n].to_vec(),
            );
        }
        traj
    }
}

/// Validates the model, then integrates it on `[0, horizon]`.
pub fn integrate(model: &NetworkModel, cfg: SimConfig) -> Result<Trajectory, IntegrateError> {
    Integrator::new(model, cfg)?.run()
}

/// Integrates without the standing-assumption check.
pub fn integrate_unchecked(model: &NetworkModel, cfg: SimConfig) -> Result<Trajectory, IntegrateError> {
    Integrator::new_unchecked(model, cfg)?.run()
}

/// `u(t)`: the history for `t ≤ 0`, Hermite interpolation on the recorded
/// range, and an error beyond it.
pub fn history_eval(traj: &Trajectory, hist: &HistoryFunction, t: f64) -> Result<Vec<f64>, IntegrateError> {
    if t <= 0.0 {
        return Ok(hist.eval(t));
    }
    traj.interpolate(t)
}
