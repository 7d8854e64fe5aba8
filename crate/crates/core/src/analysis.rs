//! Diagnostics on simulated trajectories: the ξ-weighted max norm, pairwise
//! distances and their exponential decay rate, the running-max boundedness
//! check, and almost-period shift defects.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{format_sig17, IntegrateError, Trajectory};
use crate::model::NetworkModel;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("weights must be positive and match the state dimension")]
    InvalidWeights,
    #[error("trajectories are on different time grids")]
    GridMismatch,
    #[error("only {usable} usable points in the fit window (need 5)")]
    InsufficientData { usable: usize },
    #[error("window [{start}, {end}] is outside the recorded range")]
    OutOfRange { start: f64, end: f64 },
    #[error("model has time-varying coefficients")]
    NotAutonomous,
    #[error("equilibrium solve did not converge (residual {residual})")]
    NoEquilibrium { residual: f64 },
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// `‖x‖_{ξ,∞} = max_i |x_i| / ξ_i`
pub fn weighted_norm(x: &[f64], xi: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != xi.len() || xi.iter().any(|w| !(*w > 0.0)) {
        return Err(AnalysisError::InvalidWeights);
    }
    Ok(x.iter().zip(xi).map(|(v, w)| (v / w).abs()).fold(0.0, f64::max))
}

fn same_grid(a: &Trajectory, b: &Trajectory) -> bool {
    a.n == b.n
        && a.len() == b.len()
        && a.times
            .iter()
            .zip(&b.times)
            .all(|(s, t)| (s - t).abs() <= 1e-9 * a.spacing.max(1e-300))
}

/// `(t, ‖a(t) − b(t)‖_{ξ,∞})` on the shared grid.
pub fn trajectory_distance(a: &Trajectory, b: &Trajectory, xi: &[f64]) -> Result<Vec<(f64, f64)>, AnalysisError> {
    if !same_grid(a, b) {
        return Err(AnalysisError::GridMismatch);
    }
    a.times
        .iter()
        .zip(a.states.iter().zip(&b.states))
        .map(|(&t, (ua, ub))| {
            let diff: Vec<f64> = ua.iter().zip(ub).map(|(x, y)| x - y).collect();
            Ok((t, weighted_norm(&diff, xi)?))
        })
        .collect()
}

/// CSV with header `t,distance`, 17 significant digits.
pub fn write_distance_csv<W: Write>(series: &[(f64, f64)], writer: W) -> Result<(), AnalysisError> {
    let io = |e: csv::Error| AnalysisError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "distance"]).map_err(io)?;
    for &(t, d) in series {
        w.write_record([format_sig17(t), format_sig17(d)]).map_err(io)?;
    }
    w.flush().map_err(|e| AnalysisError::Io(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// Fitted exponent: the series behaves like `e^{intercept − rate·t}`.
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    /// Smallest series value inside the window.
    pub series_floor: f64,
    pub used: usize,
    /// Window points at or below the noise floor.
    pub excluded: usize,
}

pub const DEFAULT_NOISE_FLOOR: f64 = 1e-10;

/// Least-squares line through `(t, ln value)` over the window, skipping
/// points at or below `floor`.
pub fn fit_exponential_rate(
    series: &[(f64, f64)],
    window: (f64, f64),
    floor: f64,
) -> Result<DecayReport, AnalysisError> {
    let (start, end) = window;
    let first = series.first().map_or(f64::NAN, |p| p.0);
    let last = series.last().map_or(f64::NAN, |p| p.0);
    if !(start <= end && start >= first - 1e-9 && end <= last + 1e-9) {
        return Err(AnalysisError::OutOfRange { start, end });
    }
    let in_window: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= start - 1e-12 && *t <= end + 1e-12)
        .collect();
    let series_floor = in_window.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let points: Vec<(f64, f64)> = in_window
        .iter()
        .filter(|(_, v)| *v > floor)
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    let excluded = in_window.len() - points.len();
    if points.len() < 5 {
        return Err(AnalysisError::InsufficientData { usable: points.len() });
    }
    let m = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in &points {
        let (dt, dy) = (t - mean_t, y - mean_y);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let ss_res: f64 = points
        .iter()
        .map(|&(t, y)| {
            let r = y - (intercept + slope * t);
            r * r
        })
        .sum();
    let r_squared = if syy <= f64::EPSILON * m * mean_y.abs().max(1.0) {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(DecayReport {
        rate: -slope,
        intercept,
        r_squared,
        window,
        series_floor,
        used: points.len(),
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub passed: bool,
    /// `max{M(0), 2Î/η}`
    pub bound: f64,
    pub m0: f64,
    pub tolerance: f64,
    /// `min_t (bound + tolerance − M(t))`; negative when violated.
    pub worst_margin: f64,
    /// `(t, M(t))` at every recorded time.
    pub running_max: Vec<(f64, f64)>,
}

/// Checks `M(t) = max_{s≤t} ‖u(s)‖_{ξ,∞} ≤ max{M(0), 2Î/η} + tolerance`,
/// sampling the recorded grid and the interval midpoints. `initial_sup` is the
/// sup of the history norm; the first recorded state is used when absent.
pub fn boundedness_check(
    traj: &Trajectory,
    xi: &[f64],
    i_hat: f64,
    eta: f64,
    initial_sup: Option<f64>,
    tolerance: f64,
) -> Result<BoundednessReport, AnalysisError> {
    if traj.is_empty() {
        return Err(AnalysisError::OutOfRange { start: 0.0, end: 0.0 });
    }
    let norm0 = weighted_norm(&traj.states[0], xi)?;
    let m0 = initial_sup.unwrap_or(norm0).max(norm0);
    let bound = m0.max(2.0 * i_hat / eta);
    let mut running = m0;
    let mut worst_margin = f64::INFINITY;
    let mut running_max = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        running = running.max(weighted_norm(&traj.states[k], xi)?);
        if k + 1 < traj.len() {
            let mid = traj.interpolate(0.5 * (traj.times[k] + traj.times[k + 1]))?;
            running = running.max(weighted_norm(&mid, xi)?);
        }
        worst_margin = worst_margin.min(bound + tolerance - running);
        running_max.push((traj.times[k], running));
    }
    Ok(BoundednessReport {
        passed: worst_margin >= 0.0,
        bound,
        m0,
        tolerance,
        worst_margin,
        running_max,
    })
}

fn shift_defect_at(traj: &Trajectory, t: f64, omega: f64, xi: &[f64]) -> Result<f64, AnalysisError> {
    let a = traj.interpolate(t + omega)?;
    let b = traj.interpolate(t)?;
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    weighted_norm(&diff, xi)
}

/// `sup_{t ∈ window} ‖u(t+ω) − u(t)‖_{ξ,∞}` over the recorded grid points in
/// the window and their midpoints.
pub fn almost_period_defect(
    traj: &Trajectory,
    omega: f64,
    window: (f64, f64),
    xi: &[f64],
) -> Result<f64, AnalysisError> {
    let (start, end) = window;
    let slack = 1e-9 * traj.spacing;
    if traj.is_empty() || !(start <= end) || start < traj.start() - slack || end + omega > traj.end() + slack {
        return Err(AnalysisError::OutOfRange {
            start,
            end: end + omega,
        });
    }
    let h = traj.spacing;
    let first = ((start - traj.start()) / h).ceil() as usize;
    let mut worst = shift_defect_at(traj, start, omega, xi)?;
    let mut k = first;
    while k < traj.len() && traj.times[k] <= end {
        let t = traj.times[k];
        worst = worst.max(shift_defect_at(traj, t, omega, xi)?);
        if t + 0.5 * h <= end {
            worst = worst.max(shift_defect_at(traj, t + 0.5 * h, omega, xi)?);
        }
        k += 1;
    }
    Ok(worst)
}

/// Earliest recorded time after which the pointwise shift defect stays at or
/// below `epsilon` for the rest of the available range.
pub fn defect_settling_time(
    traj: &Trajectory,
    omega: f64,
    epsilon: f64,
    xi: &[f64],
) -> Result<Option<f64>, AnalysisError> {
    let mut settled = None;
    for (k, &t) in traj.times.iter().enumerate() {
        if t + omega > traj.end() + 1e-9 * traj.spacing {
            break;
        }
        let d = shift_defect_at(traj, t, omega, xi)?;
        if d > epsilon {
            settled = None;
        } else if settled.is_none() {
            settled = Some(traj.times[k]);
        }
    }
    Ok(settled)
}

/// Transient discarded before almost-period checks: `max(10/β, 5·max τ*)`.
pub fn transient_length(beta: f64, max_delay: f64) -> f64 {
    (10.0 / beta).max(5.0 * max_delay)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub state: Vec<f64>,
    /// Max-norm of the algebraic right-hand side at `state`.
    pub residual: f64,
    pub iterations: usize,
}

/// Algebraic right-hand side of an autonomous model at a constant state:
/// every kernel acts through its total signed mass.
pub fn stationary_rhs(model: &NetworkModel, u: &[f64]) -> Vec<f64> {
    let acts = &model.activations;
    (0..model.n)
        .map(|i| {
            let mut acc = -model.d[i].offset * u[i] + model.inputs[i].offset;
            for j in 0..model.n {
                acc += model.a[i][j].offset * acts.g[j].eval(u[j]);
                let k = &model.kernels[i][j];
                let mass: f64 = k.atoms.iter().map(|a| a.weight.offset).sum::<f64>()
                    + k.densities
                        .iter()
                        .map(|d| {
                            d.coefficient.offset * d.p * (1..=d.q).map(f64::from).product::<f64>()
                                / d.lambda.powi(d.q as i32 + 1)
                        })
                        .sum::<f64>();
                acc += mass * acts.f[j].eval(u[j]);
            }
            acc
        })
        .collect()
}

/// Damped Newton on [`stationary_rhs`] with a finite-difference Jacobian.
pub fn equilibrium(model: &NetworkModel, start: &[f64]) -> Result<Equilibrium, AnalysisError> {
    if !model.is_autonomous() {
        return Err(AnalysisError::NotAutonomous);
    }
    let n = model.n;
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut u = start.to_vec();
    let mut r = stationary_rhs(model, &u);
    for it in 0..100 {
        if norm(&r) <= 1e-14 {
            return Ok(Equilibrium {
                residual: norm(&r),
                state: u,
                iterations: it,
            });
        }
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * u[j].abs().max(1.0);
            let mut up = u.clone();
            up[j] += h;
            let rp = stationary_rhs(model, &up);
            for i in 0..n {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let Some(step) = jac.lu().solve(&DVector::from_column_slice(&r)) else {
            break;
        };
        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x - damping * s).collect();
            let rt = stationary_rhs(model, &trial);
            if norm(&rt) < norm(&r) || damping < 1e-6 {
                u = trial;
                r = rt;
                break;
            }
            damping *= 0.5;
        }
    }
    let residual = norm(&r);
    if residual <= 1e-10 {
        Ok(Equilibrium {
            state: u,
            residual,
            iterations: 100,
        })
    } else {
        Err(AnalysisError::NoEquilibrium { residual })
    }
}
