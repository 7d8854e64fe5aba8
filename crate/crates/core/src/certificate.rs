//! Exponential-stability certificates.
//!
//! The criterion asks for weights `ξ > 0` and a rate `β ≥ 0` with
//!
//! ```text
//! −(d_i − β)ξ_i + Σ_j |a*_ij| G_j ξ_j + Σ_j F_j ξ_j e^{βτ*_ij} κ_ij(β) < 0   for every i,
//! ```
//!
//! where `κ_ij(β) = ∫₀^∞ e^{βs}|dK_ij(s)|`. Dividing row `i` by `d_i − β`
//! turns this into `B(β)ξ < ξ` for a nonnegative comparison matrix `B(β)`,
//! which has a positive solution exactly when the Perron root `ρ(B(β)) < 1`.
//! In that case `ξ = (I − B)⁻¹·1` is an explicit witness.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BoundsSummary, ModelError, NetworkModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertError {
    #[error("beta {beta} outside [0, {cap})")]
    BetaOutOfDomain { beta: f64, cap: f64 },
    #[error("matrix must be square, nonnegative and finite")]
    InvalidMatrix,
    #[error("power iteration did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("criterion infeasible at beta = 0 (spectral radius {spectral_radius})")]
    InfeasibleAtZero { spectral_radius: f64 },
    #[error("boundedness criterion fails: eta = {eta} <= 0")]
    CriterionFails { eta: f64 },
    #[error("weights must be positive and match the system dimension")]
    InvalidWeights,
    #[error("brute-force search supports n <= {max}, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `B(β)_ij = [G_j|a*_ij| + F_j e^{βτ*_ij} κ_ij(β)] / (d_i − β)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub beta: f64,
    pub entries: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertMethod {
    Spectral,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    /// Weights, normalized so that `max ξ_i = 1`.
    pub xi: Vec<f64>,
    pub beta: f64,
    /// Smallest row slack of the criterion at `(ξ, β)`.
    pub eta: f64,
    pub method: CertMethod,
    pub pointwise_checked: bool,
    pub spectral_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(StabilityCertificate),
    Infeasible { spectral_radius: f64 },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }

    pub fn certificate(self) -> Option<StabilityCertificate> {
        match self {
            Feasibility::Feasible(c) => Some(c),
            Feasibility::Infeasible { .. } => None,
        }
    }
}

fn check_beta(bounds: &BoundsSummary, beta: f64) -> Result<(), CertError> {
    let cap = bounds.beta_cap();
    if !(beta >= 0.0 && beta < cap) {
        return Err(CertError::BetaOutOfDomain { beta, cap });
    }
    Ok(())
}

/// Unscaled coupling `G_j|a*_ij| + F_j e^{βτ*_ij} κ_ij(β)`.
fn coupling(bounds: &BoundsSummary, beta: f64) -> Result<Vec<Vec<f64>>, CertError> {
    let n = bounds.n;
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let kappa = bounds.kappa(i, j, beta)?;
            let delayed = if kappa == 0.0 {
                0.0
            } else {
                bounds.f_lip[j] * (beta * bounds.tau_sup[i][j]).exp() * kappa
            };
            c[i][j] = bounds.g_lip[j] * bounds.a_sup[i][j] + delayed;
        }
    }
    Ok(c)
}

pub fn build_comparison_matrix(bounds: &BoundsSummary, beta: f64) -> Result<ComparisonMatrix, CertError> {
    check_beta(bounds, beta)?;
    let mut entries = coupling(bounds, beta)?;
    for (i, row) in entries.iter_mut().enumerate() {
        let scale = bounds.d_inf[i] - beta;
        row.iter_mut().for_each(|e| *e /= scale);
    }
    Ok(ComparisonMatrix { beta, entries })
}

/// Row slacks `(d_i − β)ξ_i − Σ_j coupling_ij ξ_j`; the criterion holds when
/// all are positive.
pub fn row_slacks(bounds: &BoundsSummary, xi: &[f64], beta: f64) -> Result<Vec<f64>, CertError> {
    check_beta(bounds, beta)?;
    let c = coupling(bounds, beta)?;
    Ok((0..bounds.n)
        .map(|i| (bounds.d_inf[i] - beta) * xi[i] - c[i].iter().zip(xi).map(|(c, x)| c * x).sum::<f64>())
        .collect())
}

/// Added to every entry when the matrix has zeros, so that the iteration
/// runs on a primitive matrix.
const REDUCIBLE_PERTURBATION: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 100_000;
const POWER_REL_TOL: f64 = 1e-12;

/// Perron root of a nonnegative square matrix.
///
/// Shifted power iteration from the all-ones vector; the Collatz–Wielandt
/// quotients `min_i (Bx)_i/x_i ≤ ρ ≤ max_i (Bx)_i/x_i` bracket the root and
/// serve as the stopping rule.
pub fn spectral_radius(m: &[Vec<f64>]) -> Result<f64, CertError> {
    let n = m.len();
    if m.iter()
        .any(|row| row.len() != n || row.iter().any(|v| !(v.is_finite() && *v >= 0.0)))
    {
        return Err(CertError::InvalidMatrix);
    }
    if n == 0 {
        return Ok(0.0);
    }
    let eps = if m.iter().flatten().any(|&v| v == 0.0) {
        REDUCIBLE_PERTURBATION
    } else {
        0.0
    };
    let b: Vec<Vec<f64>> = m.iter().map(|row| row.iter().map(|v| v + eps).collect()).collect();

    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    for _ in 0..POWER_MAX_ITERS {
        for i in 0..n {
            y[i] = b[i].iter().zip(&x).map(|(a, v)| a * v).sum();
        }
        let (lo, hi) = (0..n).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
            let r = y[i] / x[i];
            (lo.min(r), hi.max(r))
        });
        if hi == 0.0 {
            return Ok(0.0);
        }
        if hi - lo <= POWER_REL_TOL * hi {
            return Ok(0.5 * (lo + hi));
        }
        // shifting by the current upper bound keeps every other eigenvalue of
        // B + cI strictly inside the disc of radius ρ + c
        let top = (0..n).map(|i| y[i] + hi * x[i]).fold(0.0, f64::max);
        for i in 0..n {
            x[i] = (y[i] + hi * x[i]) / top;
        }
    }
    if n <= 3 {
        return Ok(characteristic_root(m));
    }
    Err(CertError::NoConvergence {
        iterations: POWER_MAX_ITERS,
    })
}

/// Largest real root of `det(λI − M)` for `n ≤ 3`.
fn characteristic_root(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        1 => m[0][0],
        2 => {
            let tr = m[0][0] + m[1][1];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt())
        }
        _ => {
            let tr = m[0][0] + m[1][1] + m[2][2];
            let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
                + m[1][1] * m[2][2]
                - m[1][2] * m[2][1];
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            let p = |l: f64| ((l - tr) * l + minors) * l - det;
            let upper = m.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
            let steps = 4096;
            let h = upper / steps as f64;
            let mut hi = upper;
            for k in (0..steps).rev() {
                let lo = k as f64 * h;
                if p(lo) <= 0.0 {
                    let (mut a, mut b) = (lo, hi);
                    for _ in 0..200 {
                        let mid = 0.5 * (a + b);
                        if p(mid) <= 0.0 {
                            a = mid;
                        } else {
                            b = mid;
                        }
                    }
                    return 0.5 * (a + b);
                }
                hi = lo;
            }
            0.0
        }
    }
}

/// Decides the criterion at a fixed `β` and returns a verified witness.
pub fn certify_at_beta(bounds: &BoundsSummary, beta: f64) -> Result<Feasibility, CertError> {
    let b = build_comparison_matrix(bounds, beta)?;
    let rho = spectral_radius(&b.entries)?;
    let infeasible = Feasibility::Infeasible { spectral_radius: rho };
    if rho >= 1.0 {
        return Ok(infeasible);
    }
    let n = bounds.n;
    let system = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - b.entries[i][j]);
    let Some(sol) = system.lu().solve(&DVector::from_element(n, 1.0)) else {
        return Ok(infeasible);
    };
    if sol.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Ok(infeasible);
    }
    let top = sol.max();
    let xi: Vec<f64> = sol.iter().map(|v| v / top).collect();
    let eta = row_slacks(bounds, &xi, beta)?.into_iter().fold(f64::INFINITY, f64::min);
    if !(eta > 0.0) {
        return Ok(infeasible);
    }
    Ok(Feasibility::Feasible(StabilityCertificate {
        xi,
        beta,
        eta,
        method: CertMethod::Spectral,
        pointwise_checked: false,
        spectral_radius: Some(rho),
    }))
}

pub const DEFAULT_BETA_TOL: f64 = 1e-6;
const BISECTION_MAX_ITERS: usize = 200;

/// Largest certifiable rate, to within `tol` of the supremum of feasible β.
pub fn maximize_beta(bounds: &BoundsSummary, tol: f64) -> Result<StabilityCertificate, CertError> {
    let mut best = match certify_at_beta(bounds, 0.0)? {
        Feasibility::Feasible(c) => c,
        Feasibility::Infeasible { spectral_radius } => return Err(CertError::InfeasibleAtZero { spectral_radius }),
    };
    let cap = bounds.beta_cap();
    let mut hi = cap - 1e-12 * cap.max(1.0);
    if let Feasibility::Feasible(c) = certify_at_beta(bounds, hi)? {
        return Ok(c);
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_MAX_ITERS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match certify_at_beta(bounds, mid)? {
            Feasibility::Feasible(c) => {
                lo = mid;
                best = c;
            }
            Feasibility::Infeasible { .. } => hi = mid,
        }
    }
    log::debug!("maximize_beta: beta in [{lo}, {hi}]");
    Ok(best)
}

/// Boundedness constants: `η = min_i [d_iξ_i − Σ_j |a*_ij|G_jξ_j − Σ_j F_jξ_jκ_ij(0)]`
/// and the ultimate bound `2Î/η` on `‖u‖_{ξ,∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Bound {
    pub eta: f64,
    pub i_hat: f64,
    pub bound: f64,
}

pub fn certify_lemma1(bounds: &BoundsSummary, xi: &[f64]) -> Result<Lemma1Bound, CertError> {
    if xi.len() != bounds.n || xi.iter().any(|v| !(*v > 0.0)) {
        return Err(CertError::InvalidWeights);
    }
    let eta = row_slacks(bounds, xi, 0.0)?.into_iter().fold(f64::INFINITY, f64::min);
    if !(eta > 0.0) {
        return Err(CertError::CriterionFails { eta });
    }
    Ok(Lemma1Bound {
        eta,
        i_hat: bounds.i_hat,
        bound: 2.0 * bounds.i_hat / eta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub min_slack: f64,
    pub at_time: f64,
    pub row: usize,
    pub samples: usize,
}

/// Evaluates the time-dependent form of the criterion, with instantaneous
/// `d_i(t)`, `|a_ij(t)|` and kernel weights, on the given times. Sampled audit
/// only; the sup-bound form is what certifies.
pub fn check_pointwise_criterion(
    model: &NetworkModel,
    cert: &StabilityCertificate,
    times: &[f64],
) -> Result<PointwiseReport, CertError> {
    let n = model.n;
    if cert.xi.len() != n || cert.xi.iter().any(|v| !(*v > 0.0)) {
        return Err(CertError::InvalidWeights);
    }
    let beta = cert.beta;
    let g_lip: Vec<f64> = model.activations.g.iter().map(|s| s.lipschitz_bound).collect();
    let f_lip: Vec<f64> = model.activations.f.iter().map(|s| s.lipschitz_bound).collect();
    let mut report = PointwiseReport {
        min_slack: f64::INFINITY,
        at_time: f64::NAN,
        row: 0,
        samples: times.len(),
    };
    for &t in times {
        for i in 0..n {
            let mut slack = (model.d[i].value(t) - beta) * cert.xi[i];
            for j in 0..n {
                let kappa = model.kernels[i][j].moment_at(t, beta)?;
                let delay_gain = if kappa == 0.0 {
                    0.0
                } else {
                    (beta * model.tau[i][j].upper_bound()).exp() * kappa
                };
                slack -= (model.a[i][j].value(t).abs() * g_lip[j] + f_lip[j] * delay_gain) * cert.xi[j];
            }
            if slack < report.min_slack {
                report.min_slack = slack;
                report.at_time = t;
                report.row = i;
            }
        }
    }
    Ok(report)
}

pub fn uniform_times(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|k| start + (end - start) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

impl StabilityCertificate {
    pub fn mark_pointwise(mut self) -> Self {
        self.pointwise_checked = true;
        self
    }
}

/// Serialized certificate report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub feasible: bool,
    pub xi: Vec<f64>,
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    pub method: Option<CertMethod>,
    pub pointwise_checked: bool,
    pub pointwise_min_slack: Option<f64>,
    pub spectral_radius_at_zero: Option<f64>,
    pub lemma1: Option<Lemma1Bound>,
}

impl CertificateReport {
    pub fn infeasible(spectral_radius: f64) -> Self {
        Self {
            feasible: false,
            xi: Vec::new(),
            beta: None,
            eta: None,
            method: None,
            pointwise_checked: false,
            pointwise_min_slack: None,
            spectral_radius_at_zero: Some(spectral_radius),
            lemma1: None,
        }
    }

    pub fn feasible(
        cert: &StabilityCertificate,
        pointwise: Option<&PointwiseReport>,
        spectral_radius_at_zero: Option<f64>,
        lemma1: Option<Lemma1Bound>,
    ) -> Self {
        Self {
            feasible: true,
            xi: cert.xi.clone(),
            beta: Some(cert.beta),
            eta: Some(cert.eta),
            method: Some(cert.method),
            pointwise_checked: cert.pointwise_checked,
            pointwise_min_slack: pointwise.map(|p| p.min_slack),
            spectral_radius_at_zero,
            lemma1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub feasible: bool,
    /// Best weights found, max-normalized.
    pub xi: Vec<f64>,
    /// `max over searched ξ of min_i slack_i/ξ_i`; positive iff feasible.
    pub score: f64,
}

const BRUTE_FORCE_MAX_N: usize = 4;

/// Search-based feasibility test that never forms the comparison matrix: a
/// grid over `ξ ∈ (0, 1]^n` followed by a derivative-free random search in
/// log-coordinates around the best grid point. Meant as an oracle for
/// [`certify_at_beta`] on small systems.
pub fn brute_force_feasibility(
    bounds: &BoundsSummary,
    beta: f64,
    resolution: usize,
) -> Result<BruteForceResult, CertError> {
    let n = bounds.n;
    if n > BRUTE_FORCE_MAX_N {
        return Err(CertError::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    check_beta(bounds, beta)?;
    let c = coupling(bounds, beta)?;
    let diag: Vec<f64> = bounds.d_inf.iter().map(|d| d - beta).collect();
    let score = |xi: &[f64]| -> f64 {
        (0..n)
            .map(|i| diag[i] - c[i].iter().zip(xi).map(|(c, x)| c * x).sum::<f64>() / xi[i])
            .fold(f64::INFINITY, f64::min)
    };

    let resolution = resolution.max(1);
    let mut best_xi = vec![1.0; n];
    let mut best = score(&best_xi);
    let mut idx = vec![1usize; n];
    let mut xi = vec![0.0; n];
    'grid: loop {
        for k in 0..n {
            xi[k] = idx[k] as f64 / resolution as f64;
        }
        let s = score(&xi);
        if s > best {
            best = s;
            best_xi.copy_from_slice(&xi);
        }
        for k in 0..n {
            if idx[k] < resolution {
                idx[k] += 1;
                continue 'grid;
            }
            idx[k] = 1;
        }
        break;
    }

    // (1+1) evolution strategy with a one-fifth success rule; the score is
    // scale invariant so it runs on log ξ
    let mut log_xi: Vec<f64> = best_xi.iter().map(|v| v.ln()).collect();
    let mut step = 1.0 / resolution as f64;
    let mut rng = SplitMix64(0x5eed_f00d ^ (n as u64) ^ (resolution as u64) << 8);
    let mut trial = vec![0.0; n];
    let mut exp_trial = vec![0.0; n];
    for _ in 0..20_000 {
        if best > 0.0 || step < 1e-15 {
            break;
        }
        for k in 0..n {
            trial[k] = log_xi[k] + step * rng.normal();
            exp_trial[k] = trial[k].exp();
        }
        let s = score(&exp_trial);
        if s > best {
            best = s;
            log_xi.copy_from_slice(&trial);
            step *= 1.5;
        } else {
            step *= 0.9;
        }
    }
    let top = log_xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BruteForceResult {
        feasible: best > 0.0,
        xi: log_xi.iter().map(|v| (v - top).exp()).collect(),
        score: best,
    })
}

/// Small deterministic generator for the search; keeps the oracle free of
/// global state.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    fn normal(&mut self) -> f64 {
        let (u, v) = (self.uniform(), self.uniform());
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }
}
