//! Lebesgue–Stieltjes delay kernels `s ↦ dK(t, s)`.
//!
//! A kernel is a finite set of point masses (discrete lags) plus a finite set
//! of exponential-polynomial densities `p·s^q·e^{−λs} ds`, each modulated by a
//! quasi-periodic coefficient in `t`.

use serde::{Deserialize, Serialize};

use super::{ModelError, QuasiPeriodicSignal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub lag: f64,
    pub weight: QuasiPeriodicSignal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub coefficient: QuasiPeriodicSignal,
    pub p: f64,
    #[serde(default)]
    pub q: u32,
    pub lambda: f64,
}

/// The time-independent part `p·s^q·e^{−λs}` of a density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelShape {
    pub p: f64,
    #[serde(default)]
    pub q: u32,
    pub lambda: f64,
}

impl Density {
    pub fn shape(&self) -> KernelShape {
        KernelShape {
            p: self.p,
            q: self.q,
            lambda: self.lambda,
        }
    }

    /// `p·s^q·e^{−λs}`
    #[inline]
    pub fn profile(&self, s: f64) -> f64 {
        self.p * s.powi(self.q as i32) * (-self.lambda * s).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DelayKernel {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub densities: Vec<Density>,
}

fn factorial(q: u32) -> f64 {
    (1..=q).map(f64::from).product()
}

impl DelayKernel {
    pub fn new(atoms: Vec<Atom>, densities: Vec<Density>) -> Result<Self, ModelError> {
        let k = Self { atoms, densities };
        k.check()?;
        Ok(k)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Single point mass at `lag`.
    pub fn atom(lag: f64, weight: QuasiPeriodicSignal) -> Result<Self, ModelError> {
        Self::new(vec![Atom { lag, weight }], Vec::new())
    }

    /// Single density `coefficient(t)·p·s^q·e^{−λs} ds`.
    pub fn density(coefficient: QuasiPeriodicSignal, shape: KernelShape) -> Result<Self, ModelError> {
        Self::new(
            Vec::new(),
            vec![Density {
                coefficient,
                p: shape.p,
                q: shape.q,
                lambda: shape.lambda,
            }],
        )
    }

    pub fn check(&self) -> Result<(), ModelError> {
        for (k, atom) in self.atoms.iter().enumerate() {
            if !(atom.lag.is_finite() && atom.lag >= 0.0) {
                return Err(ModelError::InvalidKernel(format!(
                    "atom {k}: lag {} must be finite and nonnegative",
                    atom.lag
                )));
            }
            atom.weight.check()?;
        }
        for (k, dens) in self.densities.iter().enumerate() {
            if !(dens.lambda.is_finite() && dens.lambda > 0.0) {
                return Err(ModelError::InvalidKernel(format!(
                    "density {k}: decay {} must be positive",
                    dens.lambda
                )));
            }
            if !dens.p.is_finite() {
                return Err(ModelError::InvalidKernel(format!("density {k}: scale must be finite")));
            }
            dens.coefficient.check()?;
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.weight.is_zero())
            && self.densities.iter().all(|d| d.p == 0.0 || d.coefficient.is_zero())
    }

    /// Smallest density decay; `∞` for kernels without densities.
    pub fn min_decay(&self) -> f64 {
        self.densities.iter().map(|d| d.lambda).fold(f64::INFINITY, f64::min)
    }

    pub fn max_atom_lag(&self) -> f64 {
        self.atoms.iter().map(|a| a.lag).fold(0.0, f64::max)
    }

    /// `∫₀^∞ e^{βs}|dK(s)|` for the time-independent envelope, in closed form.
    ///
    /// Diverges (error) when `β ≥ min λ`.
    pub fn moment(&self, beta: f64) -> Result<f64, ModelError> {
        self.moment_with(beta, |sig| sig.sup_abs())
    }

    /// Same moment with coefficients frozen at time `t` instead of their sup.
    pub fn moment_at(&self, t: f64, beta: f64) -> Result<f64, ModelError> {
        self.moment_with(beta, |sig| sig.value(t).abs())
    }

    fn moment_with(&self, beta: f64, magnitude: impl Fn(&QuasiPeriodicSignal) -> f64) -> Result<f64, ModelError> {
        if beta >= self.min_decay() {
            return Err(ModelError::DivergentMoment {
                beta,
                decay: self.min_decay(),
            });
        }
        let atoms: f64 = self
            .atoms
            .iter()
            .map(|a| magnitude(&a.weight) * (beta * a.lag).exp())
            .fold(0.0, |acc, v| acc + v);
        let dens: f64 = self
            .densities
            .iter()
            .map(|d| {
                let rate = d.lambda - beta;
                magnitude(&d.coefficient) * d.p.abs() * factorial(d.q) / rate.powi(d.q as i32 + 1)
            })
            .fold(0.0, |acc, v| acc + v);
        Ok(atoms + dens)
    }

    /// `f_sup·Σ |c|_sup·∫_{S}^∞ |p| s^q e^{−λs} ds`, the mass of density tails
    /// beyond the cutoff `s_max`. Atoms are evaluated exactly and contribute 0.
    pub fn truncation_bound(&self, s_max: f64, f_sup: f64) -> f64 {
        f_sup
            * self
                .densities
                .iter()
                .map(|d| d.coefficient.sup_abs() * d.p.abs() * upper_tail(d.q, d.lambda, s_max))
                .fold(0.0, |acc, v| acc + v)
    }

    /// Smallest cutoff (to ~0.1% relative) whose truncation bound is at most
    /// `tolerance` for a unit activation magnitude. Zero when the kernel has no
    /// densities.
    pub fn cutoff_for(&self, tolerance: f64) -> f64 {
        if self.densities.is_empty() || self.truncation_bound(0.0, 1.0) <= tolerance {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.truncation_bound(hi, 1.0) > tolerance {
            hi *= 2.0;
            if hi > 1e9 {
                return hi;
            }
        }
        let mut lo = hi / 2.0;
        if self.truncation_bound(lo, 1.0) <= tolerance {
            lo = 0.0;
        }
        while hi - lo > 1e-3 * hi {
            let mid = 0.5 * (lo + hi);
            if self.truncation_bound(mid, 1.0) <= tolerance {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// `∫_S^∞ s^q e^{−λs} ds = e^{−λS} Σ_{k=0}^{q} q!/k! · S^k / λ^{q−k+1}`.
pub(crate) fn upper_tail(q: u32, lambda: f64, s: f64) -> f64 {
    let qf = factorial(q);
    let sum: f64 = (0..=q)
        .map(|k| qf / factorial(k) * s.powi(k as i32) / lambda.powi((q - k) as i32 + 1))
        .sum();
    (-lambda * s).exp() * sum
}
