//! Activation functions and sampled membership checks for the Lipschitz
//! classes `H{G}` (non-decreasing) and `H1{F}`.

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    Tanh,
    /// `(|x+1| − |x−1|)/2`
    PiecewiseLinear,
    Linear {
        slope: f64,
    },
    /// Linear interpolation through `(xs, ys)`, constant outside the table.
    Table {
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    #[serde(flatten)]
    pub kind: ActivationKind,
    pub lipschitz_bound: f64,
    #[serde(default)]
    pub requires_monotone: bool,
}

impl ActivationSpec {
    pub fn new(kind: ActivationKind, lipschitz_bound: f64, requires_monotone: bool) -> Result<Self, ModelError> {
        let spec = Self {
            kind,
            lipschitz_bound,
            requires_monotone,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn tanh() -> Self {
        Self {
            kind: ActivationKind::Tanh,
            lipschitz_bound: 1.0,
            requires_monotone: true,
        }
    }

    pub fn identity() -> Self {
        Self::linear(1.0)
    }

    pub fn linear(slope: f64) -> Self {
        Self {
            kind: ActivationKind::Linear { slope },
            lipschitz_bound: slope.abs(),
            requires_monotone: slope >= 0.0,
        }
    }

    pub fn piecewise_linear() -> Self {
        Self {
            kind: ActivationKind::PiecewiseLinear,
            lipschitz_bound: 1.0,
            requires_monotone: true,
        }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if !(self.lipschitz_bound.is_finite() && self.lipschitz_bound > 0.0) {
            return Err(ModelError::InvalidActivation(format!(
                "lipschitz_bound {} must be positive",
                self.lipschitz_bound
            )));
        }
        match &self.kind {
            ActivationKind::Linear { slope } if !slope.is_finite() => {
                Err(ModelError::InvalidActivation("slope must be finite".into()))
            }
            ActivationKind::Table { xs, ys } => {
                if xs.len() != ys.len() || xs.is_empty() {
                    return Err(ModelError::InvalidActivation(
                        "table needs matching, nonempty xs and ys".into(),
                    ));
                }
                if xs.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(ModelError::InvalidActivation(
                        "table xs must be strictly increasing".into(),
                    ));
                }
                if xs.iter().chain(ys).any(|v| !v.is_finite()) {
                    return Err(ModelError::InvalidActivation("table entries must be finite".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::PiecewiseLinear => 0.5 * ((x + 1.0).abs() - (x - 1.0).abs()),
            ActivationKind::Linear { slope } => slope * x,
            ActivationKind::Table { xs, ys } => table_interp(xs, ys, x),
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// `sup |f|` when the activation is bounded.
    pub fn sup_abs(&self) -> Option<f64> {
        match &self.kind {
            ActivationKind::Tanh | ActivationKind::PiecewiseLinear => Some(1.0),
            ActivationKind::Linear { slope } if *slope == 0.0 => Some(0.0),
            ActivationKind::Linear { .. } => None,
            ActivationKind::Table { ys, .. } => Some(ys.iter().fold(0.0, |m, y| m.max(y.abs()))),
        }
    }

    /// Samples difference quotients between consecutive grid points.
    pub fn validate(&self, grid: &ValidationGrid) -> Result<ActivationReport, ModelError> {
        if grid.points < 2 || !(grid.half_width > 0.0) {
            return Err(ModelError::DegenerateGrid(grid.points));
        }
        let dx = 2.0 * grid.half_width / (grid.points - 1) as f64;
        let xs: Vec<f64> = (0..grid.points).map(|k| -grid.half_width + k as f64 * dx).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();

        let mut worst_quotient = 0.0;
        let mut worst_pair = (xs[0], xs[1]);
        let mut monotone_violation = None;
        for k in 0..grid.points - 1 {
            let rise = ys[k + 1] - ys[k];
            let quotient = rise.abs() / (xs[k + 1] - xs[k]);
            if quotient > worst_quotient {
                worst_quotient = quotient;
                worst_pair = (xs[k], xs[k + 1]);
            }
            if rise < -ROUNDING_ABS_TOL * (1.0 + ys[k].abs()) && monotone_violation.is_none() {
                monotone_violation = Some((xs[k], xs[k + 1]));
            }
        }
        let lipschitz_ok = worst_quotient <= self.lipschitz_bound * (1.0 + LIPSCHITZ_REL_TOL);
        let monotone_ok = monotone_violation.is_none();
        Ok(ActivationReport {
            passed: lipschitz_ok && (monotone_ok || !self.requires_monotone),
            lipschitz_ok,
            monotone_ok,
            worst_quotient,
            worst_pair,
            monotone_violation,
        })
    }
}

/// Rounding slack on sampled quotients of exactly linear pieces.
const LIPSCHITZ_REL_TOL: f64 = 1e-9;
/// Flat pieces may wobble by a few ulps.
const ROUNDING_ABS_TOL: f64 = 1e-12;

fn table_interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + w * (ys[k + 1] - ys[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationGrid {
    pub half_width: f64,
    pub points: usize,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            points: 4001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationReport {
    pub passed: bool,
    pub lipschitz_ok: bool,
    pub monotone_ok: bool,
    pub worst_quotient: f64,
    /// Grid pair realizing the largest difference quotient.
    pub worst_pair: (f64, f64),
    pub monotone_violation: Option<(f64, f64)>,
}
