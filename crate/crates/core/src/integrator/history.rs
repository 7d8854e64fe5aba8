use serde::{Deserialize, Serialize};

use crate::model::{ModelError, QuasiPeriodicSignal};

/// Initial function `φ` on `(−∞, 0]`, represented on `[−window, 0]` and
/// extended by its value at `−window` further back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryFunction {
    #[serde(flatten)]
    pub kind: HistoryKind,
    #[serde(default = "default_window")]
    pub window: f64,
}

fn default_window() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryKind {
    Constant {
        values: Vec<f64>,
    },
    Signals {
        signals: Vec<QuasiPeriodicSignal>,
    },
    /// Piecewise-linear table; `times` increasing and within `[−window, 0]`.
    Table {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl HistoryFunction {
    pub fn constant(values: Vec<f64>) -> Self {
        Self {
            kind: HistoryKind::Constant { values },
            window: default_window(),
        }
    }

    pub fn signals(signals: Vec<QuasiPeriodicSignal>, window: f64) -> Self {
        Self {
            kind: HistoryKind::Signals { signals },
            window,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            HistoryKind::Constant { values } => values.len(),
            HistoryKind::Signals { signals } => signals.len(),
            HistoryKind::Table { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    pub fn check(&self, n: usize) -> Result<(), ModelError> {
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(ModelError::InvalidHistory(format!(
                "window {} must be positive",
                self.window
            )));
        }
        if self.dim() != n {
            return Err(ModelError::Dimension {
                field: "history",
                expected: n,
                found: self.dim(),
            });
        }
        match &self.kind {
            HistoryKind::Constant { values } if values.iter().any(|v| !v.is_finite()) => {
                Err(ModelError::InvalidHistory("values must be finite".into()))
            }
            HistoryKind::Signals { signals } => signals.iter().try_for_each(QuasiPeriodicSignal::check),
            HistoryKind::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(ModelError::InvalidHistory("table needs one value row per time".into()));
                }
                if values
                    .iter()
                    .any(|row| row.len() != n || row.iter().any(|v| !v.is_finite()))
                {
                    return Err(ModelError::InvalidHistory(
                        "table rows must have n finite entries".into(),
                    ));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) || times.last().is_some_and(|&t| t > 0.0) {
                    return Err(ModelError::InvalidHistory(
                        "table times must increase and end at or before 0".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Component `i` of `φ(t)` for `t ≤ 0`.
    pub fn eval_component(&self, i: usize, t: f64) -> f64 {
        let t = t.min(0.0).max(-self.window);
        match &self.kind {
            HistoryKind::Constant { values } => values[i],
            HistoryKind::Signals { signals } => signals[i].value(t),
            HistoryKind::Table { times, values } => {
                let last = times.len() - 1;
                if t <= times[0] {
                    return values[0][i];
                }
                if t >= times[last] {
                    return values[last][i];
                }
                let k = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                values[k][i] + w * (values[k + 1][i] - values[k][i])
            }
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        (0..self.dim()).map(|i| self.eval_component(i, t)).collect()
    }

    /// Sampled `sup_{t ≤ 0} ‖φ(t)‖_{ξ,∞}` (exact for constant histories).
    pub fn weighted_sup(&self, xi: &[f64]) -> f64 {
        let norm = |t: f64| {
            (0..self.dim())
                .map(|i| (self.eval_component(i, t) / xi[i]).abs())
                .fold(0.0, f64::max)
        };
        match &self.kind {
            HistoryKind::Constant { .. } => norm(0.0),
            HistoryKind::Table { times, .. } => times.iter().map(|&t| norm(t)).fold(norm(0.0), f64::max),
            HistoryKind::Signals { .. } => {
                let samples = 4096;
                (0..=samples)
                    .map(|k| norm(-self.window * k as f64 / samples as f64))
                    .fold(0.0, f64::max)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_history() {
        let h = HistoryFunction::constant(vec![1.0]);
        assert_eq!(h.eval(-5.0), vec![1.0]);
        assert_eq!(h.eval(0.0), vec![1.0]);
    }

    #[test]
    fn signal_history_is_frozen_before_window() {
        let s = QuasiPeriodicSignal::sinusoid(0.0, 1.0, 1.0).unwrap();
        let h = HistoryFunction::signals(vec![s.clone()], 2.0);
        assert_eq!(h.eval_component(0, -1.0), s.value(-1.0));
        assert_eq!(h.eval_component(0, -50.0), s.value(-2.0));
    }

    #[test]
    fn table_history_interpolates() {
        let h = HistoryFunction {
            kind: HistoryKind::Table {
                times: vec![-1.0, 0.0],
                values: vec![vec![0.0, 2.0], vec![1.0, 4.0]],
            },
            window: 1.0,
        };
        h.check(2).unwrap();
        assert_eq!(h.eval(-0.5), vec![0.5, 3.0]);
        assert_eq!(h.eval(-3.0), vec![0.0, 2.0]);
        assert_eq!(h.weighted_sup(&[1.0, 2.0]), 2.0);
    }

    #[test]
    fn dimension_checked() {
        assert!(HistoryFunction::constant(vec![1.0, 2.0]).check(1).is_err());
    }
}
