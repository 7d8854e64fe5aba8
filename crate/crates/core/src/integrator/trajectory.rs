use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::IntegrateError;

/// Cubic Hermite interpolant on `[x0, x0 + h]` at `x0 + θh`, given values and
/// derivatives at both ends. `θ > 1` extrapolates.
#[inline]
pub fn hermite(theta: f64, h: f64, y0: f64, f0: f64, y1: f64, f1: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
}

/// Recorded solution on a uniform grid, with derivatives for dense output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub spacing: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
    pub model_tag: String,
}

impl Trajectory {
    pub fn new(n: usize, spacing: f64, model_tag: String) -> Self {
        Self {
            n,
            spacing,
            times: Vec::new(),
            states: Vec::new(),
            derivs: Vec::new(),
            model_tag,
        }
    }

    pub fn push(&mut self, t: f64, state: Vec<f64>, deriv: Vec<f64>) {
        self.times.push(t);
        self.states.push(state);
        self.derivs.push(deriv);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times.first().copied().unwrap_or(0.0)
    }

    pub fn end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.states.last()?.as_slice()))
    }

    /// Hermite interpolation inside `[start, end]`; exact at recorded times.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>, IntegrateError> {
        let (start, end) = (self.start(), self.end());
        let slack = 1e-9 * self.spacing;
        if self.is_empty() || t < start - slack || t > end + slack {
            return Err(IntegrateError::BeyondFrontier { time: t, frontier: end });
        }
        let last = self.len() - 1;
        let pos = ((t - start) / self.spacing).max(0.0);
        let k = (pos.floor() as usize).min(last);
        if self.times[k] == t || last == 0 {
            return Ok(self.states[k].clone());
        }
        let k = k.min(last - 1);
        let theta = (t - self.times[k]) / self.spacing;
        Ok((0..self.n)
            .map(|j| {
                hermite(
                    theta,
                    self.spacing,
                    self.states[k][j],
                    self.derivs[k][j],
                    self.states[k + 1][j],
                    self.derivs[k + 1][j],
                )
            })
            .collect())
    }

    /// CSV with header `t,u_1,…,u_n,du_1,…,du_n`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IntegrateError> {
        let io = |e: csv::Error| IntegrateError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        let header = std::iter::once("t".to_string())
            .chain((1..=self.n).map(|i| format!("u_{i}")))
            .chain((1..=self.n).map(|i| format!("du_{i}")));
        w.write_record(header).map_err(io)?;
        for k in 0..self.len() {
            let row = std::iter::once(self.times[k])
                .chain(self.states[k].iter().copied())
                .chain(self.derivs[k].iter().copied())
                .map(format_sig17);
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| IntegrateError::Io(e.to_string()))
    }

    pub fn read_csv<R: Read>(reader: R, model_tag: &str) -> Result<Self, IntegrateError> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers().map_err(|e| IntegrateError::Io(e.to_string()))?.clone();
        if headers.is_empty() || &headers[0] != "t" || headers.len() % 2 != 1 {
            return Err(IntegrateError::Io("expected header t,u_1..u_n,du_1..du_n".into()));
        }
        let n = (headers.len() - 1) / 2;
        let mut traj = Trajectory::new(n, 0.0, model_tag.to_string());
        for (line, record) in r.records().enumerate() {
            let record = record.map_err(|e| IntegrateError::Io(e.to_string()))?;
            let values = record
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| IntegrateError::Io(format!("row {}: {e}", line + 1)))?;
            if values.len() != 2 * n + 1 {
                return Err(IntegrateError::Io(format!("row {}: wrong column count", line + 1)));
            }
            traj.push(values[0], values[1..=n].to_vec(), values[n + 1..].to_vec());
        }
        if traj.len() >= 2 {
            traj.spacing = (traj.end() - traj.start()) / (traj.len() - 1) as f64;
        }
        Ok(traj)
    }
}

/// Scientific notation with 17 significant digits; round-trips every f64.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}
