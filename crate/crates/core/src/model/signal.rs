//! Finite trigonometric sums used for every time-varying coefficient.
//!
//! A [`QuasiPeriodicSignal`] is `offset + Σ amp·sin(freq·t + phase)`. Any finite
//! sum of sinusoids is Bohr almost periodic, so every coefficient built from
//! these signals has relatively dense ε-almost-periods for every ε > 0.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// One sinusoidal component `amp·sin(freq·t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub amp: f64,
    /// Angular frequency in rad/time, strictly positive.
    pub freq: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QuasiPeriodicSignal {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub terms: Vec<Term>,
}

impl QuasiPeriodicSignal {
    pub fn new(offset: f64, terms: Vec<Term>) -> Result<Self, ModelError> {
        let sig = Self { offset, terms };
        sig.check()?;
        Ok(sig)
    }

    pub fn constant(value: f64) -> Self {
        Self {
            offset: value,
            terms: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Convenience for `offset + amp·sin(freq·t)`.
    pub fn sinusoid(offset: f64, amp: f64, freq: f64) -> Result<Self, ModelError> {
        Self::new(offset, vec![Term { amp, freq, phase: 0.0 }])
    }

    pub fn with_term(mut self, amp: f64, freq: f64, phase: f64) -> Result<Self, ModelError> {
        self.terms.push(Term { amp, freq, phase });
        self.check()?;
        Ok(self)
    }

    /// Rejects non-finite parameters and nonpositive frequencies.
    pub fn check(&self) -> Result<(), ModelError> {
        if !self.offset.is_finite() {
            return Err(ModelError::InvalidSignal(format!(
                "offset {} is not finite",
                self.offset
            )));
        }
        for (k, term) in self.terms.iter().enumerate() {
            if !(term.amp.is_finite() && term.phase.is_finite()) {
                return Err(ModelError::InvalidSignal(format!(
                    "term {k}: amplitude and phase must be finite"
                )));
            }
            if !(term.freq.is_finite() && term.freq > 0.0) {
                return Err(ModelError::InvalidSignal(format!(
                    "term {k}: angular frequency {} must be positive",
                    term.freq
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.offset
            + self
                .terms
                .iter()
                .map(|term| term.amp * (term.freq * t + term.phase).sin())
                .sum::<f64>()
    }

    /// `Σ|amp|`, summed in ascending order so that the result does not depend
    /// on the order the terms were listed in.
    pub fn amplitude_sum(&self) -> f64 {
        let mut amps: Vec<f64> = self.terms.iter().map(|t| t.amp.abs()).collect();
        amps.sort_by(f64::total_cmp);
        amps.iter().sum()
    }

    pub fn lower_bound(&self) -> f64 {
        self.offset - self.amplitude_sum()
    }

    pub fn upper_bound(&self) -> f64 {
        self.offset + self.amplitude_sum()
    }

    /// Conservative `(inf, sup)` envelope over all real `t`.
    pub fn bounds(&self) -> (f64, f64) {
        (self.lower_bound(), self.upper_bound())
    }

    /// Upper bound on `sup_t |value(t)|`.
    pub fn sup_abs(&self) -> f64 {
        self.offset.abs() + self.amplitude_sum()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.amp == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.offset == 0.0 && self.is_constant()
    }

    /// Rigorous upper bound on `sup_t |value(t+ω) − value(t)|`.
    ///
    /// Each term's shift difference is `2·amp·sin(freq·ω/2)·cos(…)`.
    pub fn shift_defect_bound(&self, omega: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| 2.0 * (t.amp * (0.5 * t.freq * omega).sin()).abs())
            .sum()
    }
}

/// Sampling parameters for [`find_almost_period`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlmostPeriodScan {
    /// Spacing of candidate shifts ω inside the search interval.
    pub grid_step: f64,
    /// The defect is audited for `t ∈ [0, audit_window]`.
    pub audit_window: f64,
    pub audit_step: f64,
}

impl Default for AlmostPeriodScan {
    fn default() -> Self {
        Self {
            grid_step: 1e-3,
            audit_window: 100.0,
            audit_step: 0.05,
        }
    }
}

/// Sampled `max_sig sup_{t ∈ audit} |sig(t+ω) − sig(t)|`, stopping early once
/// `stop_above` is exceeded.
fn sampled_defect(sigs: &[QuasiPeriodicSignal], omega: f64, scan: &AlmostPeriodScan, stop_above: f64) -> f64 {
    let samples = (scan.audit_window / scan.audit_step).ceil() as usize;
    let mut worst = 0.0f64;
    for k in 0..=samples {
        let t = k as f64 * scan.audit_step;
        for sig in sigs {
            let diff = (sig.value(t + omega) - sig.value(t)).abs();
            if diff > worst {
                worst = diff;
                if worst >= stop_above {
                    return worst;
                }
            }
        }
    }
    worst
}

/// Sampled shift defect of a family of signals at a single ω.
pub fn signal_shift_defect(sigs: &[QuasiPeriodicSignal], omega: f64, scan: &AlmostPeriodScan) -> f64 {
    sampled_defect(sigs, omega, scan, f64::INFINITY)
}

/// Every grid candidate ω in `interval` whose audited shift defect over all
/// `sigs` is below `epsilon`. An empty result means the interval exposed no
/// ε-almost-period at this resolution.
pub fn find_almost_period(
    sigs: &[QuasiPeriodicSignal],
    epsilon: f64,
    interval: (f64, f64),
    scan: &AlmostPeriodScan,
) -> Result<Vec<f64>, ModelError> {
    let (lo, hi) = interval;
    if !(hi > lo) || !(epsilon > 0.0) {
        return Err(ModelError::InvalidScan(format!(
            "need epsilon > 0 and a nonempty interval, got epsilon={epsilon}, interval=({lo}, {hi})"
        )));
    }
    if !(scan.grid_step > 0.0 && scan.audit_step > 0.0 && scan.audit_window >= 0.0) {
        return Err(ModelError::InvalidScan(
            "grid_step and audit_step must be positive".into(),
        ));
    }
    let count = ((hi - lo) / scan.grid_step).floor() as usize;
    let mut found = Vec::new();
    for k in 0..=count {
        let omega = lo + k as f64 * scan.grid_step;
        if omega > hi {
            break;
        }
        let bound = sigs.iter().map(|s| s.shift_defect_bound(omega)).fold(0.0, f64::max);
        // the analytic bound dominates the sampled sup
        if bound < epsilon || sampled_defect(sigs, omega, scan, epsilon) < epsilon {
            found.push(omega);
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn eval_examples() {
        assert_eq!(QuasiPeriodicSignal::zero().value(5.0), 0.0);
        let s = QuasiPeriodicSignal::sinusoid(1.0, 0.5, 1.0).unwrap();
        assert!((s.value(PI / 2.0) - 1.5).abs() < 1e-15);
        let s = QuasiPeriodicSignal::sinusoid(2.0, 1.0, 1.0)
            .unwrap()
            .with_term(0.5, SQRT_2, 0.0)
            .unwrap();
        assert_eq!(s.value(0.0), 2.0);
    }

    #[test]
    fn bounds_examples() {
        let s = QuasiPeriodicSignal::sinusoid(1.0, 0.5, 1.0).unwrap();
        assert_eq!(s.bounds(), (0.5, 1.5));
        assert_eq!(QuasiPeriodicSignal::constant(3.0).bounds(), (3.0, 3.0));
    }

    #[test]
    fn incommensurate_bounds_are_approached_by_dense_sampling() {
        let s = QuasiPeriodicSignal::sinusoid(1.0, 1.0, 1.0)
            .unwrap()
            .with_term(1.0, SQRT_2, 0.0)
            .unwrap();
        assert_eq!(s.bounds(), (-1.0, 3.0));
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let n = 2_000_000;
        for k in 0..=n {
            let v = s.value(1e4 * k as f64 / n as f64);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!((-1.0..-1.0 + 0.05).contains(&lo), "sampled min {lo}");
        assert!(hi <= 3.0 && hi > 3.0 - 0.05, "sampled max {hi}");
    }

    #[test]
    fn rejects_nonpositive_frequency() {
        assert!(QuasiPeriodicSignal::sinusoid(0.0, 1.0, 0.0).is_err());
        assert!(QuasiPeriodicSignal::sinusoid(0.0, 1.0, -2.0).is_err());
        assert!(QuasiPeriodicSignal::constant(f64::NAN).check().is_err());
    }

    #[test]
    fn exact_period_is_found() {
        let s = vec![QuasiPeriodicSignal::sinusoid(0.0, 1.0, 1.0).unwrap()];
        let scan = AlmostPeriodScan::default();
        let found = find_almost_period(&s, 0.01, (6.0, 7.0), &scan).unwrap();
        assert!(found.iter().any(|w| (w - 2.0 * PI).abs() < 2e-3));
        assert!(signal_shift_defect(&s, 2.0 * PI, &scan) < 1e-10);
        // all returned candidates are near 2π
        assert!(found.iter().all(|w| (w - 2.0 * PI).abs() < 0.011));
    }

    #[test]
    fn constants_admit_every_shift() {
        let s = vec![QuasiPeriodicSignal::constant(5.0)];
        let scan = AlmostPeriodScan {
            grid_step: 0.01,
            ..Default::default()
        };
        let found = find_almost_period(&s, 0.01, (0.1, 1.0), &scan).unwrap();
        assert_eq!(found.len(), 91);
    }

    #[test]
    fn quasi_periodic_sum_has_almost_periods_below_300() {
        let s = vec![QuasiPeriodicSignal::sinusoid(0.0, 1.0, 1.0)
            .unwrap()
            .with_term(1.0, SQRT_2, 0.0)
            .unwrap()];
        let scan = AlmostPeriodScan::default();
        let found = find_almost_period(&s, 0.1, (0.0, 300.0), &scan).unwrap();
        assert!(!found.is_empty());
        // oracle: exhaustive fine scan of the sampled defect near the best
        // candidate agrees with the returned set
        for &w in &found {
            assert!(signal_shift_defect(&s, w, &scan) < 0.1);
        }
    }

    #[test]
    fn empty_scan_is_valid() {
        let s = vec![QuasiPeriodicSignal::sinusoid(0.0, 1.0, 1.0).unwrap()];
        let found = find_almost_period(&s, 0.01, (1.0, 2.0), &AlmostPeriodScan::default()).unwrap();
        assert!(found.is_empty());
        assert!(find_almost_period(&s, 0.01, (2.0, 1.0), &AlmostPeriodScan::default()).is_err());
    }
}
