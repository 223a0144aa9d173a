//! Single-tone, constant-amplitude pulses: `g(t) = Ω sin(2lπt/τ)` on the first
//! half of the gate and `g(t + τ/2) = −g(t)` on the second.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::mec::MecAssignment;
use crate::mode_solver::ModeSpectrum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("no candidate tone index in [{min}, {max}] for the requested parity")]
    NoCandidates { min: u32, max: u32 },
    #[error("pair uncoupled at this l (S = 0)")]
    Uncoupled,
    #[error("undersampled waveform: {samples} intervals, need at least {required}")]
    Undersampled { samples: usize, required: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of(l: u32) -> Self {
        if l % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Odd => "odd",
            Parity::Even => "even",
        }
    }
}

/// One XX gate: ion pair, duration, tone index, drive strength and target.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    pub pair: (usize, usize),
    /// Gate time τ (s).
    pub tau: f64,
    /// Tone index `l ≥ 1`.
    pub l: u32,
    /// Rabi frequency Ω (rad/s).
    pub omega: f64,
    /// Uniform shift δ of every effective mode detuning (rad/s); modes are
    /// seen at `ω_p − δ`.
    pub added_detuning: f64,
    /// Target `|χ|` (rad); `π/8` is maximally entangling.
    pub target_chi: f64,
}

impl GateSpec {
    pub fn new(pair: (usize, usize), tau: f64, l: u32) -> Result<Self, DesignError> {
        let g = Self {
            pair,
            tau,
            l,
            omega: 0.0,
            added_detuning: 0.0,
            target_chi: PI / 8.0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_added_detuning(mut self, delta: f64) -> Self {
        self.added_detuning = delta;
        self
    }

    pub fn parity(&self) -> Parity {
        Parity::of(self.l)
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        let bad = |m: String| Err(DesignError::InvalidGate(m));
        if self.pair.0 == self.pair.1 {
            return bad(format!(
                "pair ({}, {}) must name two ions",
                self.pair.0, self.pair.1
            ));
        }
        if self.l == 0 {
            return bad("l must be positive".into());
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return bad(format!("omega must be non-negative, got {}", self.omega));
        }
        if !self.added_detuning.is_finite() || !self.target_chi.is_finite() {
            return bad("detuning and target must be finite".into());
        }
        Ok(())
    }

    pub fn check_pair(&self, n_ions: usize) -> Result<(), DesignError> {
        if self.pair.0 >= n_ions || self.pair.1 >= n_ions {
            return Err(DesignError::InvalidGate(format!(
                "pair {:?} out of range for {n_ions} ions",
                self.pair
            )));
        }
        Ok(())
    }

    /// The spectrum as seen by this gate: every mode moved by the added detuning.
    pub fn effective_spectrum(&self, spectrum: &ModeSpectrum) -> ModeSpectrum {
        spectrum.shifted(self.added_detuning)
    }
}

/// `S` such that `χ = Ω² τ² S`, valid when the spectrum meets the MEC exactly
/// at the assignment's integers `k_p`.
pub fn chi_coefficient(spectrum: &ModeSpectrum, mec: &MecAssignment, pair: (usize, usize), l: u32) -> f64 {
    let (i, j) = pair;
    let l = l as f64;
    let sum: f64 = mec
        .k
        .iter()
        .enumerate()
        .map(|(p, &k)| {
            let coupling = spectrum.eta(p, i) * spectrum.eta(p, j);
            let k = k as f64;
            if 2.0 * k == l {
                coupling * 3.0 / (8.0 * l)
            } else {
                coupling * k / (4.0 * k * k - l * l)
            }
        })
        .sum();
    sum / TAU
}

/// Inclusive range of tone indices to scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LRange {
    pub min: u32,
    pub max: u32,
}

impl LRange {
    /// `[2 min k − 40, 2 max k + 40]`, clamped to `l ≥ 1`.
    pub fn around(mec: &MecAssignment) -> Self {
        let kmin = mec.k.iter().copied().min().unwrap_or(1);
        let kmax = mec.k.iter().copied().max().unwrap_or(1);
        Self {
            min: (2 * kmin).saturating_sub(40).max(1),
            max: 2 * kmax + 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LScanRow {
    pub l: u32,
    pub parity: Parity,
    pub s: f64,
    /// Some mode has `2k_p = l`.
    pub resonant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LSelection {
    pub l: u32,
    pub s: f64,
    /// Every `l` in the range, both parities.
    pub table: Vec<LScanRow>,
}

/// Picks the tone index of the given parity with the largest `|S|`, i.e. the
/// lowest Rabi frequency for a fixed gate angle. Ties go to the smaller `l`.
pub fn select_l(
    spectrum: &ModeSpectrum,
    mec: &MecAssignment,
    pair: (usize, usize),
    range: LRange,
    parity: Parity,
    forbid_resonant: bool,
) -> Result<LSelection, DesignError> {
    if range.min == 0 || range.min > range.max {
        return Err(DesignError::NoCandidates {
            min: range.min,
            max: range.max,
        });
    }
    let table: Vec<LScanRow> = (range.min..=range.max)
        .map(|l| LScanRow {
            l,
            parity: Parity::of(l),
            s: chi_coefficient(spectrum, mec, pair, l),
            resonant: mec.resonant_mode(l).is_some(),
        })
        .collect();
    let best = table
        .iter()
        .filter(|r| r.parity == parity && !(forbid_resonant && r.resonant))
        .fold(None::<&LScanRow>, |best, r| match best {
            Some(b) if b.s.abs() >= r.s.abs() => Some(b),
            _ => Some(r),
        })
        .ok_or(DesignError::NoCandidates {
            min: range.min,
            max: range.max,
        })?;
    Ok(LSelection {
        l: best.l,
        s: best.s,
        table,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Rabi frequency Ω (rad/s).
    pub omega: f64,
    /// Sign of the realised gate angle (sign of `S`).
    pub sign: f64,
}

/// `Ω = sqrt(target / (|S| τ²))`.
pub fn calibrate_omega(s: f64, tau: f64, target_chi: f64) -> Result<Calibration, DesignError> {
    if s == 0.0 || !s.is_finite() {
        return Err(DesignError::Uncoupled);
    }
    if tau.is_nan() || tau <= 0.0 || target_chi.is_nan() || target_chi < 0.0 {
        return Err(DesignError::InvalidGate(format!(
            "need tau > 0 and target ≥ 0, got tau={tau} target={target_chi}"
        )));
    }
    Ok(Calibration {
        omega: (target_chi / (s.abs() * tau * tau)).sqrt(),
        sign: s.signum(),
    })
}

/// Sampled pulse. Samples lie on the endpoint-inclusive uniform grid
/// `t_k = kτ/n`, `k = 0..=n`, with `n` even so that `τ/2` is a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseWaveform {
    pub samples: Vec<(f64, f64)>,
    pub tau: f64,
    pub l: u32,
    pub omega: f64,
}

impl PulseWaveform {
    /// Number of sampling intervals `n`.
    pub fn intervals(&self) -> usize {
        self.samples.len().saturating_sub(1)
    }

    /// Pulse value at any `t ∈ [0, τ]`.
    pub fn value_at(&self, t: f64) -> f64 {
        let half = 0.5 * self.tau;
        let arg = |s: f64| TAU * self.l as f64 * s / self.tau;
        if t < half {
            self.omega * arg(t).sin()
        } else {
            -self.omega * arg(t - half).sin()
        }
    }
}

/// Samples the pulse of `gate` on `sample_count` intervals.
pub fn waveform(gate: &GateSpec, sample_count: usize) -> Result<PulseWaveform, DesignError> {
    gate.validate()?;
    let required = 2 * gate.l as usize;
    if sample_count % 2 == 1 || sample_count < required.max(2) {
        return Err(DesignError::Undersampled {
            samples: sample_count,
            required: required.max(2).next_multiple_of(2),
        });
    }
    let n = sample_count;
    let half = n / 2;
    let tone = TAU * gate.l as f64 / gate.tau;
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..half {
        let t = gate.tau * k as f64 / n as f64;
        samples.push((t, gate.omega * (tone * t).sin()));
    }
    for k in half..=n {
        let t = gate.tau * k as f64 / n as f64;
        let mirrored = -samples[k - half].1;
        samples.push((t, mirrored));
    }
    Ok(PulseWaveform {
        samples,
        tau: gate.tau,
        l: gate.l,
        omega: gate.omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mec::analyze;
    use crate::mode_solver::{ideal_participation, measured_spectrum, Coupling};
    use crate::units::{mhz_to_angular, us_to_s};

    fn baseline() -> (ModeSpectrum, MecAssignment) {
        let f: Vec<f64> = [2.963, 3.005, 3.036].iter().map(|f| mhz_to_angular(*f)).collect();
        let s = measured_spectrum(
            &f,
            &ideal_participation(3).unwrap(),
            None,
            None,
            Coupling::default(),
        )
        .unwrap();
        let m = analyze(&s, us_to_s(191.7));
        (s, m)
    }

    fn unit_eta() -> ModeSpectrum {
        let b = ideal_participation(3).unwrap();
        let c = Coupling::default();
        let w = 1.0;
        let s = measured_spectrum(&[w, w, w], &b, None, None, c).unwrap();
        let scale = 1.0 / c.lamb_dicke(1.0, w);
        s.scale_lamb_dicke(scale)
    }

    #[test]
    fn participation_only_sum_by_hand() {
        // Hand evaluation: zig-zag (−1/3)(284/−1137), COM (1/3)(291/14963), tilt 0.
        let (_, m) = baseline();
        let s = unit_eta();
        let got = chi_coefficient(&s, &m, (0, 1), 569) * TAU;
        let zz: f64 = (-1.0 / 3.0) * (284.0 / (4.0 * 284.0 * 284.0 - 569.0 * 569.0));
        let com: f64 = (1.0 / 3.0) * (291.0 / (4.0 * 291.0 * 291.0 - 569.0 * 569.0));
        assert!((zz - 0.08326).abs() < 1e-5);
        assert!((com - 0.00648).abs() < 1e-5);
        assert!((got - (zz + com)).abs() < 1e-14);
    }

    #[test]
    fn tilt_mode_contributes_nothing_to_outer_pair() {
        let (s, m) = baseline();
        let with = chi_coefficient(&s, &m, (0, 1), 569);
        let mut m2 = m.clone();
        m2.k[1] = 1000;
        assert!((with - chi_coefficient(&s, &m2, (0, 1), 569)).abs() < 1e-12 * with.abs());
    }

    #[test]
    fn resonant_branch_is_finite() {
        let (s, m) = baseline();
        let v = chi_coefficient(&s, &m, (0, 1), 582);
        assert!(v.is_finite());
        let l = 582.0;
        let com = s.eta(2, 0) * s.eta(2, 1) * 3.0 / (8.0 * l);
        let rest: f64 = [0usize, 1]
            .iter()
            .map(|&p| {
                let k = m.k[p] as f64;
                s.eta(p, 0) * s.eta(p, 1) * k / (4.0 * k * k - l * l)
            })
            .sum();
        assert!((v - (com + rest) / TAU).abs() < 1e-18);
    }

    #[test]
    fn select_picks_adjacent_to_resonance_and_reports_table() {
        let (s, m) = baseline();
        let range = LRange::around(&m);
        assert_eq!(range, LRange { min: 528, max: 622 });
        let odd = select_l(&s, &m, (0, 1), range, Parity::Odd, true).unwrap();
        assert_eq!(odd.table.len(), 95);
        assert!(odd.table.iter().all(|r| r.s.is_finite()));
        assert_eq!(odd.l % 2, 1);
    }

    #[test]
    fn empty_candidates_error() {
        let (s, m) = baseline();
        let r = select_l(&s, &m, (0, 1), LRange { min: 568, max: 568 }, Parity::Even, true);
        assert!(matches!(r, Err(DesignError::NoCandidates { .. })));
        let r = select_l(&s, &m, (0, 1), LRange { min: 570, max: 568 }, Parity::Even, false);
        assert!(r.is_err());
    }

    #[test]
    fn calibration_scaling() {
        let a = calibrate_omega(0.01, 2e-4, PI / 8.0).unwrap();
        let b = calibrate_omega(0.04, 2e-4, PI / 8.0).unwrap();
        assert!((a.omega / b.omega - 2.0).abs() < 1e-14);
        assert_eq!(calibrate_omega(0.01, 2e-4, 0.0).unwrap().omega, 0.0);
        assert_eq!(calibrate_omega(-0.01, 2e-4, 0.1).unwrap().sign, -1.0);
        assert_eq!(calibrate_omega(0.0, 2e-4, 0.1), Err(DesignError::Uncoupled));
    }

    #[test]
    fn waveform_prime_one_is_exact() {
        for l in [569u32, 570] {
            let g = GateSpec::new((0, 1), us_to_s(191.7), l).unwrap().with_omega(1.0);
            let w = waveform(&g, 4 * l as usize).unwrap();
            let n = w.intervals();
            assert_eq!(w.samples[n / 2].0, 0.5 * g.tau);
            for k in 0..n / 2 {
                assert_eq!(w.samples[k + n / 2].1, -w.samples[k].1);
            }
            assert_eq!(w.samples[0].1, 0.0);
            assert!(w.samples[n].1.abs() < 1e-9);
        }
    }

    #[test]
    fn odd_waveform_is_a_single_sine() {
        let g = GateSpec::new((0, 1), 1.0, 7).unwrap().with_omega(2.0);
        let w = waveform(&g, 1000).unwrap();
        for &(t, v) in &w.samples {
            assert!((v - 2.0 * (TAU * 7.0 * t).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn even_waveform_has_a_cusp() {
        let g = GateSpec::new((0, 1), 1.0, 6).unwrap().with_omega(1.0);
        let eps = 1e-6;
        let left = g.omega * (TAU * 6.0 * (0.5 - eps)).sin();
        let w = waveform(&g, 1200).unwrap();
        let right = w.value_at(0.5 + eps);
        assert!((left - right).abs() < 1e-12);
        // slopes on either side of τ/2 differ in sign
        let slope_l = (w.value_at(0.5 - eps) - w.value_at(0.5 - 2.0 * eps)) / eps;
        let slope_r = (w.value_at(0.5 + 2.0 * eps) - w.value_at(0.5 + eps)) / eps;
        assert!(slope_l * slope_r < 0.0);
    }

    #[test]
    fn undersampling_rejected() {
        let g = GateSpec::new((0, 1), 1.0, 10).unwrap();
        assert!(matches!(waveform(&g, 18), Err(DesignError::Undersampled { .. })));
        assert!(matches!(waveform(&g, 21), Err(DesignError::Undersampled { .. })));
    }

    #[test]
    fn gate_validation() {
        assert!(GateSpec::new((1, 1), 1.0, 3).is_err());
        assert!(GateSpec::new((0, 1), 1.0, 0).is_err());
        assert!(GateSpec::new((0, 1), -1.0, 3).is_err());
        assert_eq!(GateSpec::new((0, 2), 1.0, 4).unwrap().parity(), Parity::Even);
    }
}
