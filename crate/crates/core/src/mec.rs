//! Mode Engineering Condition: `ω_p τ / 4 = k_p π` for positive integers `k_p`.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::mode_solver::{radial_mode_spectrum, ModeError, ModeSpectrum, TrapConfig};
use crate::optimize::{golden_section, nelder_mead, NelderMeadOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MecError {
    #[error("invalid gate-time search: {0}")]
    InvalidSearch(String),
    #[error("knob out of bounds: {0}")]
    KnobOutOfBounds(String),
    #[error("target refers to mode {mode} but the chain has {n_modes} modes")]
    UnknownMode { mode: usize, n_modes: usize },
    #[error(transparent)]
    Mode(#[from] ModeError),
}

/// Gate time with the nearest integer mode indices and their deviations,
/// `ω_p τ / 4π = k_p + δk_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct MecAssignment {
    pub tau: f64,
    pub k: Vec<u32>,
    pub delta_k: Vec<f64>,
}

impl MecAssignment {
    pub fn max_abs_delta_k(&self) -> f64 {
        self.delta_k.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Mode whose index satisfies `2 k_p = l`, if any.
    pub fn resonant_mode(&self, l: u32) -> Option<usize> {
        self.k.iter().position(|&k| 2 * k == l)
    }
}

fn mode_index(omega: f64, tau: f64) -> (u32, f64) {
    let x = omega * tau / (4.0 * PI);
    let k = x.round().max(1.0);
    (k as u32, x - k)
}

/// `k_p = round(ω_p τ / 4π)` (at least 1) and `δk_p` the remainder.
pub fn analyze(spectrum: &ModeSpectrum, tau: f64) -> MecAssignment {
    analyze_frequencies(spectrum.frequencies(), tau)
}

pub fn analyze_frequencies(frequencies: &[f64], tau: f64) -> MecAssignment {
    let (k, delta_k) = frequencies.iter().map(|&w| mode_index(w, tau)).unzip();
    MecAssignment { tau, k, delta_k }
}

/// Down-weights modes by their coupling to one ion pair. Modes whose
/// normalised weight `|η_p^i η_p^j| / max_q |η_q^i η_q^j|` falls below
/// `threshold` are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairWeighting {
    pub pair: (usize, usize),
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateTimeSearch {
    pub tau_min: f64,
    pub tau_max: f64,
    pub max_abs_delta_k: f64,
    pub weighting: Option<PairWeighting>,
}

fn mode_weights(spectrum: &ModeSpectrum, weighting: Option<PairWeighting>) -> Vec<f64> {
    let n = spectrum.n_modes();
    let Some(w) = weighting else {
        return vec![1.0; n];
    };
    let (i, j) = w.pair;
    let raw: Vec<f64> = (0..n)
        .map(|p| (spectrum.eta(p, i) * spectrum.eta(p, j)).abs())
        .collect();
    let max = raw.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return vec![0.0; n];
    }
    raw.iter()
        .map(|r| {
            let x = r / max;
            if x < w.threshold {
                0.0
            } else {
                x
            }
        })
        .collect()
}

fn weighted_objective(frequencies: &[f64], weights: &[f64], tau: f64) -> f64 {
    frequencies
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(&f, &w)| w * mode_index(f, tau).1.abs())
        .fold(0.0, f64::max)
}

/// All local minimisers of `max_p w_p |δk_p|` in `[tau_min, tau_max]` whose
/// objective is within tolerance, sorted by `τ` ascending (so the first entry
/// is the fastest admissible gate).
///
/// The objective is sampled on a uniform grid of step `tau_max · 10⁻⁵`, each
/// grid-level local minimum is refined by golden-section search, and minima
/// closer than one grid step are merged.
pub fn find_gate_time(
    spectrum: &ModeSpectrum,
    search: &GateTimeSearch,
) -> Result<Vec<MecAssignment>, MecError> {
    let GateTimeSearch {
        tau_min,
        tau_max,
        max_abs_delta_k,
        weighting,
    } = *search;
    if !(tau_min > 0.0 && tau_max > tau_min && tau_max.is_finite()) {
        return Err(MecError::InvalidSearch(format!(
            "need 0 < tau_min < tau_max, got [{tau_min}, {tau_max}]"
        )));
    }
    if !(max_abs_delta_k > 0.0 && max_abs_delta_k < 0.5) {
        return Err(MecError::InvalidSearch(format!(
            "tolerance must lie in (0, 0.5), got {max_abs_delta_k}"
        )));
    }
    if let Some(w) = weighting {
        let n = spectrum.n_ions();
        if w.pair.0 >= n || w.pair.1 >= n || w.pair.0 == w.pair.1 {
            return Err(MecError::InvalidSearch(format!("bad pair {:?}", w.pair)));
        }
    }

    let weights = mode_weights(spectrum, weighting);
    let freqs = spectrum.frequencies();
    let step = tau_max * 1e-5;
    let n_grid = ((tau_max - tau_min) / step).ceil() as usize + 1;
    let grid: Vec<f64> = (0..n_grid)
        .map(|i| (tau_min + step * i as f64).min(tau_max))
        .collect();
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&t| weighted_objective(freqs, &weights, t))
        .collect();

    let mut minima: Vec<(f64, f64)> = (0..n_grid)
        .into_par_iter()
        .filter(|&i| {
            let left = if i == 0 { f64::INFINITY } else { values[i - 1] };
            let right = if i + 1 == n_grid {
                f64::INFINITY
            } else {
                values[i + 1]
            };
            values[i] <= left && values[i] < right
        })
        .map(|i| {
            let a = grid[i.saturating_sub(1)];
            let b = grid[(i + 1).min(n_grid - 1)];
            let (t, v) = golden_section(|t| weighted_objective(freqs, &weights, t), a, b, step * 1e-7);
            if v <= values[i] {
                (t, v)
            } else {
                (grid[i], values[i])
            }
        })
        .filter(|(_, v)| *v <= max_abs_delta_k)
        .collect();

    minima.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(minima.len());
    for m in minima {
        match merged.last_mut() {
            Some(last) if m.0 - last.0 < step => {
                if m.1 < last.1 {
                    *last = m;
                }
            }
            _ => merged.push(m),
        }
    }
    Ok(merged.into_iter().map(|(t, _)| analyze(spectrum, t)).collect())
}

/// Desired integer index `k` of mode `mode` at gate time `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MecTarget {
    pub mode: usize,
    pub k: u32,
    pub tau: f64,
}

/// Which trap knobs the inverse solver may move, each with `(lower, upper)`
/// bounds in the knob's own units. `None` keeps the knob fixed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KnobSet {
    pub axial_freq: Option<(f64, f64)>,
    pub radial_com_freq: Option<(f64, f64)>,
    pub quartic_coeff: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseSolution {
    pub config: TrapConfig,
    /// `Σ δk_p²` over the targets at the returned configuration.
    pub residual: f64,
    /// Set when the residual exceeds the requested threshold.
    pub flagged: bool,
}

#[derive(Clone, Copy)]
enum Knob {
    Axial,
    Radial,
    Quartic,
}

impl Knob {
    fn get(self, c: &TrapConfig) -> f64 {
        match self {
            Knob::Axial => c.axial_freq,
            Knob::Radial => c.radial_com_freq,
            Knob::Quartic => c.quartic_coeff,
        }
    }

    fn set(self, c: &mut TrapConfig, v: f64) {
        match self {
            Knob::Axial => c.axial_freq = v,
            Knob::Radial => c.radial_com_freq = v,
            Knob::Quartic => c.quartic_coeff = v,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Knob::Axial => "axial_freq",
            Knob::Radial => "radial_com_freq",
            Knob::Quartic => "quartic_coeff",
        }
    }
}

fn target_residual(config: &TrapConfig, targets: &[MecTarget]) -> Result<f64, ModeError> {
    let s = radial_mode_spectrum(config)?;
    Ok(targets
        .iter()
        .map(|t| {
            let dk = s.frequency(t.mode) * t.tau / (4.0 * PI) - t.k as f64;
            dk * dk
        })
        .sum())
}

/// Tunes the free knobs of `initial` so the radial spectrum meets the targets,
/// minimising `Σ δk_p²` with Nelder–Mead. Configurations outside the knob
/// bounds or without a stable linear chain are infeasible for the search, so
/// the returned configuration always validates.
pub fn inverse_engineer(
    initial: &TrapConfig,
    targets: &[MecTarget],
    knobs: &KnobSet,
    residual_threshold: f64,
) -> Result<InverseSolution, MecError> {
    initial.validate()?;
    if targets.is_empty() {
        return Ok(InverseSolution {
            config: initial.clone(),
            residual: 0.0,
            flagged: false,
        });
    }
    for t in targets {
        if t.mode >= initial.n_ions {
            return Err(MecError::UnknownMode {
                mode: t.mode,
                n_modes: initial.n_ions,
            });
        }
    }

    let free: Vec<(Knob, (f64, f64))> = [
        (Knob::Axial, knobs.axial_freq),
        (Knob::Radial, knobs.radial_com_freq),
        (Knob::Quartic, knobs.quartic_coeff),
    ]
    .into_iter()
    .filter_map(|(k, b)| b.map(|b| (k, b)))
    .collect();

    for &(knob, (lo, hi)) in &free {
        let v = knob.get(initial);
        if !(lo <= v && v <= hi) {
            return Err(MecError::KnobOutOfBounds(format!(
                "initial {} = {v} outside [{lo}, {hi}]",
                knob.name()
            )));
        }
    }

    // Frequencies are searched relative to their starting value; the quartic
    // knob is searched on an absolute scale.
    let scale: Vec<f64> = free
        .iter()
        .map(|&(k, _)| match k {
            Knob::Quartic => 1.0,
            _ => k.get(initial),
        })
        .collect();
    let config_at = |x: &[f64]| -> Option<TrapConfig> {
        let mut c = initial.clone();
        for ((&(knob, (lo, hi)), s), xi) in free.iter().zip(&scale).zip(x) {
            let v = xi * s;
            if !(lo..=hi).contains(&v) {
                return None;
            }
            knob.set(&mut c, v);
        }
        c.validate().ok().map(|_| c)
    };
    let objective = |x: &[f64]| -> f64 {
        config_at(x)
            .and_then(|c| target_residual(&c, targets).ok())
            .unwrap_or(f64::INFINITY)
    };

    let x0: Vec<f64> = free
        .iter()
        .zip(&scale)
        .map(|(&(k, _), s)| k.get(initial) / s)
        .collect();
    let steps: Vec<f64> = free
        .iter()
        .map(|&(k, _)| match k {
            Knob::Quartic => 0.01,
            _ => 1e-3,
        })
        .collect();
    let opts = NelderMeadOptions {
        max_evaluations: 6000,
        f_tol: 1e-20,
        x_tol: 1e-13,
    };
    let mut best = nelder_mead(objective, &x0, &steps, opts);
    // restarts shake the simplex out of premature collapse
    for _ in 0..3 {
        let small: Vec<f64> = steps.iter().map(|s| s * 0.1).collect();
        let next = nelder_mead(objective, &best.x, &small, opts);
        if next.value < best.value {
            best = next;
        } else {
            break;
        }
    }

    let (config, residual) = match config_at(&best.x) {
        Some(c) if best.value.is_finite() => (c, best.value),
        _ => (initial.clone(), target_residual(initial, targets)?),
    };
    Ok(InverseSolution {
        config,
        residual,
        flagged: residual > residual_threshold,
    })
}
