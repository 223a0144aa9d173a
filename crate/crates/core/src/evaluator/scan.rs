//! Robustness of phase-space closure against a common detuning offset.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::oracle::{chi_numeric, displacement_integral, oracle_sample_count};
use super::sim::{mode_drives, simulate_drives, SimOptions, TwoQubitState};
use super::{check_pair, EvalError};
use crate::mode_solver::ModeSpectrum;
use crate::pulse::{waveform, GateSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    /// Common offset δω (rad/s); modes are seen at `ω_p − δ_added − δω`.
    pub delta_omega: f64,
    /// Rabi frequency used at this offset (rad/s).
    pub omega_calibrated: f64,
    pub alpha: f64,
    pub odd_population: f64,
    /// `odd_population / omega_calibrated²`, zero when the drive is off.
    pub scaled_odd_population: f64,
    /// Recalibration or simulation failed at this offset.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
}

impl ScanResult {
    /// Log–log slope of `α` against `|δω|` over rows with
    /// `lo ≤ |δω| ≤ hi` and `α > 0`, pooling both signs of the offset.
    pub fn alpha_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| !r.flagged && r.alpha > 0.0)
            .filter(|r| (lo..=hi).contains(&r.delta_omega.abs()))
            .map(|r| (r.delta_omega.abs(), r.alpha))
            .collect();
        loglog_slope(&pts)
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn scan_row(
    gate: &GateSpec,
    spectrum: &ModeSpectrum,
    delta_omega: f64,
    recalibrate: bool,
    opts: &SimOptions,
) -> Result<ScanRow, EvalError> {
    let eff = spectrum.shifted(gate.added_detuning + delta_omega);
    let unit = gate.clone().with_omega(1.0);
    let wf = waveform(&unit, oracle_sample_count(&unit, &eff))?;
    let chi_unit = chi_numeric(&wf, &eff, gate.pair)?;
    let unit_integrals: Vec<Complex64> = (0..eff.n_modes())
        .map(|p| displacement_integral(&wf, eff.frequency(p), eff.phase()[p]))
        .collect();

    let mut flagged = false;
    let omega = if recalibrate {
        if chi_unit == 0.0 {
            flagged = true;
            gate.omega
        } else {
            (gate.target_chi / chi_unit.abs()).sqrt()
        }
    } else {
        gate.omega
    };

    let integrals: Vec<Complex64> = unit_integrals.iter().map(|i| i * omega).collect();
    let (i, j) = gate.pair;
    let alpha: f64 = (0..eff.n_modes())
        .map(|p| {
            let eta2 = eff.eta(p, i).powi(2) + eff.eta(p, j).powi(2);
            0.8 * eff.thermal_factor(p) * eta2 * integrals[p].norm_sqr()
        })
        .sum();

    let drives = mode_drives(&eff, gate.pair, &integrals);
    let odd_population =
        match simulate_drives(&drives, chi_unit * omega * omega, opts, &TwoQubitState::ground()) {
            Ok(r) => r.odd_population(),
            Err(_) => {
                flagged = true;
                f64::NAN
            }
        };
    let scaled_odd_population = if omega > 0.0 {
        odd_population / (omega * omega)
    } else {
        0.0
    };
    Ok(ScanRow {
        delta_omega,
        omega_calibrated: omega,
        alpha,
        odd_population,
        scaled_odd_population,
        flagged,
    })
}

/// [`detuning_scan_with`] using the default simulator options.
pub fn detuning_scan(
    gate: &GateSpec,
    spectrum: &ModeSpectrum,
    offsets: &[f64],
    recalibrate: bool,
) -> Result<ScanResult, EvalError> {
    detuning_scan_with(gate, spectrum, offsets, recalibrate, &SimOptions::default())
}

/// For each offset δω, shifts every mode detuning by δω (`δk_p → δk_p − δωτ/4π`),
/// optionally recalibrates Ω so that `|χ|` returns to the gate's target, and
/// records `α` together with the simulated odd population after the gate acts
/// on `|00⟩`. Rows are returned in offset order.
pub fn detuning_scan_with(
    gate: &GateSpec,
    spectrum: &ModeSpectrum,
    offsets: &[f64],
    recalibrate: bool,
    opts: &SimOptions,
) -> Result<ScanResult, EvalError> {
    gate.validate()?;
    check_pair(gate.pair, spectrum.n_ions())?;
    if let Some(bad) = offsets.iter().find(|o| !o.is_finite()) {
        return Err(EvalError::InvalidInput(format!("offset {bad} is not finite")));
    }
    let rows = offsets
        .par_iter()
        .map(|&d| scan_row(gate, spectrum, d, recalibrate, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScanResult { rows })
}

/// Offset δω equivalent to a uniform change `Δ(δk)` of every mode index.
pub fn offset_for_delta_k(delta_k: f64, tau: f64) -> f64 {
    -4.0 * PI * delta_k / tau
}
