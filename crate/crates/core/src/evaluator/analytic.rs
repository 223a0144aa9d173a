//! Closed forms of the residual coupling for single-tone anti-periodic pulses.

use std::f64::consts::PI;

use super::{check_pair, AlphaMethod, AlphaReport, EvalError};
use crate::mec::MecAssignment;
use crate::mode_solver::ModeSpectrum;
use crate::pulse::GateSpec;

const EXPANSION_RANGE: f64 = 0.05;

/// `|∫₀^τ g e^{iωt} dt|²` for the single-tone pulse with `x = ωτ/4π`:
///
/// * odd `l`:  `(lΩτ/2π)² |(e^{4iπx} − 1) / (4x² − l²)|²`
/// * even `l`: `(lΩτ/2π)² |(e^{2iπx} − 1)² / (4x² − l²)|²`
///
/// Both are evaluated through `d = x − l/2` (`e^{4iπx} = e^{4iπd}` for any `l`,
/// `e^{2iπx} = e^{2iπd}` for even `l`) so the removable singularity at
/// `2x = l` is handled without cancellation. The second value reports an exact
/// resonance, where the limit is returned.
pub fn prime2_displacement_sq(x: f64, l: u32, omega: f64, tau: f64) -> (f64, bool) {
    let lf = l as f64;
    let d = x - 0.5 * lf;
    let sum = 2.0 * x + lf;
    let resonant = d == 0.0;
    // |N / (2d (2x + l))|
    let ratio = if l % 2 == 1 {
        // |e^{4iπd} − 1| = 2|sin 2πd|
        2.0 * PI * sinc(2.0 * PI * d) / sum
    } else {
        // |e^{2iπd} − 1|² = 4 sin²(πd)
        2.0 * PI * (PI * d).sin() * sinc(PI * d) / sum
    };
    let prefactor = lf * omega * tau / (2.0 * PI);
    ((prefactor * ratio).powi(2), resonant)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn effective_delta_k(gate: &GateSpec, mec: &MecAssignment) -> Vec<f64> {
    let shift = gate.added_detuning * gate.tau / (4.0 * PI);
    mec.delta_k.iter().map(|d| d - shift).collect()
}

fn check_consistent(gate: &GateSpec, mec: &MecAssignment, spectrum: &ModeSpectrum) -> Result<(), EvalError> {
    gate.validate()?;
    check_pair(gate.pair, spectrum.n_ions())?;
    if mec.k.len() != spectrum.n_modes() || mec.delta_k.len() != spectrum.n_modes() {
        return Err(EvalError::InvalidInput(format!(
            "assignment has {} modes, spectrum {}",
            mec.k.len(),
            spectrum.n_modes()
        )));
    }
    if (mec.tau - gate.tau).abs() > 1e-12 * gate.tau {
        return Err(EvalError::InvalidInput(format!(
            "assignment τ = {} differs from gate τ = {}",
            mec.tau, gate.tau
        )));
    }
    Ok(())
}

/// Closed-form `α` for the gate's parity with `coth` represented as `2n̄ + 1`.
/// The gate's added detuning lowers every `δk_p` by `δτ/4π`.
pub fn alpha_analytic(
    gate: &GateSpec,
    mec: &MecAssignment,
    spectrum: &ModeSpectrum,
) -> Result<AlphaReport, EvalError> {
    check_consistent(gate, mec, spectrum)?;
    let (i, j) = gate.pair;
    let dk = effective_delta_k(gate, mec);
    let mut resonant_modes = Vec::new();
    let per_mode = (0..spectrum.n_modes())
        .map(|p| {
            let x = mec.k[p] as f64 + dk[p];
            let (sq, resonant) = prime2_displacement_sq(x, gate.l, gate.omega, gate.tau);
            if resonant {
                resonant_modes.push(p);
            }
            let eta2 = spectrum.eta(p, i).powi(2) + spectrum.eta(p, j).powi(2);
            0.8 * spectrum.thermal_factor(p) * eta2 * sq
        })
        .collect();
    let mut report = AlphaReport::from_modes(per_mode, AlphaMethod::Analytic);
    report.resonant_modes = resonant_modes;
    Ok(report)
}

/// Leading small-`δk` behaviour of [`alpha_analytic`]:
///
/// * odd `l`: `(16/5) c_p l²Ω²τ² (η_i² + η_j²) δk² / (4k² − l²)²`
/// * even `l`: `α₀ + (16π²/5) c_p l²Ω²τ² (η_i² + η_j²) δk⁴ / (4k² − l²)²` over
///   non-resonant modes, with `α₀ = (π²/5) c_p Ω²τ² (η_i² + η_j²) δk²` from the
///   mode with `2k_p = l`, if any.
///
/// `c_p = 2n̄_p + 1`; bounding it by 2 gives the familiar `32/5` and `2π²/5`
/// prefactors.
pub fn alpha_expansion(
    gate: &GateSpec,
    mec: &MecAssignment,
    spectrum: &ModeSpectrum,
) -> Result<AlphaReport, EvalError> {
    check_consistent(gate, mec, spectrum)?;
    let (i, j) = gate.pair;
    let dk = effective_delta_k(gate, mec);
    let l = gate.l as f64;
    let drive = gate.omega * gate.omega * gate.tau * gate.tau;
    let odd = gate.l % 2 == 1;
    let mut resonant_modes = Vec::new();
    let per_mode = (0..spectrum.n_modes())
        .map(|p| {
            let eta2 = spectrum.eta(p, i).powi(2) + spectrum.eta(p, j).powi(2);
            let c = spectrum.thermal_factor(p);
            let k = mec.k[p] as f64;
            let d = dk[p];
            if odd {
                16.0 / 5.0 * c * l * l * drive * eta2 * d * d / (4.0 * k * k - l * l).powi(2)
            } else if 2 * mec.k[p] == gate.l {
                resonant_modes.push(p);
                PI * PI / 5.0 * c * drive * eta2 * d * d
            } else {
                16.0 * PI * PI / 5.0 * c * l * l * drive * eta2 * d.powi(4) / (4.0 * k * k - l * l).powi(2)
            }
        })
        .collect();
    let mut report = AlphaReport::from_modes(per_mode, AlphaMethod::Expansion);
    report.resonant_modes = resonant_modes;
    report.out_of_range = dk.iter().any(|d| d.abs() > EXPANSION_RANGE);
    Ok(report)
}
