//! Composite Gauss–Legendre evaluation of the gate integrals directly from
//! the pulse shape. Panels are aligned with `τ/2` so that the cusp of an even
//! pulse always sits on a panel edge.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use num_complex::Complex64;

use super::{check_pair, AlphaMethod, AlphaReport, EvalError};
use crate::mode_solver::ModeSpectrum;
use crate::pulse::{GateSpec, PulseWaveform};
use crate::quadrature::{composite_complex, panel_edges, GaussLegendre};

const RULE_ORDER: usize = 10;
const PANELS_PER_PERIOD: f64 = 8.0;
const SAMPLES_PER_PERIOD: f64 = 20.0;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(RULE_ORDER))
}

fn fastest(tau: f64, l: u32, frequencies: &[f64]) -> f64 {
    let tone = TAU * l as f64 / tau;
    frequencies.iter().fold(tone, |m, w| m.max(w.abs()))
}

fn required_intervals(wf: &PulseWaveform, frequencies: &[f64]) -> usize {
    let periods = fastest(wf.tau, wf.l, frequencies) * wf.tau / TAU;
    (SAMPLES_PER_PERIOD * periods).ceil() as usize
}

/// Even interval count giving at least 24 samples per period of the fastest
/// of the tone and the (effective) mode frequencies.
pub fn oracle_sample_count(gate: &GateSpec, spectrum: &ModeSpectrum) -> usize {
    let periods = fastest(gate.tau, gate.l, spectrum.frequencies()) * gate.tau / TAU;
    ((24.0 * periods).ceil() as usize).next_multiple_of(2).max(2)
}

fn check_sampling(wf: &PulseWaveform, frequencies: &[f64]) -> Result<(), EvalError> {
    let required = required_intervals(wf, frequencies);
    if wf.intervals() < required {
        return Err(EvalError::Undersampled {
            samples: wf.intervals(),
            required,
        });
    }
    Ok(())
}

/// Panel edges on `[0, τ]` with an edge at `τ/2`; the panel width resolves
/// the sum frequency `tone + ω` of every integrand product.
fn edges_for(tau: f64, l: u32, omega: f64) -> Vec<f64> {
    let f_sum = (TAU * l as f64 / tau + omega.abs()) / TAU;
    let per_half = (PANELS_PER_PERIOD * f_sum * tau / 2.0).ceil().max(1.0) as usize;
    let mut edges = panel_edges(0.0, 0.5 * tau, per_half);
    let second = panel_edges(0.5 * tau, tau, per_half);
    edges.extend_from_slice(&second[1..]);
    edges
}

/// `∫₀^T g(t) e^{i(ωt + φ)} dt` with `T = τ` or `T = τ/2` when `half_only`.
fn integral_of(wf: &PulseWaveform, omega: f64, phi: f64, half_only: bool) -> Complex64 {
    let mut edges = edges_for(wf.tau, wf.l, omega);
    if half_only {
        let mid = (edges.len() - 1) / 2;
        edges.truncate(mid + 1);
    }
    composite_complex(rule(), &edges, |t| {
        Complex64::from_polar(wf.value_at(t), omega * t + phi)
    })
}

/// `∫₀^τ g(t) e^{i(ωt + φ)} dt`, the phase-space displacement integral of one
/// mode.
pub fn displacement_integral(wf: &PulseWaveform, omega: f64, phi: f64) -> Complex64 {
    integral_of(wf, omega, phi, false)
}

/// `∫₀^τ dt₂ ∫₀^{t₂} dt₁ g(t₂) g(t₁) sin ω(t₂ − t₁)`.
///
/// The kernel separates as `sin ωt₂ cos ωt₁ − cos ωt₂ sin ωt₁`, so the inner
/// integral is a pair of running integrals `C(t)`, `S(t)`. They are carried
/// across panel edges and completed inside each panel by a Gauss–Legendre rule
/// on `[a, t]` for every outer node `t`.
fn ordered_double_integral(wf: &PulseWaveform, omega: f64) -> f64 {
    let rule = rule();
    let edges = edges_for(wf.tau, wf.l, omega);
    let mut run_c = 0.0;
    let mut run_s = 0.0;
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        for (t, wt) in rule.mapped(a, b) {
            let (mut c, mut s) = (run_c, run_s);
            for (t1, w1) in rule.mapped(a, t) {
                let g1 = wf.value_at(t1) * w1;
                let (sn, cs) = (omega * t1).sin_cos();
                c += g1 * cs;
                s += g1 * sn;
            }
            let (sn, cs) = (omega * t).sin_cos();
            total += wt * wf.value_at(t) * (sn * c - cs * s);
        }
        for (t1, w1) in rule.mapped(a, b) {
            let g1 = wf.value_at(t1) * w1;
            let (sn, cs) = (omega * t1).sin_cos();
            run_c += g1 * cs;
            run_s += g1 * sn;
        }
    }
    total
}

/// Entangling accumulator `χ = Σ_p η_p^i η_p^j ∬_{t₁<t₂} g g sin ω_p(t₂ − t₁)`.
pub fn chi_numeric(
    wf: &PulseWaveform,
    spectrum: &ModeSpectrum,
    pair: (usize, usize),
) -> Result<f64, EvalError> {
    check_pair(pair, spectrum.n_ions())?;
    check_sampling(wf, spectrum.frequencies())?;
    if wf.omega == 0.0 {
        return Ok(0.0);
    }
    let (i, j) = pair;
    Ok((0..spectrum.n_modes())
        .map(|p| {
            let coupling = spectrum.eta(p, i) * spectrum.eta(p, j);
            if coupling == 0.0 {
                0.0
            } else {
                coupling * ordered_double_integral(wf, spectrum.frequency(p))
            }
        })
        .sum())
}

/// `α = (4/5) Σ_p (2n̄_p + 1)(η_p^i² + η_p^j²) |∫₀^τ g e^{i(ω_p t + φ_p)} dt|²`.
pub fn alpha_numeric(
    wf: &PulseWaveform,
    spectrum: &ModeSpectrum,
    pair: (usize, usize),
) -> Result<AlphaReport, EvalError> {
    check_pair(pair, spectrum.n_ions())?;
    check_sampling(wf, spectrum.frequencies())?;
    let (i, j) = pair;
    let per_mode = (0..spectrum.n_modes())
        .map(|p| {
            let eta2 = spectrum.eta(p, i).powi(2) + spectrum.eta(p, j).powi(2);
            let integral = displacement_integral(wf, spectrum.frequency(p), spectrum.phase()[p]);
            0.8 * spectrum.thermal_factor(p) * eta2 * integral.norm_sqr()
        })
        .collect();
    Ok(AlphaReport::from_modes(per_mode, AlphaMethod::Numeric))
}

/// Full-interval displacement integral and its half-interval factorisation
/// `(1 − e^{2iπδk}) ∫₀^{τ/2} g e^{i(ωt + φ)} dt`, with
/// `δk = ωτ/4π − round(ωτ/4π)`.
pub fn phase_closure_factorization_check(wf: &PulseWaveform, omega: f64, phi: f64) -> (Complex64, Complex64) {
    let x = omega * wf.tau / (4.0 * PI);
    let dk = x - x.round();
    let lhs = integral_of(wf, omega, phi, false);
    let half = integral_of(wf, omega, phi, true);
    let factor = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, TAU * dk);
    (lhs, factor * half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode_solver::{measured_spectrum, Coupling};
    use crate::pulse::waveform;
    use nalgebra::DMatrix;

    fn single_mode(omega: f64) -> ModeSpectrum {
        let c = Coupling::default();
        let s = measured_spectrum(&[omega], &DMatrix::identity(1, 1), None, None, c).unwrap();
        s.scale_lamb_dicke(1.0 / c.lamb_dicke(1.0, omega))
    }

    #[test]
    fn double_integral_for_constant_drive() {
        // g ≡ G on [0, τ], ωτ = 4kπ: ∬ G² sin ω(t₂−t₁) = G²τ/ω.
        let tau = 1.0;
        let k = 3.0;
        let omega = 4.0 * PI * k / tau;
        let edges = panel_edges(0.0, tau, 200);
        let rule = rule();
        let g = 1.7;
        let (mut rc, mut rs, mut total) = (0.0, 0.0, 0.0);
        for w in edges.windows(2) {
            for (t, wt) in rule.mapped(w[0], w[1]) {
                let (mut c, mut s) = (rc, rs);
                for (t1, w1) in rule.mapped(w[0], t) {
                    c += g * w1 * (omega * t1).cos();
                    s += g * w1 * (omega * t1).sin();
                }
                total += wt * g * ((omega * t).sin() * c - (omega * t).cos() * s);
            }
            for (t1, w1) in rule.mapped(w[0], w[1]) {
                rc += g * w1 * (omega * t1).cos();
                rs += g * w1 * (omega * t1).sin();
            }
        }
        assert!((total - g * g * tau / omega).abs() < 1e-13, "{total}");
    }

    #[test]
    fn zero_drive_gives_zero_chi() {
        let c = Coupling::default();
        let b = crate::mode_solver::ideal_participation(2).unwrap();
        let s = measured_spectrum(&[4.0 * PI * 5.0, 4.0 * PI * 6.0], &b, None, None, c).unwrap();
        let g = GateSpec::new((0, 1), 1.0, 9).unwrap();
        let wf = waveform(&g, 1000).unwrap();
        assert_eq!(chi_numeric(&wf, &s, (0, 1)).unwrap(), 0.0);
        assert_eq!(alpha_numeric(&wf, &s, (0, 1)).unwrap().alpha, 0.0);
    }

    #[test]
    fn single_ion_spectrum_cannot_host_a_pair() {
        let s = single_mode(4.0 * PI * 5.0);
        let g = GateSpec::new((0, 1), 1.0, 9).unwrap().with_omega(1.0);
        let wf = waveform(&g, 1000).unwrap();
        assert!(chi_numeric(&wf, &s, (0, 1)).is_err());
    }

    #[test]
    fn undersampled_waveform_rejected() {
        let c = Coupling::default();
        let b = crate::mode_solver::ideal_participation(2).unwrap();
        let s = measured_spectrum(&[4.0 * PI * 30.0, 4.0 * PI * 31.0], &b, None, None, c).unwrap();
        let g = GateSpec::new((0, 1), 1.0, 61).unwrap().with_omega(1.0);
        let wf = waveform(&g, 200).unwrap();
        assert!(matches!(
            chi_numeric(&wf, &s, (0, 1)),
            Err(EvalError::Undersampled { .. })
        ));
        let ok = waveform(&g, oracle_sample_count(&g, &s)).unwrap();
        assert!(chi_numeric(&ok, &s, (0, 1)).is_ok());
    }

    #[test]
    fn factorization_factor_at_quarter() {
        let g = GateSpec::new((0, 1), 1.0, 7).unwrap().with_omega(1.0);
        let wf = waveform(&g, 2000).unwrap();
        let omega = 4.0 * PI * (3.0 + 0.25);
        let (lhs, rhs) = phase_closure_factorization_check(&wf, omega, 0.4);
        assert!((lhs - rhs).norm() < 1e-13);
        let half = integral_of(&wf, omega, 0.4, true);
        assert!((rhs.norm() / half.norm() - 2f64.sqrt()).abs() < 1e-12);
    }
}
