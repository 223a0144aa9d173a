//! Two-qubit gate simulation in a truncated Fock space.
//!
//! With the interaction `H = Σ_p Σ_{m∈{i,j}} η_p^m g(t) σ_x^m (a_p† e^{i(ω_p t+φ_p)} + h.c.)`
//! the Magnus series terminates after two terms, and the propagator is
//! `U = Π_p D_p(β_p(Ŝ)) · exp(2iχ σ_x^i σ_x^j)` up to a global phase, with
//! `β_p(s) = −i(η_p^i s_i + η_p^j s_j) ∫₀^τ g e^{i(ω_p t+φ_p)} dt` for the
//! `σ_x` eigenvalues `s ∈ {±1}²`. Each mode's displacement is applied to its
//! (thermal) Fock state in a space truncated at `n_max`, the modes are traced
//! out and the spin state is analysed as in the experiment.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use nalgebra::{Matrix3, Matrix4, Vector3};
use num_complex::Complex64;

use super::oracle::{chi_numeric, displacement_integral, oracle_sample_count};
use super::{check_pair, EvalError};
use crate::mode_solver::ModeSpectrum;
use crate::pulse::{waveform, GateSpec};

const THERMAL_TAIL: f64 = 1e-6;
const MAX_LEAKAGE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Highest Fock state kept per mode.
    pub n_max: usize,
    /// Analysis phases on the uniform grid over `[0, 2π)`.
    pub phi_points: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            n_max: 10,
            phi_points: 24,
        }
    }
}

/// Two-qubit pure state in the computational basis, ordered
/// `|00⟩, |01⟩, |10⟩, |11⟩` with the first qubit the pair's first ion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState(pub [Complex64; 4]);

impl TwoQubitState {
    pub fn basis(first: u8, second: u8) -> Self {
        let mut a = [Complex64::new(0.0, 0.0); 4];
        a[2 * (first as usize & 1) + (second as usize & 1)] = Complex64::new(1.0, 0.0);
        Self(a)
    }

    pub fn ground() -> Self {
        Self::basis(0, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    /// `P00, P01, P10, P11`.
    pub populations: [f64; 4],
    pub even_population: f64,
    pub parity_curve: Vec<(f64, f64)>,
    pub contrast: f64,
    pub fidelity: f64,
    /// Probability lost to Fock truncation and the thermal tail.
    pub leakage: f64,
}

impl FidelityReport {
    pub fn odd_population(&self) -> f64 {
        self.populations[1] + self.populations[2]
    }
}

/// Bell-state fidelity from the even-state population and parity contrast.
pub fn fidelity_estimate(even_population: f64, contrast: f64) -> f64 {
    0.5 * (even_population + contrast)
}

/// `⟨m|D(β)|n⟩` for `m = 0..=n_max`.
///
/// `⟨m|D(β)|n⟩ = sqrt(n!/m!) β^{m−n} e^{−|β|²/2} L_n^{(m−n)}(|β|²)` for `m ≥ n`
/// and `sqrt(m!/n!) (−β*)^{n−m} e^{−|β|²/2} L_m^{(n−m)}(|β|²)` otherwise.
pub fn displacement_column(beta: Complex64, n: usize, n_max: usize) -> Vec<Complex64> {
    let x = beta.norm_sqr();
    let envelope = (-0.5 * x).exp();
    (0..=n_max)
        .map(|m| {
            let (lo, hi) = if m >= n { (n, m) } else { (m, n) };
            let ratio = (lo + 1..=hi).fold(1.0, |acc, q| acc / q as f64).sqrt();
            let lag = laguerre(lo, (hi - lo) as f64, x);
            let pow = if m >= n {
                beta.powu((m - n) as u32)
            } else {
                (-beta.conj()).powu((n - m) as u32)
            };
            pow * (ratio * envelope * lag)
        })
        .collect()
}

fn laguerre(k: usize, a: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for q in 1..k {
        let q = q as f64;
        let next = ((2.0 * q + 1.0 + a - x) * cur - (q + a) * prev) / (q + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn thermal_weights(nbar: f64, n_max: usize) -> Result<Vec<f64>, EvalError> {
    if nbar == 0.0 {
        return Ok(vec![1.0]);
    }
    let r = nbar / (nbar + 1.0);
    let mut w = Vec::new();
    let mut cumulative = 0.0;
    let mut p = 1.0 / (nbar + 1.0);
    for _ in 0..=n_max {
        w.push(p);
        cumulative += p;
        if cumulative >= 1.0 - THERMAL_TAIL {
            return Ok(w);
        }
        p *= r;
    }
    Err(EvalError::TruncationLeakage {
        leakage: 1.0 - cumulative,
        n_max,
    })
}

const BRANCHES: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

/// Spin-branch overlaps of one mode, `O[s][s'] = Tr[D(β_s) ρ_th D(β_{s'})†]`.
type Overlaps = [[Complex64; 4]; 4];

/// Per-mode inputs to the reduced spin state.
pub(crate) struct ModeDrive {
    pub eta_i: f64,
    pub eta_j: f64,
    pub integral: Complex64,
    pub nbar: f64,
}

impl ModeDrive {
    fn beta(&self, s: (f64, f64)) -> Complex64 {
        Complex64::new(0.0, -(self.eta_i * s.0 + self.eta_j * s.1)) * self.integral
    }

    fn fock_overlaps(&self, n_max: usize) -> Result<Overlaps, EvalError> {
        let weights = thermal_weights(self.nbar, n_max)?;
        let mut o = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (n, w) in weights.iter().enumerate() {
            let cols: Vec<Vec<Complex64>> = BRANCHES
                .iter()
                .map(|&s| displacement_column(self.beta(s), n, n_max))
                .collect();
            for a in 0..4 {
                for b in 0..4 {
                    let inner: Complex64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y.conj()).sum();
                    o[a][b] += inner * *w;
                }
            }
        }
        Ok(o)
    }

    /// Untruncated thermal overlaps
    /// `e^{i Im(β_{s'}* β_s)} exp(−(n̄ + ½)|β_s − β_{s'}|²)`.
    fn exact_overlaps(&self) -> Overlaps {
        let mut o = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (a, &sa) in BRANCHES.iter().enumerate() {
            for (b, &sb) in BRANCHES.iter().enumerate() {
                let (ba, bb) = (self.beta(sa), self.beta(sb));
                let phase = (bb.conj() * ba).im;
                let decay = -(self.nbar + 0.5) * (ba - bb).norm_sqr();
                o[a][b] = Complex64::from_polar(decay.exp(), phase);
            }
        }
        o
    }
}

/// `⟨b|s⟩` for computational `b ∈ {0,1}` and `σ_x` eigenvalue `s`.
fn x_to_z(b: usize, s: f64) -> f64 {
    if b == 1 && s < 0.0 {
        -FRAC_1_SQRT_2
    } else {
        FRAC_1_SQRT_2
    }
}

fn branch_to_z(bits: usize, s: (f64, f64)) -> f64 {
    x_to_z(bits >> 1, s.0) * x_to_z(bits & 1, s.1)
}

/// Reduced spin density matrix in the computational basis.
fn reduced_state(initial: &TwoQubitState, chi: f64, overlaps: &[Overlaps]) -> Matrix4<Complex64> {
    let amp: Vec<Complex64> = BRANCHES
        .iter()
        .map(|&s| {
            let c: Complex64 = (0..4).map(|b| initial.0[b] * branch_to_z(b, s)).sum();
            c * Complex64::from_polar(1.0, 2.0 * chi * s.0 * s.1)
        })
        .collect();
    let mut rho_x = Matrix4::<Complex64>::zeros();
    for a in 0..4 {
        for b in 0..4 {
            let motion: Complex64 = overlaps.iter().map(|o| o[a][b]).product();
            rho_x[(a, b)] = amp[a] * amp[b].conj() * motion;
        }
    }
    let basis = Matrix4::<Complex64>::from_fn(|z, x| Complex64::new(branch_to_z(z, BRANCHES[x]), 0.0));
    basis * rho_x * basis.adjoint()
}

fn analysis_rotation(phi: f64) -> Matrix4<Complex64> {
    let c = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let off = |sign: f64| Complex64::new(0.0, -FRAC_1_SQRT_2) * Complex64::from_polar(1.0, sign * phi);
    let r = nalgebra::Matrix2::new(c, off(-1.0), off(1.0), c);
    r.kronecker(&r)
}

fn parity(rho: &Matrix4<Complex64>) -> f64 {
    rho[(0, 0)].re - rho[(1, 1)].re - rho[(2, 2)].re + rho[(3, 3)].re
}

/// Least-squares fit of `a + b cos 2φ + c sin 2φ`; returns `sqrt(b² + c²)`.
fn parity_contrast(curve: &[(f64, f64)]) -> f64 {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for &(phi, p) in curve {
        let row = Vector3::new(1.0, (2.0 * phi).cos(), (2.0 * phi).sin());
        ata += row * row.transpose();
        atb += row * p;
    }
    match ata.lu().solve(&atb) {
        Some(x) => x[1].hypot(x[2]),
        None => 0.0,
    }
}

fn report_from_state(rho: Matrix4<Complex64>, opts: &SimOptions) -> FidelityReport {
    let populations = [rho[(0, 0)].re, rho[(1, 1)].re, rho[(2, 2)].re, rho[(3, 3)].re];
    let trace: f64 = populations.iter().sum();
    let even_population = populations[0] + populations[3];
    let parity_curve: Vec<(f64, f64)> = (0..opts.phi_points)
        .map(|k| {
            let phi = TAU * k as f64 / opts.phi_points as f64;
            let r = analysis_rotation(phi);
            (phi, parity(&(r * rho * r.adjoint())))
        })
        .collect();
    let contrast = parity_contrast(&parity_curve);
    FidelityReport {
        populations,
        even_population,
        contrast,
        fidelity: fidelity_estimate(even_population, contrast),
        parity_curve,
        leakage: (1.0 - trace).max(0.0),
    }
}

fn validate_options(opts: &SimOptions) -> Result<(), EvalError> {
    if opts.n_max < 5 {
        return Err(EvalError::InvalidInput(format!(
            "n_max must be ≥ 5, got {}",
            opts.n_max
        )));
    }
    if opts.phi_points < 3 {
        return Err(EvalError::InvalidInput("need at least 3 analysis phases".into()));
    }
    Ok(())
}

pub(crate) fn simulate_drives(
    drives: &[ModeDrive],
    chi: f64,
    opts: &SimOptions,
    initial: &TwoQubitState,
) -> Result<FidelityReport, EvalError> {
    validate_options(opts)?;
    let overlaps = drives
        .iter()
        .map(|d| d.fock_overlaps(opts.n_max))
        .collect::<Result<Vec<_>, _>>()?;
    let report = report_from_state(reduced_state(initial, chi, &overlaps), opts);
    if report.leakage > MAX_LEAKAGE {
        return Err(EvalError::TruncationLeakage {
            leakage: report.leakage,
            n_max: opts.n_max,
        });
    }
    Ok(report)
}

/// Odd-state population with untruncated coherent-state overlaps. It does not
/// depend on `χ`, only on the per-mode displacements.
pub(crate) fn odd_population_exact(drives: &[ModeDrive], initial: &TwoQubitState) -> f64 {
    let overlaps: Vec<Overlaps> = drives.iter().map(ModeDrive::exact_overlaps).collect();
    let rho = reduced_state(initial, PI / 8.0, &overlaps);
    rho[(1, 1)].re + rho[(2, 2)].re
}

pub(crate) fn mode_drives(
    spectrum: &ModeSpectrum,
    pair: (usize, usize),
    integrals: &[Complex64],
) -> Vec<ModeDrive> {
    (0..spectrum.n_modes())
        .map(|p| ModeDrive {
            eta_i: spectrum.eta(p, pair.0),
            eta_j: spectrum.eta(p, pair.1),
            integral: integrals[p],
            nbar: spectrum.nbar()[p],
        })
        .collect()
}

/// Runs the gate on `initial ⊗ thermal motion` and analyses the spin state:
/// populations, a parity scan over `opts.phi_points` analysis phases, the
/// fitted contrast and the fidelity estimate.
pub fn simulate_gate(
    gate: &GateSpec,
    spectrum: &ModeSpectrum,
    opts: &SimOptions,
    initial: &TwoQubitState,
) -> Result<FidelityReport, EvalError> {
    gate.validate()?;
    check_pair(gate.pair, spectrum.n_ions())?;
    validate_options(opts)?;
    let eff = gate.effective_spectrum(spectrum);
    let wf = waveform(gate, oracle_sample_count(gate, &eff))?;
    let chi = chi_numeric(&wf, &eff, gate.pair)?;
    let integrals: Vec<Complex64> = (0..eff.n_modes())
        .map(|p| displacement_integral(&wf, eff.frequency(p), eff.phase()[p]))
        .collect();
    simulate_drives(&mode_drives(&eff, gate.pair, &integrals), chi, opts, initial)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drive(eta_i: f64, eta_j: f64, integral: f64, nbar: f64) -> ModeDrive {
        ModeDrive {
            eta_i,
            eta_j,
            integral: Complex64::new(integral, 0.3 * integral),
            nbar,
        }
    }

    #[test]
    fn coherent_state_column() {
        let beta = Complex64::new(0.4, -0.2);
        let col = displacement_column(beta, 0, 12);
        let mut fact = 1.0;
        for (m, v) in col.iter().enumerate() {
            if m > 0 {
                fact *= m as f64;
            }
            let want = beta.powu(m as u32) * ((-0.5 * beta.norm_sqr()).exp() / fact.sqrt());
            assert!((v - want).norm() < 1e-15);
        }
    }

    #[test]
    fn fock_overlaps_match_closed_form() {
        for nbar in [0.0, 0.05, 0.3] {
            let d = drive(0.08, -0.05, 2.0, nbar);
            let fock = d.fock_overlaps(40).unwrap();
            let exact = d.exact_overlaps();
            for a in 0..4 {
                for b in 0..4 {
                    assert!((fock[a][b] - exact[a][b]).norm() < 2e-6, "nbar={nbar}");
                }
            }
        }
    }

    #[test]
    fn displacement_is_norm_preserving_when_untruncated() {
        let beta = Complex64::new(1.1, 0.7);
        for n in 0..4 {
            let norm: f64 = displacement_column(beta, n, 60)
                .iter()
                .map(|v| v.norm_sqr())
                .sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ideal_closure_gives_bell_state() {
        let drives = vec![drive(0.05, 0.05, 0.0, 0.0)];
        let r = simulate_drives(
            &drives,
            PI / 8.0,
            &SimOptions::default(),
            &TwoQubitState::ground(),
        )
        .unwrap();
        assert!((r.populations[0] - 0.5).abs() < 1e-14);
        assert!((r.populations[3] - 0.5).abs() < 1e-14);
        assert!((r.contrast - 1.0).abs() < 1e-12);
        assert!((r.fidelity - 1.0).abs() < 1e-12);
        // two full periods over [0, 2π)
        let sign_changes = r
            .parity_curve
            .windows(2)
            .filter(|w| w[0].1.signum() != w[1].1.signum())
            .count();
        assert!((3..=4).contains(&sign_changes), "{sign_changes}");
    }

    #[test]
    fn identity_gate() {
        let drives = vec![drive(0.05, 0.05, 0.0, 0.0)];
        let r = simulate_drives(&drives, 0.0, &SimOptions::default(), &TwoQubitState::ground()).unwrap();
        assert!((r.populations[0] - 1.0).abs() < 1e-14);
        assert!(r.contrast < 1e-12);
        assert!((r.fidelity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn odd_population_independent_of_chi_and_matches_truncated() {
        let drives = vec![drive(0.08, -0.05, 1.5, 0.0), drive(0.06, 0.06, 0.8, 0.0)];
        let init = TwoQubitState::ground();
        let exact = odd_population_exact(&drives, &init);
        for chi in [0.1, PI / 8.0, 0.3] {
            let r = simulate_drives(&drives, chi, &SimOptions::default(), &init).unwrap();
            assert!((r.odd_population() - exact).abs() < 1e-9, "chi={chi}");
        }
    }

    #[test]
    fn truncation_leakage_detected() {
        let drives = vec![drive(0.5, 0.5, 5.0, 0.0)];
        let r = simulate_drives(
            &drives,
            PI / 8.0,
            &SimOptions {
                n_max: 5,
                phi_points: 24,
            },
            &TwoQubitState::ground(),
        );
        assert!(matches!(r, Err(EvalError::TruncationLeakage { .. })));
        let hot = vec![drive(0.05, 0.05, 0.1, 5.0)];
        assert!(matches!(
            simulate_drives(&hot, PI / 8.0, &SimOptions::default(), &TwoQubitState::ground()),
            Err(EvalError::TruncationLeakage { .. })
        ));
    }

    #[test]
    fn small_n_max_rejected() {
        let drives = vec![drive(0.05, 0.05, 0.0, 0.0)];
        let r = simulate_drives(
            &drives,
            0.0,
            &SimOptions {
                n_max: 4,
                phi_points: 24,
            },
            &TwoQubitState::ground(),
        );
        assert!(matches!(r, Err(EvalError::InvalidInput(_))));
    }

    #[test]
    fn table_arithmetic() {
        assert!((fidelity_estimate(0.978, 0.958) - 0.968).abs() < 1e-12);
    }
}
