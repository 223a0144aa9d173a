//! Equilibrium positions, radial normal modes and Lamb–Dicke parameters of a
//! linear ion chain.
//!
//! Positions are dimensionless, in units of the length scale
//! `ℓ = (e² / 4πε₀ M ω_z²)^{1/3}`; the axial potential is
//! `V(u) = Σ u²/2 + q·u⁴ + Σ_{i<j} 1/|u_i − u_j|` with `q` the quartic knob.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::units::{AMU, DEFAULT_RAMAN_WAVELENGTH, HBAR, YB171_MASS_AMU};

const ORTHONORMAL_TOL: f64 = 1e-9;
const EQUILIBRIUM_TOL: f64 = 1e-13;
const MAX_NEWTON_ITERATIONS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModeError {
    #[error("invalid trap configuration: {0}")]
    InvalidConfig(String),
    #[error("equilibrium not found after {iterations} iterations (residual {residual:e})")]
    EquilibriumNotFound { iterations: usize, residual: f64 },
    #[error("chain not linear: axial equilibrium is not a stable minimum")]
    ChainNotLinear,
    #[error("radial instability: mode {mode} has squared frequency {eigenvalue:e} (in ω_z² units)")]
    RadialInstability { mode: usize, eigenvalue: f64 },
    #[error("participation matrix not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
}

/// Ion species and beam geometry; together they fix the Lamb–Dicke scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    /// Ion mass (kg).
    pub ion_mass: f64,
    /// Effective wave-vector difference Δk of the Raman beams (rad/m).
    pub raman_wavevector_diff: f64,
}

impl Default for Coupling {
    fn default() -> Self {
        Self {
            ion_mass: YB171_MASS_AMU * AMU,
            raman_wavevector_diff: 2.0 * std::f64::consts::TAU / DEFAULT_RAMAN_WAVELENGTH,
        }
    }
}

impl Coupling {
    /// `η = b · Δk · sqrt(ħ / 2Mω)`.
    pub fn lamb_dicke(&self, participation: f64, omega: f64) -> f64 {
        participation * self.raman_wavevector_diff * (HBAR / (2.0 * self.ion_mass * omega)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrapConfig {
    pub n_ions: usize,
    /// Axial trap frequency ω_z (rad/s).
    pub axial_freq: f64,
    /// Radial centre-of-mass frequency ω_r (rad/s).
    pub radial_com_freq: f64,
    /// Dimensionless quartic correction `q` of the axial potential.
    pub quartic_coeff: f64,
    /// Ion mass (kg).
    pub ion_mass: f64,
    /// Raman Δk (rad/m).
    pub raman_wavevector_diff: f64,
}

impl TrapConfig {
    /// Harmonic trap with the default ion species and beam geometry.
    pub fn new(n_ions: usize, axial_freq: f64, radial_com_freq: f64) -> Self {
        let c = Coupling::default();
        Self {
            n_ions,
            axial_freq,
            radial_com_freq,
            quartic_coeff: 0.0,
            ion_mass: c.ion_mass,
            raman_wavevector_diff: c.raman_wavevector_diff,
        }
    }

    pub fn with_quartic(mut self, q: f64) -> Self {
        self.quartic_coeff = q;
        self
    }

    pub fn coupling(&self) -> Coupling {
        Coupling {
            ion_mass: self.ion_mass,
            raman_wavevector_diff: self.raman_wavevector_diff,
        }
    }

    pub fn validate(&self) -> Result<(), ModeError> {
        let bad = |m: &str| Err(ModeError::InvalidConfig(m.to_string()));
        if self.n_ions < 2 {
            return bad("n_ions must be at least 2");
        }
        for (name, v) in [
            ("axial_freq", self.axial_freq),
            ("radial_com_freq", self.radial_com_freq),
            ("ion_mass", self.ion_mass),
            ("raman_wavevector_diff", self.raman_wavevector_diff),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModeError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !self.quartic_coeff.is_finite() {
            return bad("quartic_coeff must be finite");
        }
        if self.radial_com_freq <= self.axial_freq {
            return bad("radial_com_freq must exceed axial_freq for a linear chain");
        }
        Ok(())
    }
}

/// Radial mode frequencies with their participation vectors and Lamb–Dicke
/// parameters. Mode `p` indexes rows, ion `i` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    frequencies: Vec<f64>,
    participation: DMatrix<f64>,
    lamb_dicke: DMatrix<f64>,
    nbar: Vec<f64>,
    phase: Vec<f64>,
}

impl ModeSpectrum {
    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    pub fn n_ions(&self) -> usize {
        self.participation.ncols()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn frequency(&self, p: usize) -> f64 {
        self.frequencies[p]
    }

    pub fn participation(&self) -> &DMatrix<f64> {
        &self.participation
    }

    pub fn lamb_dicke(&self) -> &DMatrix<f64> {
        &self.lamb_dicke
    }

    /// η_p^i
    pub fn eta(&self, p: usize, i: usize) -> f64 {
        self.lamb_dicke[(p, i)]
    }

    pub fn nbar(&self) -> &[f64] {
        &self.nbar
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    /// `coth(ħω_p / 2k_B T_p)` represented as `2n̄_p + 1`.
    pub fn thermal_factor(&self, p: usize) -> f64 {
        2.0 * self.nbar[p] + 1.0
    }

    /// Same participations and Lamb–Dicke parameters, new frequencies.
    ///
    /// This is how detuning offsets and fitted frequencies are applied: the
    /// coupling strengths stay at their calibrated values.
    pub fn with_frequencies(&self, frequencies: Vec<f64>) -> Self {
        assert_eq!(frequencies.len(), self.n_modes());
        Self {
            frequencies,
            ..self.clone()
        }
    }

    /// All frequencies lowered by `delta` (rad/s), i.e. effective detunings
    /// `ω_p − δ`.
    pub fn shifted(&self, delta: f64) -> Self {
        self.with_frequencies(self.frequencies.iter().map(|w| w - delta).collect())
    }

    pub fn with_nbar(mut self, nbar: Vec<f64>) -> Result<Self, ModeError> {
        check_len("nbar", nbar.len(), self.n_modes())?;
        if nbar.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            return Err(ModeError::InvalidSpectrum("nbar must be non-negative".into()));
        }
        self.nbar = nbar;
        Ok(self)
    }

    pub fn with_phase(mut self, phase: Vec<f64>) -> Result<Self, ModeError> {
        check_len("phase", phase.len(), self.n_modes())?;
        self.phase = phase;
        Ok(self)
    }

    /// Multiplies every Lamb–Dicke parameter by `factor`.
    pub fn scale_lamb_dicke(mut self, factor: f64) -> Self {
        self.lamb_dicke *= factor;
        self
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<(), ModeError> {
    if got != want {
        return Err(ModeError::InvalidSpectrum(format!(
            "{what} has {got} entries, expected {want}"
        )));
    }
    Ok(())
}

fn axial_gradient(u: &[f64], q: f64) -> DVector<f64> {
    let n = u.len();
    DVector::from_fn(n, |i, _| {
        let mut g = u[i] + 4.0 * q * u[i].powi(3);
        for j in 0..n {
            if j != i {
                let d = u[i] - u[j];
                g -= d.signum() / (d * d);
            }
        }
        g
    })
}

fn axial_hessian(u: &[f64], q: f64) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = 1.0 + 12.0 * q * u[i] * u[i];
        for j in 0..n {
            if j != i {
                let c = 2.0 / (u[i] - u[j]).abs().powi(3);
                h[(i, i)] += c;
                h[(i, j)] = -c;
            }
        }
    }
    h
}

fn is_strictly_increasing(u: &[f64]) -> bool {
    u.windows(2).all(|w| w[1] > w[0])
}

/// Dimensionless equilibrium positions, sorted ascending.
///
/// Damped Newton iteration from an equally spaced guess; the step is halved
/// until the residual norm decreases and the ordering is preserved.
pub fn equilibrium_positions(config: &TrapConfig) -> Result<Vec<f64>, ModeError> {
    config.validate()?;
    let n = config.n_ions;
    let q = config.quartic_coeff;
    let spacing = 2.0 * (n as f64).powf(-0.57);
    let mut u: Vec<f64> = (0..n)
        .map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * spacing)
        .collect();

    let mut grad = axial_gradient(&u, q);
    let mut iterations = 0;
    while grad.amax() > EQUILIBRIUM_TOL {
        if iterations >= MAX_NEWTON_ITERATIONS {
            return Err(ModeError::EquilibriumNotFound {
                iterations,
                residual: grad.amax(),
            });
        }
        iterations += 1;
        let h = axial_hessian(&u, q);
        let step = h.lu().solve(&grad).ok_or(ModeError::EquilibriumNotFound {
            iterations,
            residual: grad.amax(),
        })?;
        let norm = grad.norm();
        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x - damping * s).collect();
            if is_strictly_increasing(&trial) {
                let g = axial_gradient(&trial, q);
                if g.norm() < norm || damping < 1e-6 {
                    u = trial;
                    grad = g;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-12 {
                return Err(ModeError::EquilibriumNotFound {
                    iterations,
                    residual: grad.amax(),
                });
            }
        }
    }

    if axial_hessian(&u, q).cholesky().is_none() {
        return Err(ModeError::ChainNotLinear);
    }
    Ok(u)
}

/// Radial Hessian in units of ω_z²:
/// `K_ii = (ω_r/ω_z)² − Σ_m 1/|u_i − u_m|³`, `K_ij = 1/|u_i − u_j|³`.
fn radial_hessian(u: &[f64], ratio_sq: f64) -> DMatrix<f64> {
    let n = u.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = ratio_sq;
        for j in 0..n {
            if j != i {
                let c = 1.0 / (u[i] - u[j]).abs().powi(3);
                k[(i, i)] -= c;
                k[(i, j)] = c;
            }
        }
    }
    k
}

/// Eigen-decomposes a symmetric matrix, returning eigenvalues ascending and
/// eigenvectors as rows with the first non-negligible component positive.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    let mut rows = DMatrix::zeros(n, n);
    for (p, &c) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(c);
        let sign = v
            .iter()
            .find(|x| x.abs() > 1e-9)
            .map(|x| x.signum())
            .unwrap_or(1.0);
        for i in 0..n {
            rows[(p, i)] = sign * v[i];
        }
    }
    (values, rows)
}

/// Radial normal modes of the chain, lowest (zig-zag) to highest (COM).
pub fn radial_mode_spectrum(config: &TrapConfig) -> Result<ModeSpectrum, ModeError> {
    let u = equilibrium_positions(config)?;
    let ratio = config.radial_com_freq / config.axial_freq;
    let (values, participation) = sorted_eigen(radial_hessian(&u, ratio * ratio));
    if let Some((mode, &eigenvalue)) = values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(ModeError::RadialInstability { mode, eigenvalue });
    }
    let frequencies = values.iter().map(|v| config.axial_freq * v.sqrt()).collect();
    build_spectrum(frequencies, participation, config.coupling())
}

/// Participation vectors of a harmonic chain of `n_ions`. They depend only on
/// the equilibrium positions, not on the radial-to-axial frequency ratio.
pub fn ideal_participation(n_ions: usize) -> Result<DMatrix<f64>, ModeError> {
    if n_ions == 1 {
        return Ok(DMatrix::identity(1, 1));
    }
    let cfg = TrapConfig::new(n_ions, 1.0, 10.0);
    let u = equilibrium_positions(&cfg)?;
    Ok(sorted_eigen(radial_hessian(&u, 100.0)).1)
}

fn max_orthonormal_deviation(b: &DMatrix<f64>) -> f64 {
    let gram = b * b.transpose();
    (gram - DMatrix::identity(b.nrows(), b.nrows())).amax()
}

fn build_spectrum(
    frequencies: Vec<f64>,
    participation: DMatrix<f64>,
    coupling: Coupling,
) -> Result<ModeSpectrum, ModeError> {
    let n = frequencies.len();
    let lamb_dicke = DMatrix::from_fn(n, participation.ncols(), |p, i| {
        coupling.lamb_dicke(participation[(p, i)], frequencies[p])
    });
    Ok(ModeSpectrum {
        frequencies,
        participation,
        lamb_dicke,
        nbar: vec![0.0; n],
        phase: vec![0.0; n],
    })
}

/// Spectrum from externally measured frequencies (rad/s) and a participation
/// matrix (rows are modes). `nbar` and `phase` default to zero.
pub fn measured_spectrum(
    frequencies: &[f64],
    participation: &DMatrix<f64>,
    nbar: Option<&[f64]>,
    phase: Option<&[f64]>,
    coupling: Coupling,
) -> Result<ModeSpectrum, ModeError> {
    let n = frequencies.len();
    if n == 0 {
        return Err(ModeError::InvalidSpectrum("no frequencies".into()));
    }
    if participation.nrows() != n || participation.ncols() != n {
        return Err(ModeError::InvalidSpectrum(format!(
            "participation must be {n}x{n}, got {}x{}",
            participation.nrows(),
            participation.ncols()
        )));
    }
    if let Some(w) = frequencies.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(ModeError::InvalidSpectrum(format!(
            "frequency {w} is not positive"
        )));
    }
    let deviation = max_orthonormal_deviation(participation);
    if deviation.is_nan() || deviation > ORTHONORMAL_TOL {
        return Err(ModeError::NotOrthonormal { deviation });
    }
    let mut s = build_spectrum(frequencies.to_vec(), participation.clone(), coupling)?;
    if let Some(nbar) = nbar {
        s = s.with_nbar(nbar.to_vec())?;
    }
    if let Some(phase) = phase {
        s = s.with_phase(phase.to_vec())?;
    }
    Ok(s)
}
