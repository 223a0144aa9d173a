//! Collective fit of the mode frequencies to detuning-scan data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::analytic::prime2_displacement_sq;
use super::scan::ScanResult;
use super::sim::{mode_drives, odd_population_exact, TwoQubitState};
use super::EvalError;
use crate::mode_solver::ModeSpectrum;
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::pulse::GateSpec;
use crate::units::hz_to_angular;

use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

/// One measured scan together with the gate that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanData {
    pub gate: GateSpec,
    pub result: ScanResult,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Random restarts in addition to the start at the initial frequencies.
    pub restarts: usize,
    /// Half-width of the restart box around the initial frequencies (rad/s).
    pub search_radius: f64,
    pub seed: u64,
    pub max_evaluations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            search_radius: hz_to_angular(5e3),
            seed: 0x5eed,
            max_evaluations: 3000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Fitted mode frequencies (rad/s).
    pub frequencies: Vec<f64>,
    /// RMS of scaled odd population residuals, in units of `(2π MHz)⁻²`.
    pub rms: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Odd population over Ω² in `(2π·MHz)⁻²`, which keeps the residuals O(1e-3).
fn scaled(odd: f64, omega: f64) -> f64 {
    let omega_mhz = omega / TAU * 1e-6;
    odd / (omega_mhz * omega_mhz)
}

struct Point<'a> {
    gate: &'a GateSpec,
    delta_omega: f64,
    omega: f64,
    observed: f64,
}

fn predict(spectrum: &ModeSpectrum, frequencies: &[f64], pt: &Point) -> f64 {
    let g = pt.gate;
    let integrals: Vec<Complex64> = frequencies
        .iter()
        .map(|w| {
            let x = (w - g.added_detuning - pt.delta_omega) * g.tau / (4.0 * PI);
            let (sq, _) = prime2_displacement_sq(x, g.l, pt.omega, g.tau);
            Complex64::new(sq.sqrt(), 0.0)
        })
        .collect();
    let drives = mode_drives(spectrum, g.pair, &integrals);
    scaled(odd_population_exact(&drives, &TwoQubitState::ground()), pt.omega)
}

/// Varies only the mode frequencies to minimise the RMS difference between the
/// scans' scaled odd populations and the closed-form displacement model
/// (Lamb–Dicke parameters stay at `spectrum`'s values). Several Nelder–Mead
/// runs are started from the initial frequencies and from seeded random points
/// within `search_radius`; the best is kept.
pub fn fit_mode_frequencies(
    scans: &[ScanData],
    spectrum: &ModeSpectrum,
    opts: &FitOptions,
) -> Result<FitResult, EvalError> {
    let points: Vec<Point> = scans
        .iter()
        .flat_map(|s| {
            s.result
                .rows
                .iter()
                .filter(|r| !r.flagged && r.omega_calibrated > 0.0 && r.odd_population.is_finite())
                .map(move |r| Point {
                    gate: &s.gate,
                    delta_omega: r.delta_omega,
                    omega: r.omega_calibrated,
                    observed: scaled(r.odd_population, r.omega_calibrated),
                })
        })
        .collect();
    if points.is_empty() {
        return Err(EvalError::DegenerateFit);
    }
    if scans.len() < 2 {
        return Err(EvalError::InsufficientScans(scans.len()));
    }
    for s in scans {
        s.gate.validate()?;
        super::check_pair(s.gate.pair, spectrum.n_ions())?;
    }

    let initial = spectrum.frequencies().to_vec();
    let unit = hz_to_angular(1e3);
    let to_freqs = |x: &[f64]| -> Vec<f64> { initial.iter().zip(x).map(|(w, d)| w + d * unit).collect() };
    let objective = |x: &[f64]| -> f64 {
        let f = to_freqs(x);
        let ss: f64 = points
            .iter()
            .map(|pt| (predict(spectrum, &f, pt) - pt.observed).powi(2))
            .sum();
        (ss / points.len() as f64).sqrt()
    };

    let n = initial.len();
    let radius = opts.search_radius / unit;
    let nm = NelderMeadOptions {
        max_evaluations: opts.max_evaluations,
        f_tol: 0.0,
        x_tol: 1e-7,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![vec![0.0; n]];
    for _ in 0..opts.restarts {
        starts.push((0..n).map(|_| rng.gen_range(-radius..=radius)).collect());
    }

    let mut evaluations = 0;
    let mut best: Option<crate::optimize::Minimum> = None;
    for x0 in &starts {
        let m = nelder_mead(objective, x0, &vec![radius / 5.0; n], nm);
        evaluations += m.evaluations;
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let mut best = best.expect("at least one start");
    let polish = nelder_mead(objective, &best.x, &vec![0.01; n], nm);
    evaluations += polish.evaluations;
    if polish.value <= best.value {
        best = polish;
    }

    Ok(FitResult {
        frequencies: to_freqs(&best.x),
        rms: best.value,
        converged: best.converged,
        evaluations,
    })
}
