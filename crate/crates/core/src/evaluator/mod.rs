//! Gate verification: quadrature oracles, closed forms, detuning scans, the
//! Fock-space simulator and the collective mode-frequency fit.

mod analytic;
mod fit;
mod oracle;
mod scan;
mod sim;

use thiserror::Error;

use crate::mode_solver::ModeError;
use crate::pulse::DesignError;

pub use analytic::{alpha_analytic, alpha_expansion, prime2_displacement_sq};
pub use fit::{fit_mode_frequencies, FitOptions, FitResult, ScanData};
pub use oracle::{
    alpha_numeric, chi_numeric, displacement_integral, oracle_sample_count, phase_closure_factorization_check,
};
pub use scan::{detuning_scan, detuning_scan_with, loglog_slope, offset_for_delta_k, ScanResult, ScanRow};
pub use sim::{
    displacement_column, fidelity_estimate, simulate_gate, FidelityReport, SimOptions, TwoQubitState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("undersampled waveform: {samples} intervals, need at least {required}")]
    Undersampled { samples: usize, required: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("truncation leakage {leakage:e} exceeds bound at n_max = {n_max}; increase n_max")]
    TruncationLeakage { leakage: f64, n_max: usize },
    #[error("fit is degenerate: the scans carry no information about the mode frequencies")]
    DegenerateFit,
    #[error("fit needs at least 2 scans, got {0}")]
    InsufficientScans(usize),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Mode(#[from] ModeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaMethod {
    Numeric,
    Analytic,
    Expansion,
}

/// Residual spin–motion coupling `α` with its per-mode breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaReport {
    pub alpha: f64,
    pub per_mode: Vec<f64>,
    pub method: AlphaMethod,
    /// Modes at exact resonance `2(k_p + δk_p) = l`, reported at their limit value.
    pub resonant_modes: Vec<usize>,
    /// Expansion used outside `|δk| ≤ 0.05`.
    pub out_of_range: bool,
}

impl AlphaReport {
    fn from_modes(per_mode: Vec<f64>, method: AlphaMethod) -> Self {
        Self {
            alpha: per_mode.iter().sum(),
            per_mode,
            method,
            resonant_modes: Vec::new(),
            out_of_range: false,
        }
    }
}

fn check_pair(pair: (usize, usize), n_ions: usize) -> Result<(), EvalError> {
    if pair.0 == pair.1 || pair.0 >= n_ions || pair.1 >= n_ions {
        return Err(EvalError::InvalidInput(format!(
            "pair {pair:?} invalid for {n_ions} ions"
        )));
    }
    Ok(())
}
