//! Design and verification of single-tone, constant-amplitude XX gates on
//! trapped-ion chains whose motional spectrum has been engineered so that every
//! mode closes its phase-space loop at the gate time.
//!
//! The pipeline is split into four stages:
//!
//! * [`mode_solver`]: equilibrium positions, radial normal modes and Lamb–Dicke
//!   parameters of a linear chain, or a spectrum injected from measurement.
//! * [`mec`]: integer mode indices `k_p` for a gate time, gate-time search and a
//!   small inverse solver over trap knobs.
//! * [`pulse`]: the anti-periodic single-tone pulse, tone index selection and
//!   Rabi-frequency calibration.
//! * [`evaluator`]: quadrature oracles, closed forms, detuning scans, a truncated
//!   Fock-space simulator and the collective mode-frequency fit.
//!
//! Ion indices are zero-based throughout the library.

pub mod evaluator;
pub mod mec;
pub mod mode_solver;
pub mod optimize;
pub mod pulse;
pub mod quadrature;
pub mod units;

pub use evaluator::{
    alpha_analytic, alpha_expansion, alpha_numeric, chi_numeric, detuning_scan, fit_mode_frequencies,
    phase_closure_factorization_check, simulate_gate, AlphaMethod, AlphaReport, EvalError, FidelityReport,
    FitOptions, FitResult, ScanData, ScanResult, ScanRow, SimOptions, TwoQubitState,
};
pub use mec::{
    analyze, find_gate_time, inverse_engineer, GateTimeSearch, InverseSolution, KnobSet, MecAssignment,
    MecError, MecTarget, PairWeighting,
};
pub use mode_solver::{
    equilibrium_positions, measured_spectrum, radial_mode_spectrum, Coupling, ModeError, ModeSpectrum,
    TrapConfig,
};
pub use pulse::{
    calibrate_omega, chi_coefficient, select_l, waveform, Calibration, DesignError, GateSpec, LRange,
    LScanRow, LSelection, Parity, PulseWaveform,
};
