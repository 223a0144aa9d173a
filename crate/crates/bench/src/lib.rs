//! Fixtures shared by the benchmarks.

use std::f64::consts::FRAC_PI_8;

use modeforge::mec::{analyze, MecAssignment};
use modeforge::mode_solver::{ideal_participation, measured_spectrum, Coupling, ModeSpectrum};
use modeforge::pulse::{calibrate_omega, chi_coefficient, GateSpec};
use modeforge::units::{mhz_to_angular, us_to_s};

/// Three-ion chain at 2.963/3.005/3.036 MHz, snapped onto its integers at
/// τ = 191.7 µs, with a calibrated gate on ions 1 and 2.
pub fn fixture(l: u32) -> (ModeSpectrum, MecAssignment, GateSpec) {
    let w: Vec<f64> = [2.963, 3.005, 3.036].iter().map(|f| mhz_to_angular(*f)).collect();
    let s = measured_spectrum(
        &w,
        &ideal_participation(3).unwrap(),
        None,
        None,
        Coupling::default(),
    )
    .unwrap();
    let m = analyze(&s, us_to_s(191.7));
    let s = s.with_frequencies(
        m.k.iter()
            .map(|&k| 4.0 * std::f64::consts::PI * k as f64 / m.tau)
            .collect(),
    );
    let cal = calibrate_omega(chi_coefficient(&s, &m, (0, 1), l), m.tau, FRAC_PI_8).unwrap();
    let g = GateSpec::new((0, 1), m.tau, l).unwrap().with_omega(cal.omega);
    (s, m, g)
}
