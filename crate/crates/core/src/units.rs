//! Physical constants and unit conversions.
//!
//! Everything inside the crate is SI with angular frequencies in rad/s.

use std::f64::consts::TAU;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
/// Atomic mass unit (kg).
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Mass of a ¹⁷¹Yb⁺ ion in atomic mass units.
pub const YB171_MASS_AMU: f64 = 170.936;
/// Raman wavelength used for the default counter-propagating geometry (m).
pub const DEFAULT_RAMAN_WAVELENGTH: f64 = 355e-9;

/// `2π · f[MHz]` in rad/s.
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    TAU * f_mhz * 1e6
}

/// `2π · f[Hz]` in rad/s.
pub fn hz_to_angular(f_hz: f64) -> f64 {
    TAU * f_hz
}

pub fn angular_to_hz(omega: f64) -> f64 {
    omega / TAU
}

pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / TAU * 1e-6
}

pub fn us_to_s(t_us: f64) -> f64 {
    t_us * 1e-6
}

pub fn s_to_us(t: f64) -> f64 {
    t * 1e6
}

/// Mean phonon number of a thermal mode at temperature `temperature` (K).
///
/// With this `n̄`, `coth(ħω / 2k_B T) = 2n̄ + 1`.
pub fn thermal_nbar(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega / (K_B * temperature);
    1.0 / x.exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coth_matches_two_nbar_plus_one() {
        let omega = mhz_to_angular(3.0);
        for &t in &[1e-6, 1e-4, 1e-3] {
            let x = HBAR * omega / (2.0 * K_B * t);
            let coth = 1.0 / x.tanh();
            let nbar = thermal_nbar(omega, t);
            assert!((coth - (2.0 * nbar + 1.0)).abs() < 1e-9 * coth);
        }
        assert_eq!(thermal_nbar(omega, 0.0), 0.0);
    }

    #[test]
    fn conversions_round_trip() {
        assert!((angular_to_mhz(mhz_to_angular(2.963)) - 2.963).abs() < 1e-15);
        assert!((angular_to_hz(hz_to_angular(-500.0)) + 500.0).abs() < 1e-12);
    }
}
