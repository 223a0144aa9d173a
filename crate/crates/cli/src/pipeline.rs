//! Config → spectrum → gate time → designed gates.

use std::f64::consts::FRAC_PI_8;

use anyhow::{anyhow, Context};
use modeforge::evaluator::{chi_numeric, oracle_sample_count};
use modeforge::mec::{analyze, find_gate_time, GateTimeSearch, MecAssignment, PairWeighting};
use modeforge::mode_solver::{
    ideal_participation, measured_spectrum, radial_mode_spectrum, Coupling, ModeSpectrum, TrapConfig,
};
use modeforge::pulse::{chi_coefficient, select_l, waveform, GateSpec, LRange, LSelection, Parity};
use modeforge::units::{mhz_to_angular, us_to_s, AMU};
use nalgebra::DMatrix;

use crate::config::{AutoTone, ExperimentConfig, GateSection, ToneChoice};
use crate::Failure;

pub fn coupling(cfg: &ExperimentConfig) -> Coupling {
    let mut c = Coupling::default();
    if let Some(s) = &cfg.coupling {
        if let Some(m) = s.ion_mass_amu {
            c.ion_mass = m * AMU;
        }
        if let Some(nm) = s.raman_wavelength_nm {
            c.raman_wavevector_diff = 2.0 * std::f64::consts::TAU / (nm * 1e-9);
        }
    }
    c
}

pub fn trap_config(cfg: &ExperimentConfig) -> Option<TrapConfig> {
    let t = cfg.trap.as_ref()?;
    let c = coupling(cfg);
    let mut tc = TrapConfig::new(
        t.n_ions,
        mhz_to_angular(t.axial_freq_mhz),
        mhz_to_angular(t.radial_com_freq_mhz),
    )
    .with_quartic(t.quartic_coeff);
    tc.ion_mass = c.ion_mass;
    tc.raman_wavevector_diff = c.raman_wavevector_diff;
    Some(tc)
}

/// Measured modes take precedence over the trap model.
pub fn spectrum(cfg: &ExperimentConfig) -> Result<ModeSpectrum, Failure> {
    if let Some(m) = &cfg.modes {
        let n = m.frequencies_mhz.len();
        let b = match &m.participation {
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Failure::config(anyhow!("modes.participation must be {n}x{n}")));
                }
                DMatrix::from_fn(n, n, |p, i| rows[p][i])
            }
            None => ideal_participation(n).map_err(|e| Failure::config(e.into()))?,
        };
        let w: Vec<f64> = m.frequencies_mhz.iter().map(|f| mhz_to_angular(*f)).collect();
        return measured_spectrum(&w, &b, m.nbar.as_deref(), m.phase_rad.as_deref(), coupling(cfg))
            .context("modes section")
            .map_err(Failure::config);
    }
    let tc = trap_config(cfg).expect("config checked for trap or modes");
    radial_mode_spectrum(&tc)
        .context("trap section")
        .map_err(Failure::config)
}

fn zero_based(pair: [usize; 2], n_ions: usize) -> Result<(usize, usize), Failure> {
    if pair.iter().any(|&i| i == 0 || i > n_ions) {
        return Err(Failure::config(anyhow!(
            "pair {pair:?} out of range for {n_ions} ions"
        )));
    }
    Ok((pair[0] - 1, pair[1] - 1))
}

pub struct GateTime {
    pub tau: f64,
    pub fixed: bool,
    pub candidates: Vec<MecAssignment>,
}

/// A fixed `mec.tau_us` wins; the search still runs so its candidates can be
/// reported next to the choice.
pub fn gate_time(cfg: &ExperimentConfig, spectrum: &ModeSpectrum) -> Result<GateTime, Failure> {
    let weighting = match &cfg.mec.pair_weighting {
        Some(w) => Some(PairWeighting {
            pair: zero_based(w.pair, spectrum.n_ions())?,
            threshold: w.threshold,
        }),
        None => None,
    };
    let search = GateTimeSearch {
        tau_min: us_to_s(cfg.mec.tau_range_us[0]),
        tau_max: us_to_s(cfg.mec.tau_range_us[1]),
        max_abs_delta_k: cfg.mec.max_abs_delta_k,
        weighting,
    };
    let candidates = find_gate_time(spectrum, &search).map_err(|e| Failure::config(e.into()))?;
    if let Some(t) = cfg.mec.tau_us {
        return Ok(GateTime {
            tau: us_to_s(t),
            fixed: true,
            candidates,
        });
    }
    let first = candidates.first().ok_or_else(|| {
        Failure::infeasible(anyhow!(
            "no admissible τ in [{}, {}] µs with max |δk| ≤ {}",
            cfg.mec.tau_range_us[0],
            cfg.mec.tau_range_us[1],
            cfg.mec.max_abs_delta_k
        ))
    })?;
    Ok(GateTime {
        tau: first.tau,
        fixed: false,
        candidates,
    })
}

/// One designed gate with the quantities reported alongside it.
pub struct Design {
    pub index: usize,
    pub gate: GateSpec,
    /// Assignment of the spectrum as seen by the gate (after the added detuning).
    pub mec: MecAssignment,
    pub odd: Option<LSelection>,
    pub even: Option<LSelection>,
    /// `S` of the chosen tone.
    pub s: f64,
    /// `Ω` from `χ = Ω²τ²S`.
    pub omega_closed_form: f64,
}

fn best(
    spectrum: &ModeSpectrum,
    mec: &MecAssignment,
    pair: (usize, usize),
    parity: Parity,
    forbid_resonant: bool,
) -> Option<LSelection> {
    select_l(spectrum, mec, pair, LRange::around(mec), parity, forbid_resonant).ok()
}

/// Picks `l`, then sets Ω so that the numerically integrated `|χ|` hits the
/// target; the closed form is only exact on the MEC.
pub fn design(
    index: usize,
    section: &GateSection,
    spectrum: &ModeSpectrum,
    default_tau: f64,
) -> Result<Design, Failure> {
    let pair = zero_based(section.pair, spectrum.n_ions())?;
    let tau = section.tau_us.map(us_to_s).unwrap_or(default_tau);
    let added = modeforge::units::hz_to_angular(section.added_detuning_hz);
    let effective = spectrum.shifted(added);
    let mec = analyze(&effective, tau);
    let odd = best(&effective, &mec, pair, Parity::Odd, section.forbid_resonant);
    let even = best(&effective, &mec, pair, Parity::Even, section.forbid_resonant);
    let l = match section.l {
        ToneChoice::Fixed(l) => l,
        ToneChoice::Auto(choice) => {
            let pick = match choice {
                AutoTone::Odd => &odd,
                AutoTone::Even => &even,
            };
            pick.as_ref()
                .map(|s| s.l)
                .ok_or_else(|| Failure::infeasible(anyhow!("gates[{index}]: no admissible tone index")))?
        }
    };
    let target = section.target_chi.unwrap_or(FRAC_PI_8);
    let mut gate = GateSpec::new(pair, tau, l)
        .map_err(|e| Failure::config(anyhow!("gates[{index}]: {e}")))?
        .with_added_detuning(added);
    gate.target_chi = target;

    let s = chi_coefficient(&effective, &mec, pair, l);
    let omega_closed_form = if s == 0.0 {
        0.0
    } else {
        (target / (s.abs() * tau * tau)).sqrt()
    };
    let unit = gate.clone().with_omega(1.0);
    let wf =
        waveform(&unit, oracle_sample_count(&unit, &effective)).map_err(|e| Failure::config(e.into()))?;
    let chi_unit = chi_numeric(&wf, &effective, pair).map_err(|e| Failure::config(e.into()))?;
    if chi_unit == 0.0 {
        return Err(Failure::infeasible(anyhow!(
            "gates[{index}]: pair does not couple at l={l}"
        )));
    }
    let gate = gate.with_omega((target / chi_unit.abs()).sqrt());
    Ok(Design {
        index,
        gate,
        mec,
        odd,
        even,
        s,
        omega_closed_form,
    })
}

pub fn designs(cfg: &ExperimentConfig, spectrum: &ModeSpectrum) -> Result<(GateTime, Vec<Design>), Failure> {
    if cfg.gates.is_empty() {
        return Err(Failure::config(anyhow!("config has no gates")));
    }
    let time = gate_time(cfg, spectrum)?;
    let designs = cfg
        .gates
        .iter()
        .enumerate()
        .map(|(n, g)| design(n + 1, g, spectrum, time.tau))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((time, designs))
}
