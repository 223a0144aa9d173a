//! Acceptance checks. Runs without the libtest harness so that every check
//! prints one line, and exits non-zero if any check fails.

use std::f64::consts::{FRAC_PI_8, PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use modeforge::evaluator::{
    alpha_analytic, alpha_numeric, chi_numeric, detuning_scan, fidelity_estimate, fit_mode_frequencies,
    oracle_sample_count, phase_closure_factorization_check, simulate_gate, FitOptions, ScanData, SimOptions,
    TwoQubitState,
};
use modeforge::mec::{analyze, MecAssignment};
use modeforge::mode_solver::{ideal_participation, measured_spectrum, Coupling, ModeSpectrum};
use modeforge::pulse::{calibrate_omega, chi_coefficient, select_l, waveform, GateSpec, LRange, Parity};
use modeforge::units::{hz_to_angular, mhz_to_angular, us_to_s};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BASELINE_MHZ: [f64; 3] = [2.963, 3.005, 3.036];
const BASELINE_TAU_US: f64 = 191.700;
const DRIFTED_MHZ: [f64; 3] = [2.964, 3.006, 3.037];
const DRIFTED_TAU_US: f64 = 192.946;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn spectrum(mhz: &[f64]) -> ModeSpectrum {
    let w: Vec<f64> = mhz.iter().map(|f| mhz_to_angular(*f)).collect();
    measured_spectrum(
        &w,
        &ideal_participation(mhz.len()).unwrap(),
        None,
        None,
        Coupling::default(),
    )
    .unwrap()
}

fn baseline() -> (ModeSpectrum, MecAssignment) {
    let s = spectrum(&BASELINE_MHZ);
    let m = analyze(&s, us_to_s(BASELINE_TAU_US));
    (s, m)
}

fn drifted() -> (ModeSpectrum, MecAssignment) {
    let s = spectrum(&DRIFTED_MHZ);
    let m = analyze(&s, us_to_s(DRIFTED_TAU_US));
    (s, m)
}

/// Spectrum with every mode moved onto `ω_p = 4π(k_p + δk)/τ`, η unchanged.
fn snapped(s: &ModeSpectrum, m: &MecAssignment, dk: f64) -> ModeSpectrum {
    s.with_frequencies(m.k.iter().map(|&k| 4.0 * PI * (k as f64 + dk) / m.tau).collect())
}

fn pick(s: &ModeSpectrum, m: &MecAssignment, pair: (usize, usize), parity: Parity) -> (u32, f64) {
    let sel = select_l(s, m, pair, LRange::around(m), parity, true).unwrap();
    (sel.l, sel.s)
}

fn calibrated(s: &ModeSpectrum, m: &MecAssignment, pair: (usize, usize), l: u32) -> GateSpec {
    let cal = calibrate_omega(chi_coefficient(s, m, pair, l), m.tau, FRAC_PI_8).unwrap();
    GateSpec::new(pair, m.tau, l).unwrap().with_omega(cal.omega)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn mec_reproduction() -> Outcome {
    let (_, m) = baseline();
    let (_, a) = drifted();
    let detail = format!("baseline k={:?}, drifted k={:?}", m.k, a.k);
    if m.k == [284, 288, 291] && a.k == [286, 290, 293] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn l_selection() -> Outcome {
    let (s, m) = baseline();
    let (sa, a) = drifted();
    let mut got = Vec::new();
    for (s, m) in [(&s, &m), (&sa, &a)] {
        for pair in [(0, 1), (0, 2)] {
            got.push(pick(s, m, pair, Parity::Odd).0);
            got.push(pick(s, m, pair, Parity::Even).0);
        }
    }
    let detail = format!("picked {got:?}");
    if got == [569, 570, 577, 578, 573, 574, 581, 582] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn power_ratio() -> Outcome {
    let (s, m) = baseline();
    let ratio = |pair| {
        let (_, odd) = pick(&s, &m, pair, Parity::Odd);
        let (_, even) = pick(&s, &m, pair, Parity::Even);
        (odd / even).abs().sqrt()
    };
    let r13 = ratio((0, 2));
    let r12 = ratio((0, 1));
    let m13 = 0.0592 / 0.0454;
    let m12 = 0.0849 / 0.0585;
    let detail = format!(
        "(1,3) {r13:.3} vs {m13:.3} ({:.1}%), (1,2) {r12:.3} vs {m12:.3} ({:.1}%)",
        100.0 * rel(r13, m13),
        100.0 * rel(r12, m12)
    );
    if rel(r13, m13) <= 0.05 && rel(r12, m12) <= 0.10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn chi_oracle() -> Outcome {
    let (s, m) = baseline();
    let snap = snapped(&s, &m, 0.0);
    let gates = [
        ((0, 1), 569),
        ((0, 1), 570),
        ((0, 2), 577),
        ((0, 2), 578),
        ((0, 1), 582),
    ];
    let mut worst: f64 = 0.0;
    for (pair, l) in gates {
        let g = calibrated(&snap, &m, pair, l);
        let wf = waveform(&g, oracle_sample_count(&g, &snap)).unwrap();
        let numeric = chi_numeric(&wf, &snap, pair).unwrap();
        let closed = g.omega * g.omega * g.tau * g.tau * chi_coefficient(&snap, &m, pair, l);
        worst = worst.max(rel(numeric, closed));
    }
    let detail = format!("worst relative difference {worst:.2e} over 5 gates (l=582 resonant)");
    if worst < 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn alpha_oracle() -> Outcome {
    let (s, m) = baseline();
    let base = snapped(&s, &m, 0.0);
    let mut worst: f64 = 0.0;
    let mut at_zero: f64 = 0.0;
    for l in [569, 570] {
        let g = calibrated(&base, &m, (0, 1), l);
        for step in -10..=10 {
            let dk = 0.005 * step as f64;
            let sp = snapped(&s, &m, dk);
            let mec = analyze(&sp, g.tau);
            let wf = waveform(&g, oracle_sample_count(&g, &sp)).unwrap();
            let numeric = alpha_numeric(&wf, &sp, g.pair).unwrap().alpha;
            let analytic = alpha_analytic(&g, &mec, &sp).unwrap().alpha;
            if step == 0 {
                at_zero = at_zero.max(numeric.abs()).max(analytic.abs());
            } else {
                worst = worst.max(rel(numeric, analytic));
            }
        }
    }
    let detail = format!("worst relative difference {worst:.2e}, |α| at δk=0 {at_zero:.1e}");
    if worst < 1e-8 && at_zero < 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn phase_closure() -> Outcome {
    let (s, m) = baseline();
    let snap = snapped(&s, &m, 0.0);
    let g = calibrated(&snap, &m, (0, 1), 569);
    let wf = waveform(&g, oracle_sample_count(&g, &snap)).unwrap();
    let alpha = alpha_numeric(&wf, &snap, g.pair).unwrap().alpha;
    let closure = alpha / (g.omega * g.omega * g.tau * g.tau);

    let scale = g.omega * g.tau;
    let mut worst: f64 = 0.0;
    for dk in [0.0, 0.01, 0.25] {
        let omega = 4.0 * PI * (m.k[0] as f64 + dk) / g.tau;
        let (lhs, rhs) = phase_closure_factorization_check(&wf, omega, 0.3);
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    let detail = format!("α/(Ω²τ²) = {closure:.1e}, factorisation error {worst:.1e} (relative to Ωτ)");
    if closure < 1e-12 && worst < 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn robustness_scaling() -> Outcome {
    let (s, m) = baseline();
    let snap = snapped(&s, &m, 0.0);
    let mut offsets = Vec::new();
    for hz in [100.0, 150.0, 200.0, 300.0, 450.0, 600.0, 800.0, 1000.0] {
        offsets.push(hz_to_angular(hz));
        offsets.push(-hz_to_angular(hz));
    }
    let (lo, hi) = (hz_to_angular(100.0), hz_to_angular(1000.0));
    let slope = |l: u32| {
        let g = calibrated(&snap, &m, (0, 1), l);
        detuning_scan(&g, &snap, &offsets, false)
            .unwrap()
            .alpha_slope(lo * 0.999, hi * 1.001)
            .unwrap()
    };
    let odd = slope(569);
    let even = slope(570);
    let resonant = slope(568);
    let inside = |x: f64, a: f64, b: f64| (a..=b).contains(&x);
    let detail = format!("odd l=569 {odd:.3}, even l=570 {even:.3}, resonant even l=568 {resonant:.3}");
    if inside(odd, 1.9, 2.1) && inside(even, 3.9, 4.1) && inside(resonant, 1.9, 2.1) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ideal_gate() -> Outcome {
    let (s, m) = baseline();
    let snap = snapped(&s, &m, 0.0);
    let g = calibrated(&snap, &m, (0, 1), 569);
    let opts = SimOptions {
        n_max: 10,
        ..SimOptions::default()
    };
    let r = simulate_gate(&g, &snap, &opts, &TwoQubitState::ground()).unwrap();
    let detail = format!(
        "P_even {:.6}, contrast {:.6}, fidelity {:.6}",
        r.even_population, r.contrast, r.fidelity
    );
    if r.even_population >= 0.999 && r.contrast >= 0.999 && r.fidelity >= 0.999 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fidelity_arithmetic() -> Outcome {
    // (contrast, even population, quoted fidelity, quoted decimals)
    let rows = [
        (0.958, 0.978, 0.968, 3),
        (0.966, 0.974, 0.970, 3),
        (0.954, 0.983, 0.97, 2),
        (0.958, 0.986, 0.97, 2),
    ];
    let mut out = Vec::new();
    let mut ok = true;
    for (c, p, f, digits) in rows {
        let got = fidelity_estimate(p, c);
        let scale = 10f64.powi(digits);
        ok &= ((got * scale).round() - f * scale).abs() < 1e-9;
        out.push(format!("{got:.4}"));
    }
    let detail = format!("estimates {}", out.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn simulator_alpha_consistency() -> Outcome {
    let (s, m) = baseline();
    let snap = snapped(&s, &m, 0.0);
    let g = calibrated(&snap, &m, (0, 1), 569);
    let probe = hz_to_angular(500.0);
    let a0 = detuning_scan(&g, &snap, &[probe], true).unwrap().rows[0].alpha;
    let mut worst: f64 = 0.0;
    let mut seen = Vec::new();
    for target in [1e-3, 3e-3, 1e-2, 2e-2, 4.5e-2] {
        let offset = probe * (target / a0).sqrt();
        let row = detuning_scan(&g, &snap, &[offset], true).unwrap().rows.remove(0);
        if !(1e-3..=5e-2).contains(&row.alpha) {
            return Err(format!(
                "offset {offset:.1} rad/s gave α={:.2e} outside range",
                row.alpha
            ));
        }
        let gate = g
            .clone()
            .with_omega(row.omega_calibrated)
            .with_added_detuning(offset);
        let r = simulate_gate(&gate, &snap, &SimOptions::default(), &TwoQubitState::ground()).unwrap();
        let ratio = (1.0 - r.fidelity) / row.alpha;
        worst = worst.max((ratio - 1.0).abs());
        seen.push(format!("α={:.1e}:{ratio:.3}", row.alpha));
    }
    let detail = format!("(1−F)/α {}", seen.join(", "));
    if worst <= 0.25 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fit_round_trip() -> Outcome {
    let (truth, m) = baseline();
    let offsets: Vec<f64> = (-12..=12).map(|i| hz_to_angular(250.0 * i as f64)).collect();
    let mut scans = Vec::new();
    for (pair, l) in [((0, 1), 569), ((0, 1), 570), ((0, 2), 577), ((0, 2), 578)] {
        let gate = calibrated(&truth, &m, pair, l);
        let result = detuning_scan(&gate, &truth, &offsets, true).unwrap();
        scans.push(ScanData { gate, result });
    }
    let start: Vec<f64> = truth
        .frequencies()
        .iter()
        .zip([3e3, -4e3, 2.5e3])
        .map(|(w, d)| w + hz_to_angular(d))
        .collect();
    let initial = truth.with_frequencies(start);
    let opts = FitOptions::default();
    let error = |scans: &[ScanData]| {
        let fit = fit_mode_frequencies(scans, &initial, &opts).unwrap();
        fit.frequencies
            .iter()
            .zip(truth.frequencies())
            .fold(0.0f64, |e, (a, b)| e.max((a - b).abs()))
            / TAU
    };
    let clean = error(&scans);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut noisy = scans.clone();
    for s in &mut noisy {
        for r in &mut s.result.rows {
            r.odd_population *= 1.0 + 0.01 * rng.gen_range(-1.0..=1.0);
        }
    }
    let with_noise = error(&noisy);
    let detail = format!("max error {clean:.3} Hz noiseless, {with_noise:.1} Hz with 1% noise");
    if clean <= 1.0 && with_noise <= 50.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn eta_scale_consistency() -> Outcome {
    let (s, m) = baseline();
    let measured = [
        ((0, 1), Parity::Odd, 0.0585),
        ((0, 1), Parity::Even, 0.0849),
        ((0, 2), Parity::Odd, 0.0454),
        ((0, 2), Parity::Even, 0.0592),
    ];
    let scales: Vec<f64> = measured
        .iter()
        .map(|&(pair, parity, mhz)| {
            let (_, sv) = pick(&s, &m, pair, parity);
            let predicted = calibrate_omega(sv, m.tau, FRAC_PI_8).unwrap().omega;
            mhz_to_angular(mhz) / predicted
        })
        .collect();
    let max = scales.iter().cloned().fold(f64::MIN, f64::max);
    let min = scales.iter().cloned().fold(f64::MAX, f64::min);
    let spread = max / min - 1.0;
    let listed: Vec<String> = scales.iter().map(|x| format!("{x:.3}")).collect();
    let detail = format!(
        "Ω_measured/Ω_predicted {} (spread {:.1}%)",
        listed.join(", "),
        100.0 * spread
    );
    if spread <= 0.15 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let checks: [Check; 12] = [
        ("1 mode index assignment", mec_reproduction),
        ("2 tone index selection", l_selection),
        ("3 power ratio", power_ratio),
        ("4 chi oracle", chi_oracle),
        ("5 alpha oracle", alpha_oracle),
        ("6 phase closure", phase_closure),
        ("7 robustness scaling", robustness_scaling),
        ("8 ideal gate", ideal_gate),
        ("9 fidelity arithmetic", fidelity_arithmetic),
        ("10 simulator vs alpha", simulator_alpha_consistency),
        ("11 fit round trip", fit_round_trip),
        ("eta scale consistency", eta_scale_consistency),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS  {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
