use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use modeforge::evaluator::{
    detuning_scan_with, fit_mode_frequencies, oracle_sample_count, simulate_gate, EvalError, FitOptions,
    ScanData, ScanResult, ScanRow, SimOptions, TwoQubitState,
};
use modeforge::mode_solver::{equilibrium_positions, ModeSpectrum};
use modeforge::pulse::{waveform, GateSpec};
use modeforge::units::{angular_to_hz, angular_to_mhz, hz_to_angular, s_to_us, us_to_s};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{header, num, OutDir};
use crate::pipeline::{self, Design};
use crate::Failure;

fn sim_options(cfg: &ExperimentConfig) -> SimOptions {
    SimOptions {
        n_max: cfg.sim.n_max,
        phi_points: cfg.sim.phi_points,
    }
}

fn io(e: anyhow::Error) -> Failure {
    Failure::io(e)
}

#[derive(Serialize)]
struct ModesReport {
    source: &'static str,
    n_ions: usize,
    frequencies_mhz: Vec<f64>,
    /// Rows are modes.
    participation: Vec<Vec<f64>>,
    lamb_dicke: Vec<Vec<f64>>,
    nbar: Vec<f64>,
    phase_rad: Vec<f64>,
    /// Axial equilibrium positions in units of `(e²/4πε₀Mω_z²)^{1/3}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    equilibrium_positions: Option<Vec<f64>>,
}

fn rows_of(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

pub fn modes(cfg: &ExperimentConfig, out: &OutDir) -> Result<(), Failure> {
    let s = pipeline::spectrum(cfg)?;
    let positions = match (&cfg.modes, pipeline::trap_config(cfg)) {
        (None, Some(tc)) => Some(equilibrium_positions(&tc).map_err(|e| Failure::config(e.into()))?),
        _ => None,
    };
    let n = s.n_ions();
    let mut cols = vec![
        "mode".to_string(),
        "frequency_mhz".into(),
        "nbar".into(),
        "phase_rad".into(),
    ];
    cols.extend((1..=n).map(|i| format!("participation_ion{i}")));
    cols.extend((1..=n).map(|i| format!("lamb_dicke_ion{i}")));
    let rows = (0..s.n_modes()).map(|p| {
        let mut r = vec![
            (p + 1).to_string(),
            num(angular_to_mhz(s.frequency(p))),
            num(s.nbar()[p]),
            num(s.phase()[p]),
        ];
        r.extend((0..n).map(|i| num(s.participation()[(p, i)])));
        r.extend((0..n).map(|i| num(s.eta(p, i))));
        r
    });
    out.csv("modes.csv", &cols, rows).map_err(io)?;
    let report = ModesReport {
        source: if cfg.modes.is_some() { "measured" } else { "trap" },
        n_ions: n,
        frequencies_mhz: s.frequencies().iter().map(|w| angular_to_mhz(*w)).collect(),
        participation: rows_of(s.participation()),
        lamb_dicke: rows_of(s.lamb_dicke()),
        nbar: s.nbar().to_vec(),
        phase_rad: s.phase().to_vec(),
        equilibrium_positions: positions,
    };
    out.json("modes.json", &report).map_err(io)?;
    Ok(())
}

#[derive(Serialize)]
struct Candidate {
    tau_us: f64,
    k: Vec<u32>,
    delta_k: Vec<f64>,
    max_abs_delta_k: f64,
}

#[derive(Serialize)]
struct GateReport {
    gate: usize,
    pair: [usize; 2],
    tau_us: f64,
    added_detuning_hz: f64,
    k: Vec<u32>,
    delta_k: Vec<f64>,
    best_odd_l: Option<u32>,
    best_even_l: Option<u32>,
    l: u32,
    parity: &'static str,
    s: f64,
    target_chi: f64,
    /// Ω/2π calibrated on the numerically integrated χ.
    omega_hz: f64,
    /// Ω/2π from the closed form, exact only on the MEC.
    omega_closed_form_hz: f64,
}

#[derive(Serialize)]
struct DesignReport {
    tau_us: f64,
    tau_source: &'static str,
    candidates: Vec<Candidate>,
    gates: Vec<GateReport>,
}

fn gate_report(d: &Design) -> GateReport {
    let g = &d.gate;
    GateReport {
        gate: d.index,
        pair: [g.pair.0 + 1, g.pair.1 + 1],
        tau_us: s_to_us(g.tau),
        added_detuning_hz: angular_to_hz(g.added_detuning),
        k: d.mec.k.clone(),
        delta_k: d.mec.delta_k.clone(),
        best_odd_l: d.odd.as_ref().map(|s| s.l),
        best_even_l: d.even.as_ref().map(|s| s.l),
        l: g.l,
        parity: g.parity().as_str(),
        s: d.s,
        target_chi: g.target_chi,
        omega_hz: angular_to_hz(g.omega),
        omega_closed_form_hz: angular_to_hz(d.omega_closed_form),
    }
}

pub fn design(cfg: &ExperimentConfig, out: &OutDir) -> Result<(), Failure> {
    let s = pipeline::spectrum(cfg)?;
    let (time, designs) = pipeline::designs(cfg, &s)?;
    for d in &designs {
        let table = d
            .odd
            .as_ref()
            .or(d.even.as_ref())
            .map(|sel| sel.table.as_slice())
            .unwrap_or(&[]);
        let rows = table.iter().map(|r| {
            vec![
                r.l.to_string(),
                r.parity.as_str().to_string(),
                num(r.s),
                r.resonant.to_string(),
            ]
        });
        out.csv(
            &format!("l_scan_gate{}.csv", d.index),
            &header(&["l", "parity", "s", "resonant"]),
            rows,
        )
        .map_err(io)?;

        let wf = waveform(
            &d.gate,
            oracle_sample_count(&d.gate, &d.gate.effective_spectrum(&s)),
        )
        .map_err(|e| Failure::config(e.into()))?;
        let rows = wf
            .samples
            .iter()
            .map(|&(t, g)| vec![num(s_to_us(t)), num(angular_to_hz(g))]);
        out.csv(
            &format!("waveform_gate{}.csv", d.index),
            &header(&["t_us", "rabi_hz"]),
            rows,
        )
        .map_err(io)?;
    }
    let report = DesignReport {
        tau_us: s_to_us(time.tau),
        tau_source: if time.fixed { "fixed" } else { "search" },
        candidates: time
            .candidates
            .iter()
            .map(|m| Candidate {
                tau_us: s_to_us(m.tau),
                k: m.k.clone(),
                delta_k: m.delta_k.clone(),
                max_abs_delta_k: m.max_abs_delta_k(),
            })
            .collect(),
        gates: designs.iter().map(gate_report).collect(),
    };
    out.json("design.json", &report).map_err(io)?;
    Ok(())
}

/// Gate metadata stored next to each scan CSV so that `fit` can rebuild the
/// forward model.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScanSidecar {
    pub pair: [usize; 2],
    pub l: u32,
    pub tau_us: f64,
    pub added_detuning_hz: f64,
    pub target_chi: f64,
    pub omega_hz: f64,
    pub recalibrate: bool,
    pub slope_range_hz: [f64; 2],
    pub alpha_slope: Option<f64>,
    pub columns: BTreeMap<String, String>,
}

const SCAN_COLUMNS: [&str; 6] = [
    "delta_omega_hz",
    "omega_hz",
    "alpha",
    "odd_population",
    "scaled_odd_population_per_mhz2",
    "flagged",
];

fn scan_column_docs() -> BTreeMap<String, String> {
    [
        (
            "delta_omega_hz",
            "common mode-frequency offset δω/2π (Hz); modes are seen at ω_p − δω",
        ),
        ("omega_hz", "Rabi frequency Ω/2π used at this offset (Hz)"),
        ("alpha", "residual spin-motion coupling (dimensionless)"),
        ("odd_population", "P01 + P10 after the gate on |00⟩"),
        (
            "scaled_odd_population_per_mhz2",
            "odd_population / (Ω/2π in MHz)²",
        ),
        ("flagged", "recalibration or simulation failed at this offset"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn scaled_per_mhz2(r: &ScanRow) -> f64 {
    let mhz = angular_to_mhz(r.omega_calibrated);
    if mhz > 0.0 {
        r.odd_population / (mhz * mhz)
    } else {
        0.0
    }
}

pub fn scan(cfg: &ExperimentConfig, out: &OutDir) -> Result<(), Failure> {
    let section = cfg
        .scan
        .as_ref()
        .ok_or_else(|| Failure::config(anyhow!("config has no scan section")))?;
    let s = pipeline::spectrum(cfg)?;
    let (_, designs) = pipeline::designs(cfg, &s)?;
    let offsets: Vec<f64> = section.offsets_hz.iter().map(|h| hz_to_angular(*h)).collect();
    let opts = sim_options(cfg);
    for d in &designs {
        let result =
            detuning_scan_with(&d.gate, &s, &offsets, section.recalibrate, &opts).map_err(Failure::eval)?;
        let rows = result.rows.iter().map(|r| {
            vec![
                num(angular_to_hz(r.delta_omega)),
                num(angular_to_hz(r.omega_calibrated)),
                num(r.alpha),
                num(r.odd_population),
                num(scaled_per_mhz2(r)),
                r.flagged.to_string(),
            ]
        });
        out.csv(&format!("scan_gate{}.csv", d.index), &header(&SCAN_COLUMNS), rows)
            .map_err(io)?;
        let [lo, hi] = section.slope_range_hz;
        let g = &d.gate;
        let sidecar = ScanSidecar {
            pair: [g.pair.0 + 1, g.pair.1 + 1],
            l: g.l,
            tau_us: s_to_us(g.tau),
            added_detuning_hz: angular_to_hz(g.added_detuning),
            target_chi: g.target_chi,
            omega_hz: angular_to_hz(g.omega),
            recalibrate: section.recalibrate,
            slope_range_hz: section.slope_range_hz,
            alpha_slope: result.alpha_slope(hz_to_angular(lo), hz_to_angular(hi)),
            columns: scan_column_docs(),
        };
        out.json(&format!("scan_gate{}.json", d.index), &sidecar)
            .map_err(io)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FidelityJson {
    gate: usize,
    pair: [usize; 2],
    l: u32,
    omega_hz: f64,
    n_max: usize,
    populations: BTreeMap<&'static str, f64>,
    even_population: f64,
    contrast: f64,
    /// (even_population + contrast) / 2
    fidelity: f64,
    leakage: f64,
}

pub fn simulate(cfg: &ExperimentConfig, out: &OutDir) -> Result<(), Failure> {
    let s = pipeline::spectrum(cfg)?;
    let (_, designs) = pipeline::designs(cfg, &s)?;
    let opts = sim_options(cfg);
    for d in &designs {
        let r = simulate_gate(&d.gate, &s, &opts, &TwoQubitState::ground()).map_err(Failure::eval)?;
        let rows = r.parity_curve.iter().map(|&(phi, p)| vec![num(phi), num(p)]);
        out.csv(
            &format!("parity_gate{}.csv", d.index),
            &header(&["phi_rad", "parity"]),
            rows,
        )
        .map_err(io)?;
        let labels = ["p00", "p01", "p10", "p11"];
        let report = FidelityJson {
            gate: d.index,
            pair: [d.gate.pair.0 + 1, d.gate.pair.1 + 1],
            l: d.gate.l,
            omega_hz: angular_to_hz(d.gate.omega),
            n_max: opts.n_max,
            populations: labels.into_iter().zip(r.populations).collect(),
            even_population: r.even_population,
            contrast: r.contrast,
            fidelity: r.fidelity,
            leakage: r.leakage,
        };
        out.json(&format!("fidelity_gate{}.json", d.index), &report)
            .map_err(io)?;
    }
    Ok(())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_field(rec: &csv::StringRecord, idx: usize, name: &str) -> anyhow::Result<f64> {
    let raw = rec.get(idx).ok_or_else(|| anyhow!("missing column {name}"))?;
    raw.parse().with_context(|| format!("bad {name} value {raw:?}"))
}

pub fn read_scan(csv_path: &Path) -> anyhow::Result<ScanData> {
    let side_path = csv_path.with_extension("json");
    let side_text = std::fs::read_to_string(&side_path)
        .with_context(|| format!("cannot read {}", side_path.display()))?;
    let side: ScanSidecar =
        serde_json::from_str(&side_text).with_context(|| side_path.display().to_string())?;
    if side.pair.contains(&0) {
        return Err(anyhow!("{}: ion indices count from 1", side_path.display()));
    }
    let mut gate = GateSpec::new((side.pair[0] - 1, side.pair[1] - 1), us_to_s(side.tau_us), side.l)?
        .with_omega(hz_to_angular(side.omega_hz))
        .with_added_detuning(hz_to_angular(side.added_detuning_hz));
    gate.target_chi = side.target_chi;

    let mut reader =
        csv::Reader::from_path(csv_path).with_context(|| format!("cannot read {}", csv_path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing column {name}", csv_path.display()))
    };
    let (c_d, c_o, c_a, c_p, c_f) = (
        col("delta_omega_hz")?,
        col("omega_hz")?,
        col("alpha")?,
        col("odd_population")?,
        col("flagged")?,
    );
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let ctx = || {
            format!(
                "{} line {}",
                csv_path.display(),
                rec.position().map_or(0, |p| p.line())
            )
        };
        let odd = parse_field(&rec, c_p, "odd_population").with_context(ctx)?;
        let omega = hz_to_angular(parse_field(&rec, c_o, "omega_hz").with_context(ctx)?);
        rows.push(ScanRow {
            delta_omega: hz_to_angular(parse_field(&rec, c_d, "delta_omega_hz").with_context(ctx)?),
            omega_calibrated: omega,
            alpha: parse_field(&rec, c_a, "alpha").with_context(ctx)?,
            odd_population: odd,
            scaled_odd_population: if omega > 0.0 { odd / (omega * omega) } else { 0.0 },
            flagged: rec.get(c_f) == Some("true"),
        });
    }
    Ok(ScanData {
        gate,
        result: ScanResult { rows },
    })
}

#[derive(Serialize)]
struct FitJson {
    scan_files: Vec<String>,
    initial_frequencies_mhz: Vec<f64>,
    fitted_frequencies_mhz: Vec<f64>,
    shift_hz: Vec<f64>,
    /// RMS of odd_population / (Ω/2π in MHz)² residuals.
    rms_per_mhz2: f64,
    converged: bool,
    evaluations: usize,
}

pub fn fit(cfg: &ExperimentConfig, config_dir: &Path, out: &OutDir) -> Result<(), Failure> {
    let section = cfg
        .fit
        .as_ref()
        .ok_or_else(|| Failure::config(anyhow!("config has no fit section")))?;
    let initial: ModeSpectrum = pipeline::spectrum(cfg)?;
    let files: Vec<PathBuf> = section
        .scan_files
        .iter()
        .map(|p| resolve(config_dir, p))
        .collect();
    let scans = files
        .iter()
        .map(|p| read_scan(p))
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(Failure::config)?;
    let opts = FitOptions {
        restarts: section.restarts,
        search_radius: hz_to_angular(section.search_radius_hz),
        seed: section.seed,
        ..FitOptions::default()
    };
    let fit = fit_mode_frequencies(&scans, &initial, &opts).map_err(|e| Failure::fit(e.into()))?;
    let report = FitJson {
        scan_files: section
            .scan_files
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        initial_frequencies_mhz: initial.frequencies().iter().map(|w| angular_to_mhz(*w)).collect(),
        fitted_frequencies_mhz: fit.frequencies.iter().map(|w| angular_to_mhz(*w)).collect(),
        shift_hz: fit
            .frequencies
            .iter()
            .zip(initial.frequencies())
            .map(|(a, b)| (a - b) / TAU)
            .collect(),
        rms_per_mhz2: fit.rms,
        converged: fit.converged,
        evaluations: fit.evaluations,
    };
    out.json("fit.json", &report).map_err(io)?;
    Ok(())
}

impl Failure {
    /// Truncation problems are simulation failures; the rest are input errors.
    pub fn eval(e: EvalError) -> Self {
        match e {
            EvalError::TruncationLeakage { .. } => Failure::simulation(e.into()),
            EvalError::DegenerateFit | EvalError::InsufficientScans(_) => Failure::fit(e.into()),
            other => Failure::config(other.into()),
        }
    }
}
