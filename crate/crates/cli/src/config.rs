//! Experiment description. Frequencies are in MHz, times in µs and
//! detunings in Hz; everything is converted to SI angular units on load.

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trap: Option<TrapSection>,
    pub modes: Option<ModesSection>,
    pub coupling: Option<CouplingSection>,
    #[serde(default)]
    pub mec: MecSection,
    #[serde(default)]
    pub gates: Vec<GateSection>,
    pub scan: Option<ScanSection>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
    pub fit: Option<FitSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub n_ions: usize,
    pub axial_freq_mhz: f64,
    pub radial_com_freq_mhz: f64,
    #[serde(default)]
    pub quartic_coeff: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesSection {
    pub frequencies_mhz: Vec<f64>,
    /// Rows are modes. Defaults to the harmonic-chain vectors.
    pub participation: Option<Vec<Vec<f64>>>,
    pub nbar: Option<Vec<f64>>,
    pub phase_rad: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub ion_mass_amu: Option<f64>,
    pub raman_wavelength_nm: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MecSection {
    /// Fixed gate time; when absent the fastest admissible time in
    /// `tau_range_us` is used.
    pub tau_us: Option<f64>,
    pub tau_range_us: [f64; 2],
    pub max_abs_delta_k: f64,
    pub pair_weighting: Option<PairWeightingSection>,
}

impl Default for MecSection {
    fn default() -> Self {
        Self {
            tau_us: None,
            tau_range_us: [150.0, 200.0],
            max_abs_delta_k: 0.05,
            pair_weighting: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairWeightingSection {
    pub pair: [usize; 2],
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum ToneChoice {
    Fixed(u32),
    Auto(AutoTone),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum AutoTone {
    #[serde(rename = "auto-odd")]
    Odd,
    #[serde(rename = "auto-even")]
    Even,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSection {
    /// 1-based ion indices.
    pub pair: [usize; 2],
    pub l: ToneChoice,
    /// Overrides the `mec` gate time for this gate.
    pub tau_us: Option<f64>,
    /// Target `|χ|`; π/8 gives a maximally entangling gate.
    pub target_chi: Option<f64>,
    #[serde(default)]
    pub added_detuning_hz: f64,
    #[serde(default = "default_true")]
    pub forbid_resonant: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub offsets_hz: Vec<f64>,
    #[serde(default = "default_true")]
    pub recalibrate: bool,
    /// Range of |δω/2π| used for the slope summary.
    #[serde(default = "default_slope_range")]
    pub slope_range_hz: [f64; 2],
}

fn default_slope_range() -> [f64; 2] {
    [100.0, 1000.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub n_max: usize,
    pub phi_points: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            n_max: 10,
            phi_points: 24,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("modeforge-out"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Scan CSVs, each with its JSON sidecar. Relative paths resolve against
    /// the config file's directory.
    pub scan_files: Vec<PathBuf>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_radius")]
    pub search_radius_hz: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_restarts() -> usize {
    16
}

fn default_radius() -> f64 {
    5e3
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Checks that do not need any computation.
    fn check(&self) -> anyhow::Result<()> {
        use anyhow::bail;
        if self.trap.is_none() && self.modes.is_none() {
            bail!("config needs a `trap` or a `modes` section");
        }
        let [lo, hi] = self.mec.tau_range_us;
        if !(lo > 0.0 && lo < hi) {
            bail!("mec.tau_range_us must satisfy 0 < min < max, got [{lo}, {hi}]");
        }
        if !(self.mec.max_abs_delta_k > 0.0 && self.mec.max_abs_delta_k < 0.5) {
            bail!("mec.max_abs_delta_k must lie in (0, 0.5)");
        }
        if let Some(t) = self.mec.tau_us {
            if t.is_nan() || t <= 0.0 {
                bail!("mec.tau_us must be positive");
            }
        }
        for (n, g) in self.gates.iter().enumerate() {
            if g.pair[0] == 0 || g.pair[1] == 0 || g.pair[0] == g.pair[1] {
                bail!("gates[{n}].pair must name two distinct ions, counting from 1");
            }
            if !g.added_detuning_hz.is_finite() {
                bail!("gates[{n}].added_detuning_hz must be finite");
            }
        }
        if let Some(scan) = &self.scan {
            if scan.offsets_hz.is_empty() {
                bail!("scan.offsets_hz is empty");
            }
            if scan.offsets_hz.iter().any(|o| !o.is_finite()) {
                bail!("scan.offsets_hz contains a non-finite value");
            }
        }
        if self.sim.n_max < 5 {
            bail!("sim.n_max must be at least 5");
        }
        if self.sim.phi_points < 3 {
            bail!("sim.phi_points must be at least 3");
        }
        Ok(())
    }
}
