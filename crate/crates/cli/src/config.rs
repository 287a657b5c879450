//! Run configuration: sectioned `key = value` text with units in the key names.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::Deserialize;

use rotor_core::dynamics::{MagneticField, MoleculeParams};
use rotor_core::explosion::{FastPhase, ScanConfig, ShotMode, DEFAULT_HALF_ANGLE_DEG};

use crate::CliError;

/// NO₂⁺ laser intensity for a 1 MHz Rabi frequency, W/cm².
pub const DEFAULT_INTENSITY: f64 = 4.9e6;

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub molecule: MoleculeSection,
    #[serde(default)]
    pub laser: LaserSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either a preset or explicit values; explicit values override the preset.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MoleculeSection {
    pub preset: Option<String>,
    pub name: Option<String>,
    #[serde(rename = "B_rot_GHz")]
    pub b_rot_ghz: Option<f64>,
    #[serde(rename = "delta_alpha_A3")]
    pub delta_alpha_a3: Option<f64>,
    pub g_r: Option<f64>,
}

impl Default for MoleculeSection {
    fn default() -> Self {
        Self { preset: Some("NO2+".into()), name: None, b_rot_ghz: None, delta_alpha_a3: None, g_r: None }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Rectangular,
    Sin2,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PulseDesign {
    /// Quarter cycle of the bare Rabi frequency at the bare resonance.
    Nominal,
    /// Light shift and effective coupling taken into account.
    Compensated,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LaserSection {
    #[serde(rename = "intensity_W_cm2")]
    pub intensity_w_cm2: f64,
    pub phi_rad: f64,
    pub envelope: EnvelopeKind,
    pub ramp_fraction: f64,
    /// Added to the designed difference frequency.
    #[serde(rename = "detuning_MHz")]
    pub detuning_mhz: Option<f64>,
    pub design: PulseDesign,
    pub j_initial: u32,
    /// Defaults to 8, or four shells above `j_initial` if that is larger.
    pub j_max: Option<u32>,
}

impl Default for LaserSection {
    fn default() -> Self {
        Self {
            intensity_w_cm2: DEFAULT_INTENSITY,
            phi_rad: 0.0,
            envelope: EnvelopeKind::Rectangular,
            ramp_fraction: 0.2,
            detuning_mhz: None,
            design: PulseDesign::Compensated,
            j_initial: 0,
            j_max: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    #[serde(rename = "B_tesla")]
    pub b_tesla: f64,
    pub axis: [f64; 3],
}

impl Default for FieldSection {
    fn default() -> Self {
        Self { b_tesla: 1.0, axis: [0.0, 1.0, 0.0] }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FastPhaseKind {
    Exact,
    Randomized,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ShotKind {
    Binomial,
    PerShot,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub t_max_us: f64,
    pub n_delays: usize,
    pub shots: u64,
    pub seed: u64,
    pub tau_us: Option<f64>,
    pub fast_phase: FastPhaseKind,
    pub shot_mode: ShotKind,
    pub detector_half_angle_deg: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            t_max_us: 8.0,
            n_delays: 64,
            shots: 10_000,
            seed: 1,
            tau_us: None,
            fast_phase: FastPhaseKind::Randomized,
            shot_mode: ShotKind::Binomial,
            detector_half_angle_deg: DEFAULT_HALF_ANGLE_DEG,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub density_theta: usize,
    pub density_phi: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), density_theta: 64, density_phi: 128 }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn molecule(&self) -> Result<MoleculeParams, CliError> {
        let m = &self.molecule;
        let base = match m.preset.as_deref() {
            Some(p) => Some(preset(p)?),
            None => None,
        };
        let b_rot_ghz = m.b_rot_ghz.or(base.as_ref().map(|b| b.b_rot / 1e9));
        let delta_alpha = m.delta_alpha_a3.or(base.as_ref().map(|b| b.delta_alpha));
        let g_r = m.g_r.or(base.as_ref().map(|b| b.g_r));
        let name = m.name.clone().or(base.as_ref().map(|b| b.name.clone())).unwrap_or_else(|| "custom".into());
        let b = b_rot_ghz.ok_or_else(|| CliError::Config("[molecule] missing field `B_rot_GHz` (or a `preset`)".into()))?;
        let da = delta_alpha.ok_or_else(|| CliError::Config("[molecule] missing field `delta_alpha_A3` (or a `preset`)".into()))?;
        let g = g_r.ok_or_else(|| CliError::Config("[molecule] missing field `g_r` (or a `preset`)".into()))?;
        if !(b > 0.0) {
            return Err(CliError::Config(format!("[molecule] `B_rot_GHz` must be positive, got {b}")));
        }
        if da < 0.0 {
            return Err(CliError::Config(format!("[molecule] `delta_alpha_A3` must be non-negative, got {da}")));
        }
        MoleculeParams::new(name, b * 1e9, da, g).map_err(|e| CliError::Config(format!("[molecule] {e}")))
    }

    pub fn field(&self) -> Result<MagneticField, CliError> {
        let f = &self.field;
        if !(f.b_tesla >= 0.0) {
            return Err(CliError::Config(format!("[field] `B_tesla` must be non-negative, got {}", f.b_tesla)));
        }
        let axis = Vector3::from(f.axis);
        let norm = axis.norm();
        if !(norm > 0.0) {
            return Err(CliError::Config("[field] `axis` must be nonzero".into()));
        }
        MagneticField::new(f.b_tesla, axis / norm).map_err(|e| CliError::Config(format!("[field] {e}")))
    }

    pub fn scan_config(&self, seed_override: Option<u64>) -> Result<ScanConfig, CliError> {
        let s = &self.scan;
        let err = |m: String| CliError::Config(format!("[scan] {m}"));
        if s.shots == 0 {
            return Err(err("`shots` must be positive".into()));
        }
        if let Some(tau) = s.tau_us {
            if !(tau > 0.0) {
                return Err(err(format!("`tau_us` must be positive, got {tau}")));
            }
        }
        let mut cfg = ScanConfig::evenly_spaced(s.t_max_us * 1e-6, s.n_delays, s.shots, seed_override.unwrap_or(s.seed)).map_err(|e| err(e.to_string()))?;
        cfg.decoherence_tau = s.tau_us.map(|t| t * 1e-6);
        cfg.fast_phase = match s.fast_phase {
            FastPhaseKind::Exact => FastPhase::Exact,
            FastPhaseKind::Randomized => FastPhase::Randomized,
        };
        cfg.shot_mode = match s.shot_mode {
            ShotKind::Binomial => ShotMode::Binomial,
            ShotKind::PerShot => ShotMode::PerShot,
        };
        Ok(cfg)
    }

    pub fn half_angle(&self) -> Result<f64, CliError> {
        let a = self.scan.detector_half_angle_deg;
        if !(a > 0.0 && a < 90.0) {
            return Err(CliError::Config(format!("[scan] `detector_half_angle_deg` must lie in (0, 90), got {a}")));
        }
        Ok(a.to_radians())
    }
}

pub fn preset(name: &str) -> Result<MoleculeParams, CliError> {
    match name.to_ascii_lowercase().as_str() {
        "no2+" | "no2_plus" | "no₂⁺" => Ok(MoleculeParams::no2_plus()),
        _ => Err(CliError::Config(format!("[molecule] unknown preset `{name}` (available: NO2+)"))),
    }
}
