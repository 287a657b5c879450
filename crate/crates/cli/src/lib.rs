//! Batch pipeline behind the `gyro` binary: prepare a cogwheel state, scan
//! the pump–probe delay, extract the precession frequency and dump densities.
//!
//! Every command writes plain-text artifacts into an output directory and
//! returns a short summary for standard output.

pub mod config;
pub mod statefile;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rotor_core::basis::{build_basis, RotorState, TRUNCATION_WARN_THRESHOLD};
use rotor_core::dynamics::{free_propagate, rabi_frequency, RamanDrive};
use rotor_core::explosion::{estimate_from_series, pump_probe_scan, read_scan_table, standard_detectors, state_at_delay, write_scan_table, PrecessionModel};
use rotor_core::harmonics::AngularGrid;
use rotor_core::observables::{angular_density, write_density_dump};
use rotor_core::preparation::{cogwheel_state, design_pulse, nominal_pulse, prepare_via_raman, CogwheelSpec};
use rotor_core::textio::format_number;
use rotor_core::RotorError;

pub use config::RunConfig;
use config::{EnvelopeKind, PulseDesign};

pub const STATE_FILE: &str = "state.txt";
pub const PREPARE_REPORT: &str = "prepare_report.toml";
pub const SCAN_FILE: &str = "scan.txt";
pub const ESTIMATE_FILE: &str = "estimate.toml";
pub const DENSITY_FILE: &str = "density.txt";

/// Basis cutoff when `[laser] j_max` is not given.
pub const DEFAULT_J_MAX: u32 = 8;

/// Prepared fidelity and leakage beyond these are reported as warnings.
pub const MIN_FIDELITY: f64 = 0.99;
pub const MAX_LEAKAGE: f64 = 0.01;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    /// A physics warning escalated by `--strict`.
    Strict(String),
    Estimation(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Strict(_) => 3,
            CliError::Estimation(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Strict(m) => write!(f, "warning escalated by --strict: {m}"),
            CliError::Estimation(m) => write!(f, "estimation failed: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<RotorError> for CliError {
    fn from(e: RotorError) -> Self {
        match e {
            RotorError::EstimationFailed(m) => CliError::Estimation(m),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Frame {
    /// Full evolution including the fast free rotation.
    Lab,
    /// Free rotation removed; only the precession remains.
    Corotating,
}

pub struct Outcome {
    pub summary: String,
    pub written: Vec<PathBuf>,
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Other(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::Other(format!("cannot read {}: {e}", path.display())))
}

fn escalate(warnings: &[String], strict: bool) -> Result<(), CliError> {
    if strict && !warnings.is_empty() {
        return Err(CliError::Strict(warnings.join("; ")));
    }
    Ok(())
}

pub fn prepare(cfg: &RunConfig, out: &Path, strict: bool, analytic: bool) -> Result<Outcome, CliError> {
    let mol = cfg.molecule()?;
    let laser = &cfg.laser;
    let j = laser.j_initial;
    let j_max = laser.j_max.unwrap_or(DEFAULT_J_MAX.max(j + 4));
    if j_max < j + 2 {
        return Err(CliError::Config(format!("[laser] `j_max` = {j_max} cannot hold |{},{}>", j + 2, j + 2)));
    }
    if !(laser.intensity_w_cm2 > 0.0) {
        return Err(CliError::Config(format!("[laser] `intensity_W_cm2` must be positive, got {}", laser.intensity_w_cm2)));
    }
    let basis = build_basis(j_max);
    let cfg_err = |e: RotorError| CliError::Config(format!("[laser] {e}"));
    let nominal = nominal_pulse(&mol, j, laser.intensity_w_cm2).map_err(cfg_err)?;
    let mut pulse = match laser.design {
        PulseDesign::Nominal => nominal,
        PulseDesign::Compensated => design_pulse(&mol, j, laser.intensity_w_cm2).map_err(cfg_err)?,
    };
    pulse.phi = laser.phi_rad;
    if let Some(d) = laser.detuning_mhz {
        pulse.omega0 += d * 1e6;
    }
    if laser.envelope == EnvelopeKind::Sin2 {
        pulse = pulse.with_sin2_ramp(laser.ramp_fraction).map_err(cfg_err)?;
    }
    let two_level = RamanDrive::new(&mol, &pulse, basis)?.two_level_model(j)?;

    let (state, fidelity, leakage, excited, azimuth, mut warnings) = if analytic {
        let s = cogwheel_state(&CogwheelSpec::new(j, 2, laser.phi_rad), basis)?;
        (s, 1.0, 0.0, 0.5, 0.0, Vec::new())
    } else {
        let initial = RotorState::eigenstate(basis, j, j as i32)?;
        let r = prepare_via_raman(&initial, &mol, &pulse, basis)?;
        (r.state, r.fidelity, r.leakage, r.excited_population, r.azimuth_offset, r.warnings)
    };
    if fidelity < MIN_FIDELITY {
        warnings.push(format!("fidelity {fidelity:.4} is below {MIN_FIDELITY}"));
    }
    if leakage > MAX_LEAKAGE {
        warnings.push(format!("leakage {leakage:.3e} exceeds {MAX_LEAKAGE}"));
    }
    escalate(&warnings, strict)?;

    prepare_dir(out)?;
    let state_path = out.join(STATE_FILE);
    write_file(&state_path, |w| statefile::write_state(&state, w))?;
    let report_path = out.join(PREPARE_REPORT);
    let rabi = rabi_frequency(&mol, &pulse, j);
    let mut report = String::new();
    report += &format!("molecule = \"{}\"\n", mol.name);
    report += &format!("mode = \"{}\"\n", if analytic { "analytic" } else { "propagated" });
    report += &format!("rabi_MHz = {}\n", format_number(rabi / 1e6));
    report += &format!("effective_rabi_MHz = {}\n", format_number(two_level.rabi / 1e6));
    report += &format!("light_shift_MHz = {}\n", format_number(two_level.light_shift / 1e6));
    report += &format!("nominal_duration_ns = {}\n", format_number(nominal.duration * 1e9));
    report += &format!("duration_ns = {}\n", format_number(pulse.duration * 1e9));
    report += &format!("omega0_GHz = {}\n", format_number(pulse.omega0 / 1e9));
    report += &format!("fidelity = {}\n", format_number(fidelity));
    report += &format!("azimuth_offset_rad = {}\n", format_number(azimuth));
    report += &format!("leakage = {}\n", format_number(leakage));
    report += &format!("excited_population = {}\n", format_number(excited));
    let quoted: Vec<String> = warnings.iter().map(|w| format!("{w:?}")).collect();
    report += &format!("warnings = [{}]\n", quoted.join(", "));
    write_file(&report_path, |w| w.write_all(report.as_bytes()))?;

    let mut summary = format!(
        "Rabi frequency {:.4} MHz, pulse {:.1} ns (nominal {:.1} ns), fidelity {:.6}, leakage {:.3e}",
        rabi / 1e6,
        pulse.duration * 1e9,
        nominal.duration * 1e9,
        fidelity,
        leakage
    );
    for w in &warnings {
        summary += &format!("\nwarning: {w}");
    }
    Ok(Outcome { summary, written: vec![state_path, report_path] })
}

pub fn scan(cfg: &RunConfig, state_path: &Path, out: &Path, seed: Option<u64>, strict: bool) -> Result<Outcome, CliError> {
    let mol = cfg.molecule()?;
    let field = cfg.field()?;
    let scan = cfg.scan_config(seed)?;
    let detectors = standard_detectors(cfg.half_angle()?).map_err(|e| CliError::Config(e.to_string()))?;
    let state = statefile::read_state(open(state_path)?)?;
    let mut warnings = Vec::new();
    if (state.norm_sqr() - 1.0).abs() > 1e-8 {
        return Err(CliError::Other(format!("state in {} has norm² {:.12}", state_path.display(), state.norm_sqr())));
    }
    if state.top_shell_population() > TRUNCATION_WARN_THRESHOLD {
        warnings.push(format!("state has population {:.3e} in the top two J shells", state.top_shell_population()));
    }
    escalate(&warnings, strict)?;
    let series = pump_probe_scan(&state, &mol, &field, &scan, &detectors)?;
    prepare_dir(out)?;
    let path = out.join(SCAN_FILE);
    write_file(&path, |w| write_scan_table(&series, w))?;
    Ok(Outcome { summary: format!("{} delays × {} shots written to {}", series.points.len(), scan.shots_per_delay, path.display()), written: vec![path] })
}

pub fn extract(cfg: &RunConfig, table_path: &Path, out: &Path, model: Option<PrecessionModel>) -> Result<Outcome, CliError> {
    let field = cfg.field()?;
    if field.magnitude == 0.0 {
        return Err(CliError::Config("[field] `B_tesla` must be positive to convert a frequency into g_r".into()));
    }
    let series = read_scan_table(open(table_path)?)?;
    let model = model.unwrap_or(if series.has_jvec() { PrecessionModel::Jvec } else { PrecessionModel::Detector });
    let est = estimate_from_series(&series, model, &field)?;
    prepare_dir(out)?;
    let path = out.join(ESTIMATE_FILE);
    let doc = est.to_document();
    write_file(&path, |w| w.write_all(doc.as_bytes()))?;
    let summary = format!(
        "|g_r| = {:.6} ± {:.6}  omega_p = {:.6} ± {:.6} MHz  sense {}  model {}",
        est.g_r_abs, est.g_r_sigma, est.omega_p_mhz, est.sigma_mhz, est.sense, model
    );
    Ok(Outcome { summary, written: vec![path] })
}

pub fn density(cfg: &RunConfig, state_path: &Path, out: &Path, evolve_us: Option<f64>, frame: Frame) -> Result<Outcome, CliError> {
    let (nt, np) = (cfg.output.density_theta, cfg.output.density_phi);
    if nt == 0 || np == 0 {
        return Err(CliError::Config("[output] density grid needs nodes in both directions".into()));
    }
    let mut state = statefile::read_state(open(state_path)?)?;
    if let Some(us) = evolve_us {
        if !us.is_finite() {
            return Err(CliError::Config(format!("evolution time must be finite, got {us}")));
        }
        let mol = cfg.molecule()?;
        let field = cfg.field()?;
        let t = us * 1e-6;
        state = state_at_delay(&state, &mol, &field, t)?;
        if frame == Frame::Corotating {
            // the free rotation commutes with the Zeeman term, so undo it exactly
            state = free_propagate(&state, &mol, -t);
        }
    }
    let map = angular_density(&state, &AngularGrid::new(nt, np));
    prepare_dir(out)?;
    let path = out.join(DENSITY_FILE);
    write_file(&path, |w| write_density_dump(&map, w))?;
    let (i, k) = map.argmax();
    let summary = format!(
        "{nt}×{np} density written to {}; maximum {:.6} at θ = {:.4}, φ = {:.4}",
        path.display(),
        map.value(i, k),
        map.grid().theta()[i],
        map.grid().phi()[k]
    );
    Ok(Outcome { summary, written: vec![path] })
}
