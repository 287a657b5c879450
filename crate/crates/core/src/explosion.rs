//! Simulated Coulomb-explosion pump–probe measurement of the precession.
//!
//! Fragments fly along the molecular axis (axial recoil), so a detector cap
//! records the angular density integrated over the cap. Each delay draws its
//! counts from an RNG stream fixed by (seed, delay index), so a scan is
//! reproducible regardless of thread count.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::basis::RotorState;
use crate::constants::CODATA_2018;
use crate::density::SphericalDensity;
use crate::dynamics::{generic_propagate, magnetic_hamiltonian, magnetic_propagate_closed, MagneticField, MoleculeParams};
use crate::error::{Result, RotorError};
use crate::fitting::{fit_sinusoid, SinusoidFit};
use crate::observables::{expectation_j, plane_normal};
use crate::operators::check_unit_axis;
use crate::textio::{format_number, read_table, write_row};

pub const DEFAULT_HALF_ANGLE_DEG: f64 = 20.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorGeometry {
    pub label: String,
    pub axis: Vector3<f64>,
    /// Cap half-angle, rad, in (0, π/2).
    pub half_angle: f64,
    /// Also accept the opposite cap about −axis.
    pub double_sided: bool,
}

impl DetectorGeometry {
    pub fn new(label: impl Into<String>, axis: Vector3<f64>, half_angle: f64, double_sided: bool) -> Result<Self> {
        let label = label.into();
        check_unit_axis(&axis)?;
        if !(half_angle > 0.0 && half_angle < PI / 2.0) {
            return Err(RotorError::InvalidParameter(format!("detector {label}: half-angle {half_angle} rad outside (0, π/2)")));
        }
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(RotorError::InvalidParameter(format!("detector label {label:?} must be a single non-empty word")));
        }
        Ok(Self { label, axis, half_angle, double_sided })
    }

    pub fn contains(&self, direction: &Vector3<f64>) -> bool {
        let c = direction.dot(&self.axis) / direction.norm();
        let limit = self.half_angle.cos();
        c >= limit || (self.double_sided && -c >= limit)
    }

    /// Fraction of the density inside the cap(s).
    pub fn probability(&self, density: &SphericalDensity) -> f64 {
        let mut p = density.cap_integral(&self.axis, self.half_angle);
        if self.double_sided {
            p += density.cap_integral(&(-self.axis), self.half_angle);
        }
        p.clamp(0.0, 1.0)
    }
}

/// D1: caps about ±x̂, D2: caps about ±ẑ, both with `half_angle` (rad).
pub fn standard_detectors(half_angle: f64) -> Result<Vec<DetectorGeometry>> {
    Ok(vec![
        DetectorGeometry::new("D1", Vector3::x(), half_angle, true)?,
        DetectorGeometry::new("D2", Vector3::z(), half_angle, true)?,
    ])
}

pub fn default_detectors() -> Vec<DetectorGeometry> {
    standard_detectors(DEFAULT_HALF_ANGLE_DEG.to_radians()).expect("default geometry is valid")
}

pub fn hit_probability(state: &RotorState, detector: &DetectorGeometry) -> f64 {
    detector.probability(&SphericalDensity::from_state(state))
}

/// `n` fragment directions drawn from the angular density of `state`.
pub fn sample_explosions(state: &RotorState, n: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SphericalDensity::from_state(state).sample(n, &mut rng)
}

/// How the probe treats the picosecond free rotation of the wavepacket.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FastPhase {
    /// Density at the exact delay.
    Exact,
    /// Density averaged over the fast rotation phase.
    Randomized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShotMode {
    /// One binomial draw per detector from the analytic probability.
    Binomial,
    /// Every shot sampled as a direction and tested against each detector.
    PerShot,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    /// Seconds, strictly increasing.
    pub delays: Vec<f64>,
    pub shots_per_delay: u64,
    pub rng_seed: u64,
    /// Seconds.
    pub decoherence_tau: Option<f64>,
    pub fast_phase: FastPhase,
    pub shot_mode: ShotMode,
}

impl ScanConfig {
    /// `n` delays evenly spaced on [0, t_max].
    pub fn evenly_spaced(t_max: f64, n: usize, shots_per_delay: u64, rng_seed: u64) -> Result<Self> {
        if n < 2 || !(t_max > 0.0) {
            return Err(RotorError::InvalidParameter(format!("need at least 2 delays over a positive span, got {n} over {t_max} s")));
        }
        let delays = (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect();
        let cfg = Self { delays, shots_per_delay, rng_seed, decoherence_tau: None, fast_phase: FastPhase::Randomized, shot_mode: ShotMode::Binomial };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delays.is_empty() {
            return Err(RotorError::InvalidParameter("scan needs at least one delay".into()));
        }
        if self.delays.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(RotorError::InvalidParameter("delays must be finite and non-negative".into()));
        }
        if self.delays.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RotorError::InvalidParameter("delays must be strictly increasing".into()));
        }
        if self.shots_per_delay == 0 {
            return Err(RotorError::InvalidParameter("shots per delay must be positive".into()));
        }
        if let Some(tau) = self.decoherence_tau {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(RotorError::InvalidParameter(format!("decoherence time must be positive, got {tau}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanPoint {
    pub delay: f64,
    /// One per detector, in detector order.
    pub probabilities: Vec<f64>,
    pub counts: Vec<u64>,
    pub j: Vector3<f64>,
    pub normal: Option<Vector3<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanSeries {
    pub detectors: Vec<String>,
    /// Unknown when the series was read back from a table.
    pub shots_per_delay: Option<u64>,
    pub points: Vec<ScanPoint>,
}

impl ScanSeries {
    pub fn delays(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delay).collect()
    }

    pub fn probabilities(&self, detector: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.probabilities[detector]).collect()
    }

    pub fn counts(&self, detector: usize) -> Vec<u64> {
        self.points.iter().map(|p| p.counts[detector]).collect()
    }

    pub fn j_component(&self, axis: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.j[axis]).collect()
    }

    pub fn has_jvec(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.j.iter().all(|x| x.is_finite()))
    }
}

/// State after free rotation plus precession for `t`, using the closed form
/// when the field lies along ±ŷ.
pub fn state_at_delay(initial: &RotorState, molecule: &MoleculeParams, field: &MagneticField, t: f64) -> Result<RotorState> {
    match magnetic_propagate_closed(initial, molecule, field, t) {
        Err(RotorError::FieldNotAlongY { .. }) => {
            if t == 0.0 {
                return Ok(initial.clone());
            }
            let h = magnetic_hamiltonian(molecule, field, initial.basis());
            // H is constant, so one midpoint step is exact
            Ok(generic_propagate(initial, |_| h.clone(), 0.0, t, t)?.0)
        }
        other => other,
    }
}

/// Density seen by the probe at delay `t`: fast-phase treatment, then
/// exponential relaxation toward the average about the field axis.
pub fn detection_density(state: &RotorState, field: &MagneticField, t: f64, scan: &ScanConfig) -> SphericalDensity {
    let rho = match scan.fast_phase {
        FastPhase::Exact => SphericalDensity::from_state(state),
        FastPhase::Randomized => SphericalDensity::shell_incoherent_from_state(state),
    };
    match scan.decoherence_tau {
        Some(tau) => {
            let w = 1.0 - (-t / tau).exp();
            rho.mix(&rho.azimuthal_average(&field.axis), w)
        }
        None => rho,
    }
}

pub fn pump_probe_scan(
    initial: &RotorState,
    molecule: &MoleculeParams,
    field: &MagneticField,
    scan: &ScanConfig,
    detectors: &[DetectorGeometry],
) -> Result<ScanSeries> {
    scan.validate()?;
    if detectors.is_empty() {
        return Err(RotorError::InvalidParameter("scan needs at least one detector".into()));
    }
    if (initial.norm_sqr() - 1.0).abs() > 1e-8 {
        return Err(RotorError::InvalidParameter(format!("initial state has norm² {}", initial.norm_sqr())));
    }
    let points = scan
        .delays
        .par_iter()
        .enumerate()
        .map(|(index, &t)| -> Result<ScanPoint> {
            let state = state_at_delay(initial, molecule, field, t)?;
            let rho = detection_density(&state, field, t, scan);
            let probabilities: Vec<f64> = detectors.iter().map(|d| d.probability(&rho)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(scan.rng_seed);
            rng.set_stream(index as u64);
            let counts = match scan.shot_mode {
                ShotMode::Binomial => probabilities
                    .iter()
                    .map(|&p| Binomial::new(scan.shots_per_delay, p).expect("probability clamped to [0,1]").sample(&mut rng))
                    .collect(),
                ShotMode::PerShot => {
                    let dirs = rho.sample(scan.shots_per_delay as usize, &mut rng);
                    detectors.iter().map(|d| dirs.iter().filter(|n| d.contains(n)).count() as u64).collect()
                }
            };
            let normal = plane_normal(&SphericalDensity::shell_incoherent_from_state(&state)).0;
            Ok(ScanPoint { delay: t, probabilities, counts, j: expectation_j(&state), normal })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanSeries { detectors: detectors.iter().map(|d| d.label.clone()).collect(), shots_per_delay: Some(scan.shots_per_delay), points })
}

/// Header `delay_s <D>_prob <D>_counts ... jx jy jz nx ny nz`.
pub fn write_scan_table<W: Write>(series: &ScanSeries, out: &mut W) -> std::io::Result<()> {
    let mut header = vec!["delay_s".to_string()];
    for d in &series.detectors {
        header.push(format!("{d}_prob"));
        header.push(format!("{d}_counts"));
    }
    header.extend(["jx", "jy", "jz", "nx", "ny", "nz"].map(String::from));
    writeln!(out, "{}", header.join(" "))?;
    for p in &series.points {
        let mut row = vec![format_number(p.delay)];
        for (prob, count) in p.probabilities.iter().zip(&p.counts) {
            row.push(format_number(*prob));
            row.push(count.to_string());
        }
        row.extend(p.j.iter().map(|x| format_number(*x)));
        match p.normal {
            Some(n) => row.extend(n.iter().map(|x| format_number(*x))),
            None => row.extend(std::iter::repeat_n("NaN".to_string(), 3)),
        }
        write_row(out, &row)?;
    }
    Ok(())
}

pub fn read_scan_table<R: BufRead>(input: R) -> Result<ScanSeries> {
    let table = read_table(input)?;
    let h = &table.header;
    let parse_err = |message: String| RotorError::Parse { line: 1, message };
    if h.first().map(String::as_str) != Some("delay_s") {
        return Err(parse_err("first column must be delay_s".into()));
    }
    let mut detectors = Vec::new();
    let mut col = 1;
    while col + 1 < h.len() && h[col].ends_with("_prob") {
        let label = h[col].trim_end_matches("_prob");
        if h[col + 1] != format!("{label}_counts") {
            return Err(parse_err(format!("column {:?} must follow {:?}", format!("{label}_counts"), h[col])));
        }
        detectors.push(label.to_string());
        col += 2;
    }
    let rest: Vec<&str> = h[col..].iter().map(String::as_str).collect();
    let has_j = match rest.as_slice() {
        [] => false,
        ["jx", "jy", "jz", "nx", "ny", "nz"] => true,
        other => return Err(parse_err(format!("unexpected trailing columns {other:?}"))),
    };
    let mut points = Vec::with_capacity(table.rows.len());
    for (r, row) in table.rows.iter().enumerate() {
        let counts = (0..detectors.len())
            .map(|k| {
                let c = row[2 + 2 * k];
                if c >= 0.0 && c.fract() == 0.0 {
                    Ok(c as u64)
                } else {
                    Err(RotorError::Parse { line: r + 2, message: format!("count {c} is not a non-negative integer") })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let probabilities = (0..detectors.len()).map(|k| row[1 + 2 * k]).collect();
        let (j, normal) = if has_j {
            let j = Vector3::new(row[col], row[col + 1], row[col + 2]);
            let n = Vector3::new(row[col + 3], row[col + 4], row[col + 5]);
            (j, if n.iter().all(|x| x.is_finite()) { Some(n) } else { None })
        } else {
            (Vector3::repeat(f64::NAN), None)
        };
        points.push(ScanPoint { delay: row[0], probabilities, counts, j, normal });
    }
    Ok(ScanSeries { detectors, shots_per_delay: None, points })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecessionModel {
    /// Fit one component of <J>(t) at the precession frequency.
    Jvec,
    /// Fit detector counts at twice the precession frequency.
    Detector,
}

impl fmt::Display for PrecessionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrecessionModel::Jvec => "jvec",
            PrecessionModel::Detector => "detector",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrecessionEstimate {
    /// |ω_p|, Hz.
    pub omega_p: f64,
    /// Hz.
    pub sigma: f64,
    pub residual: f64,
    pub model: PrecessionModel,
    /// Per-signal fits that entered the estimate.
    pub fits: Vec<(String, SinusoidFit)>,
}

/// Below this fraction of the largest <J> component variance, J_z is
/// considered flat and the most variable component is fitted instead.
const FLAT_COMPONENT: f64 = 1e-3;

pub fn extract_precession(series: &ScanSeries, model: PrecessionModel) -> Result<PrecessionEstimate> {
    let t = series.delays();
    match model {
        PrecessionModel::Jvec => {
            if !series.has_jvec() {
                return Err(RotorError::EstimationFailed("series has no <J> columns".into()));
            }
            let variance = |v: &[f64]| {
                let m = v.iter().sum::<f64>() / v.len() as f64;
                v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
            };
            let comps: Vec<Vec<f64>> = (0..3).map(|k| series.j_component(k)).collect();
            let vars: Vec<f64> = comps.iter().map(|c| variance(c)).collect();
            let vmax = vars.iter().cloned().fold(0.0, f64::max);
            let axis = if vars[2] >= FLAT_COMPONENT * vmax { 2 } else { (0..3).max_by(|&a, &b| vars[a].total_cmp(&vars[b])).expect("three components") };
            let fit = fit_sinusoid(&t, &comps[axis], None)?;
            let name = ["jx", "jy", "jz"][axis].to_string();
            Ok(PrecessionEstimate { omega_p: fit.frequency, sigma: fit.sigma_frequency, residual: fit.residual_norm, model, fits: vec![(name, fit)] })
        }
        PrecessionModel::Detector => {
            let mut fits = Vec::new();
            let mut failures = Vec::new();
            for (k, label) in series.detectors.iter().enumerate() {
                let counts: Vec<f64> = series.counts(k).into_iter().map(|c| c as f64).collect();
                let result = match series.shots_per_delay {
                    Some(n) => {
                        let n = n as f64;
                        let y: Vec<f64> = counts.iter().map(|c| c / n).collect();
                        let w: Vec<f64> = y.iter().map(|&p| n / (p * (1.0 - p)).max(1.0 / n)).collect();
                        fit_sinusoid(&t, &y, Some(&w))
                    }
                    None => fit_sinusoid(&t, &counts, None),
                };
                match result {
                    Ok(f) => fits.push((label.clone(), f)),
                    Err(e) => failures.push(format!("{label}: {e}")),
                }
            }
            if fits.is_empty() {
                return Err(RotorError::EstimationFailed(format!("no detector signal could be fitted ({})", failures.join("; "))));
            }
            // inverse-variance combination of the fundamentals
            let mut num = 0.0;
            let mut den = 0.0;
            for (_, f) in &fits {
                let w = 1.0 / f.sigma_frequency.max(f64::MIN_POSITIVE).powi(2);
                num += w * f.frequency;
                den += w;
            }
            let fundamental = num / den;
            let residual = fits.iter().map(|(_, f)| f.residual_norm.powi(2)).sum::<f64>().sqrt();
            Ok(PrecessionEstimate { omega_p: fundamental / 2.0, sigma: 0.5 / den.sqrt(), residual, model, fits })
        }
    }
}

/// Sense of rotation about the field axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    /// Right-handed about +axis; corresponds to g_r < 0.
    Counterclockwise,
    Clockwise,
    Unsigned,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Counterclockwise => "counterclockwise",
            Sense::Clockwise => "clockwise",
            Sense::Unsigned => "unsigned",
        })
    }
}

/// Sign of `Σ (J_k × J_{k+1})·axis` over consecutive delays. Assumes the
/// delay step is below half a precession period.
pub fn precession_sense(series: &ScanSeries, axis: &Vector3<f64>) -> Sense {
    if !series.has_jvec() {
        return Sense::Unsigned;
    }
    let mut s = 0.0;
    let mut scale = 0.0;
    for w in series.points.windows(2) {
        s += w[0].j.cross(&w[1].j).dot(axis);
        scale += w[0].j.norm() * w[1].j.norm();
    }
    if s.abs() <= 1e-9 * scale.max(f64::MIN_POSITIVE) {
        Sense::Unsigned
    } else if s > 0.0 {
        Sense::Counterclockwise
    } else {
        Sense::Clockwise
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GFactorEstimate {
    pub omega_p_mhz: f64,
    pub sigma_mhz: f64,
    pub g_r_abs: f64,
    pub g_r_sigma: f64,
    pub sense: Sense,
    pub residual: f64,
    pub model: Option<PrecessionModel>,
}

impl GFactorEstimate {
    /// g_r with the sign implied by the sense, when known.
    pub fn g_r_signed(&self) -> Option<f64> {
        match self.sense {
            Sense::Counterclockwise => Some(-self.g_r_abs),
            Sense::Clockwise => Some(self.g_r_abs),
            Sense::Unsigned => None,
        }
    }

    /// `key = value` document.
    pub fn to_document(&self) -> String {
        let mut s = String::new();
        s += &format!("omega_p_MHz = {}\n", format_number(self.omega_p_mhz));
        s += &format!("sigma_MHz = {}\n", format_number(self.sigma_mhz));
        s += &format!("g_r_abs = {}\n", format_number(self.g_r_abs));
        s += &format!("g_r_sigma = {}\n", format_number(self.g_r_sigma));
        s += &format!("sense = \"{}\"\n", self.sense);
        s += &format!("residual = {}\n", format_number(self.residual));
        if let Some(m) = self.model {
            s += &format!("model = \"{m}\"\n");
        }
        s
    }
}

/// `|g_r| = |ω_p| / ((μ_N/h)|B|)` with the uncertainty propagated linearly.
pub fn estimate_g_factor(omega_p_hz: f64, sigma_hz: f64, field: &MagneticField, sense: Sense) -> Result<GFactorEstimate> {
    if !(field.magnitude > 0.0) {
        return Err(RotorError::InvalidParameter("g factor needs a nonzero field".into()));
    }
    if !(sigma_hz >= 0.0) {
        return Err(RotorError::InvalidParameter(format!("uncertainty must be >= 0, got {sigma_hz}")));
    }
    let per_unit = CODATA_2018.nuclear_magneton_over_h() * field.magnitude;
    Ok(GFactorEstimate {
        omega_p_mhz: omega_p_hz.abs() / 1e6,
        sigma_mhz: sigma_hz / 1e6,
        g_r_abs: omega_p_hz.abs() / per_unit,
        g_r_sigma: sigma_hz / per_unit,
        sense,
        residual: 0.0,
        model: None,
    })
}

/// Fit plus conversion: the usual tail of a scan.
pub fn estimate_from_series(series: &ScanSeries, model: PrecessionModel, field: &MagneticField) -> Result<GFactorEstimate> {
    let p = extract_precession(series, model)?;
    let mut g = estimate_g_factor(p.omega_p, p.sigma, field, precession_sense(series, &field.axis))?;
    g.residual = p.residual;
    g.model = Some(model);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::dynamics::precession_frequency;
    use crate::preparation::{cogwheel_state, CogwheelSpec};
    use approx::assert_abs_diff_eq;

    fn cog() -> RotorState {
        cogwheel_state(&CogwheelSpec::new(0, 2, 0.0), build_basis(8)).unwrap()
    }

    #[test]
    fn uniform_cap_fraction() {
        let g = RotorState::eigenstate(build_basis(2), 0, 0).unwrap();
        let d = DetectorGeometry::new("D", Vector3::z(), 30f64.to_radians(), true).unwrap();
        assert_abs_diff_eq!(hit_probability(&g, &d), 1.0 - 30f64.to_radians().cos(), epsilon = 1e-12);
        let wide = DetectorGeometry::new("W", Vector3::z(), PI / 2.0 - 1e-9, true).unwrap();
        assert_abs_diff_eq!(hit_probability(&g, &wide), 1.0, epsilon = 1e-8);
        assert!(DetectorGeometry::new("X", Vector3::z(), PI / 2.0, true).is_err());
        assert!(DetectorGeometry::new("X", Vector3::new(1.0, 1.0, 0.0), 0.3, true).is_err());
    }

    #[test]
    fn teeth_hit_x_detector() {
        let dets = default_detectors();
        let s = cog();
        assert!(hit_probability(&s, &dets[0]) > hit_probability(&s, &dets[1]));
    }

    #[test]
    fn samples_are_reproducible_and_isotropic() {
        let g = RotorState::eigenstate(build_basis(2), 0, 0).unwrap();
        let a = sample_explosions(&g, 1000, 5);
        assert_eq!(a, sample_explosions(&g, 1000, 5));
        let n = 200_000;
        let s = sample_explosions(&g, n, 9);
        let mean: f64 = s.iter().map(|v| v.z * v.z).sum::<f64>() / n as f64;
        // var(cos²θ) = 1/5 − 1/9 for uniform directions
        let se = ((0.2 - 1.0 / 9.0) / n as f64).sqrt();
        assert!((mean - 1.0 / 3.0).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn scan_is_reproducible_and_order_independent() {
        let mol = MoleculeParams::no2_plus();
        let field = MagneticField::along_y(1.0).unwrap();
        let scan = ScanConfig::evenly_spaced(2e-6, 12, 1000, 42).unwrap();
        let a = pump_probe_scan(&cog(), &mol, &field, &scan, &default_detectors()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| pump_probe_scan(&cog(), &mol, &field, &scan, &default_detectors()).unwrap());
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_scan_table(&a, &mut buf).unwrap();
        let back = read_scan_table(buf.as_slice()).unwrap();
        assert_eq!(back.points.len(), 12);
        assert_eq!(back.counts(1), a.counts(1));
        let mut again = Vec::new();
        write_scan_table(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn zero_field_keeps_j() {
        let mol = MoleculeParams::no2_plus();
        let field = MagneticField::along_y(0.0).unwrap();
        let scan = ScanConfig::evenly_spaced(2e-6, 8, 100, 1).unwrap();
        let s = pump_probe_scan(&cog(), &mol, &field, &scan, &default_detectors()).unwrap();
        for p in &s.points {
            assert!((p.j - s.points[0].j).norm() < 1e-12);
        }
    }

    #[test]
    fn detector_signal_runs_at_twice_the_precession() {
        // per-shot sampling with a free frequency fit, no factor assumed
        let mol = MoleculeParams::no2_plus();
        let field = MagneticField::along_y(1.0).unwrap();
        let wp = precession_frequency(&mol, &field).abs();
        let mut scan = ScanConfig::evenly_spaced(2.0 / wp, 48, 4000, 3).unwrap();
        scan.shot_mode = ShotMode::PerShot;
        let s = pump_probe_scan(&cog(), &mol, &field, &scan, &default_detectors()).unwrap();
        for k in 0..2 {
            let y: Vec<f64> = s.counts(k).into_iter().map(|c| c as f64 / 4000.0).collect();
            let fit = fit_sinusoid(&s.delays(), &y, None).unwrap();
            assert!((fit.frequency / (2.0 * wp) - 1.0).abs() < 0.02, "{}", fit.frequency / wp);
        }
        // D1 and D2 are anti-phased
        let p1 = s.probabilities(0);
        let p2 = s.probabilities(1);
        let m1 = p1.iter().sum::<f64>() / p1.len() as f64;
        let m2 = p2.iter().sum::<f64>() / p2.len() as f64;
        let cov: f64 = p1.iter().zip(&p2).map(|(a, b)| (a - m1) * (b - m2)).sum();
        assert!(cov < 0.0);
    }

    #[test]
    fn decoherence_scales_contrast() {
        let mol = MoleculeParams::no2_plus();
        let field = MagneticField::along_y(1.0).unwrap();
        let tau = 500e-6;
        let mut scan = ScanConfig::evenly_spaced(1e-6, 2, 10, 0).unwrap();
        scan.decoherence_tau = Some(tau);
        let state = state_at_delay(&cog(), &mol, &field, tau).unwrap();
        let dets = default_detectors();
        let coherent = SphericalDensity::shell_incoherent_from_state(&state);
        let mixed = detection_density(&state, &field, tau, &scan);
        let c0 = dets[0].probability(&coherent) - dets[1].probability(&coherent);
        let c1 = dets[0].probability(&mixed) - dets[1].probability(&mixed);
        assert_abs_diff_eq!(c1 / c0, (-1.0f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn g_factor_examples() {
        let f1 = MagneticField::along_y(1.0).unwrap();
        let g = estimate_g_factor(0.2798e6, 0.0, &f1, Sense::Unsigned).unwrap();
        assert!((g.g_r_abs / 0.0367 - 1.0).abs() < 0.003);
        assert_eq!(estimate_g_factor(0.0, 0.0, &f1, Sense::Unsigned).unwrap().g_r_abs, 0.0);
        let half = estimate_g_factor(0.1399e6, 0.0, &MagneticField::along_y(0.5).unwrap(), Sense::Unsigned).unwrap();
        assert_abs_diff_eq!(half.g_r_abs, g.g_r_abs, epsilon = 1e-12);
        assert!(estimate_g_factor(1.0, 0.0, &MagneticField::along_y(0.0).unwrap(), Sense::Unsigned).is_err());
    }

    #[test]
    fn jvec_extraction_and_sense() {
        let mol = MoleculeParams::no2_plus();
        let field = MagneticField::along_y(1.0).unwrap();
        let wp = precession_frequency(&mol, &field);
        let scan = ScanConfig::evenly_spaced(8e-6, 64, 100, 2).unwrap();
        let s = pump_probe_scan(&cog(), &mol, &field, &scan, &default_detectors()).unwrap();
        let est = estimate_from_series(&s, PrecessionModel::Jvec, &field).unwrap();
        assert!((est.omega_p_mhz * 1e6 / wp.abs() - 1.0).abs() < 1e-3);
        assert_eq!(est.sense, Sense::Counterclockwise);
        assert!(est.g_r_signed().unwrap() < 0.0);
        let flipped = MoleculeParams { g_r: 0.0367, ..mol };
        let s2 = pump_probe_scan(&cog(), &flipped, &field, &scan, &default_detectors()).unwrap();
        assert_eq!(precession_sense(&s2, &field.axis), Sense::Clockwise);
        assert!(est.to_document().contains("model = \"jvec\""));
    }

    #[test]
    fn constant_series_fails() {
        let mol = MoleculeParams::no2_plus();
        let field = MagneticField::along_y(0.0).unwrap();
        let scan = ScanConfig::evenly_spaced(8e-6, 16, 10_000, 2).unwrap();
        let s = pump_probe_scan(&cog(), &mol, &field, &scan, &default_detectors()).unwrap();
        assert!(matches!(extract_precession(&s, PrecessionModel::Jvec), Err(RotorError::EstimationFailed(_))));
    }

    #[test]
    fn non_y_field_uses_numeric_propagation() {
        let mol = MoleculeParams::no2_plus();
        let axis = Vector3::new(0.0, 0.6, 0.8);
        let field = MagneticField::new(1.0, axis).unwrap();
        let t = 1.1e-6;
        let out = state_at_delay(&cog(), &mol, &field, t).unwrap();
        // <J> precesses about the field axis: its projection is conserved
        let j0 = expectation_j(&cog());
        let j1 = expectation_j(&out);
        assert_abs_diff_eq!(j0.dot(&axis), j1.dot(&axis), epsilon = 1e-9);
        assert_abs_diff_eq!(j0.norm(), j1.norm(), epsilon = 1e-9);
        assert!((j0 - j1).norm() > 0.1);
    }
}
