//! Cogwheel states, built analytically or by a simulated Raman pulse.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::basis::{RotorBasis, RotorState};
use crate::dynamics::{rabi_frequency, Envelope, MoleculeParams, PulseParams, RamanDrive};
use crate::error::{Result, RotorError};
use crate::optimize::golden_max;

/// `w|J,J> + √(1−w²) e^{−inφ}|J+n,J+n>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CogwheelSpec {
    pub j: u32,
    /// Number of teeth. Only n = 2 is reachable with a single Raman pulse.
    pub n: u32,
    pub phi: f64,
    /// Amplitude on |J,J>, in [0,1].
    pub weight: f64,
}

impl CogwheelSpec {
    pub fn new(j: u32, n: u32, phi: f64) -> Self {
        Self { j, n, phi, weight: FRAC_1_SQRT_2 }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn top(&self) -> u32 {
        self.j + self.n
    }

    pub fn validate(&self, basis: RotorBasis) -> Result<()> {
        if self.n == 0 {
            return Err(RotorError::InvalidCogwheel("n must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(RotorError::InvalidCogwheel(format!("weight {} outside [0,1]", self.weight)));
        }
        if !self.phi.is_finite() {
            return Err(RotorError::InvalidCogwheel("phi is not finite".into()));
        }
        if self.top() > basis.j_max() {
            return Err(RotorError::CogwheelOutsideBasis { j: self.j, top: self.top(), j_max: basis.j_max() });
        }
        Ok(())
    }
}

pub fn cogwheel_state(spec: &CogwheelSpec, basis: RotorBasis) -> Result<RotorState> {
    spec.validate(basis)?;
    let mut s = RotorState::zeros(basis);
    let w = spec.weight;
    let rest = (1.0 - w * w).max(0.0).sqrt();
    let top = spec.top();
    s.set_amplitude(spec.j, spec.j as i32, Complex64::new(w, 0.0))?;
    s.set_amplitude(top, top as i32, Complex64::from_polar(rest, -(spec.n as f64) * spec.phi))?;
    Ok(s)
}

/// Raman resonance ω₀ = B(4J+6) between |J,J> and |J+2,J+2>, Hz.
pub fn raman_resonance(molecule: &MoleculeParams, j: u32) -> f64 {
    molecule.b_rot * (4 * j + 6) as f64
}

/// The textbook quarter-cycle pulse: ω₀ = B(4J+6) and duration 1/(4Ω) with
/// Ω from [`rabi_frequency`].
pub fn nominal_pulse(molecule: &MoleculeParams, j: u32, intensity: f64) -> Result<PulseParams> {
    check_intensity(intensity)?;
    let mut pulse = PulseParams { intensity, omega0: raman_resonance(molecule, j), phi: 0.0, duration: 1.0, envelope: Envelope::Rectangular };
    pulse.duration = 1.0 / (4.0 * rabi_frequency(molecule, &pulse, j));
    Ok(pulse)
}

/// Equal-superposition pulse tuned on the actual two-level dynamics.
///
/// Starts from [`nominal_pulse`], moves ω₀ to cancel the differential light
/// shift of |J+2,J+2> relative to |J,J>, and sets the duration to a quarter
/// of the effective Rabi period. The shift is a few tenths of Ω, so ω₀ stays
/// within 1e-5 of B(4J+6) at realistic intensities.
pub fn design_pulse(molecule: &MoleculeParams, j: u32, intensity: f64) -> Result<PulseParams> {
    let mut pulse = nominal_pulse(molecule, j, intensity)?;
    let basis = RotorBasis::new(j + 2);
    let model = RamanDrive::new(molecule, &pulse, basis)?.two_level_model(j)?;
    // K_bb − K_aa contains −πω₀·2 so a shift of ω₀ by δ removes detuning δ.
    pulse.omega0 += model.detuning;
    pulse.duration = 1.0 / (4.0 * model.rabi);
    Ok(pulse)
}

fn check_intensity(intensity: f64) -> Result<()> {
    if !(intensity.is_finite() && intensity > 0.0) {
        return Err(RotorError::InvalidParameter(format!("intensity must be > 0, got {intensity}")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct PreparationReport {
    pub state: RotorState,
    /// |<target|R_z(offset) ...>|² maximized over the azimuth offset.
    pub fidelity: f64,
    /// Rotation about z taking the target onto the prepared state, in [0, 2π/n).
    pub azimuth_offset: f64,
    /// Population outside {|J,J>, |J+2,J+2>}.
    pub leakage: f64,
    /// Population outside the ΔJ = ΔM = +2 ladder starting at |J,J>.
    pub off_ladder: f64,
    pub excited_population: f64,
    pub max_top_shell_population: f64,
    pub warnings: Vec<String>,
}

/// Number of midpoint steps used for shaped envelopes. Rectangular pulses
/// are exact in a single step.
pub const SHAPED_PULSE_STEPS: usize = 4000;

/// Drives |J,J> with `pulse` and compares the result with the equal-weight
/// cogwheel of `n = 2` and `φ = pulse.phi`.
pub fn prepare_via_raman(initial: &RotorState, molecule: &MoleculeParams, pulse: &PulseParams, basis: RotorBasis) -> Result<PreparationReport> {
    let initial = initial.embed(basis)?;
    let j = stretched_level(&initial)?;
    if j + 2 > basis.j_max() {
        return Err(RotorError::CogwheelOutsideBasis { j, top: j + 2, j_max: basis.j_max() });
    }
    let mut warnings = Vec::new();
    let omega = rabi_frequency(molecule, pulse, j);
    let mismatch = (pulse.omega0 - raman_resonance(molecule, j)).abs();
    if mismatch > 10.0 * omega {
        warnings.push(format!(
            "difference frequency {:.6e} Hz is {:.3e} Hz from the J={j} resonance, more than 10 Rabi frequencies",
            pulse.omega0, mismatch
        ));
    }
    let drive = RamanDrive::new(molecule, pulse, basis)?;
    let steps = match pulse.envelope {
        Envelope::Rectangular => 1,
        Envelope::Sin2Ramp { .. } => SHAPED_PULSE_STEPS,
    };
    let (state, prop) = drive.propagate_pulse(&initial, steps)?;
    if prop.max_top_shell_population > crate::basis::TRUNCATION_WARN_THRESHOLD {
        warnings.push(format!("population {:.3e} reached the top two J shells", prop.max_top_shell_population));
    }
    let target = cogwheel_state(&CogwheelSpec::new(j, 2, pulse.phi), basis)?;
    let (fidelity, azimuth_offset) = fidelity_over_azimuth(&target, &state, 2)?;
    let pair = state.population(j, j as i32) + state.population(j + 2, j as i32 + 2);
    let ladder: f64 = (0..)
        .map(|k| j + 2 * k)
        .take_while(|&jj| jj <= basis.j_max())
        .map(|jj| state.population(jj, jj as i32))
        .sum();
    Ok(PreparationReport {
        fidelity,
        azimuth_offset,
        leakage: (state.norm_sqr() - pair).max(0.0),
        off_ladder: (state.norm_sqr() - ladder).max(0.0),
        excited_population: state.population(j + 2, j as i32 + 2),
        max_top_shell_population: prop.max_top_shell_population,
        state,
        warnings,
    })
}

fn stretched_level(state: &RotorState) -> Result<u32> {
    let basis = state.basis();
    let (mut best, mut best_p) = (0u32, -1.0);
    for j in 0..=basis.j_max() {
        let p = state.population(j, j as i32);
        if p > best_p {
            best = j;
            best_p = p;
        }
    }
    if (best_p - 1.0).abs() > 1e-10 {
        return Err(RotorError::NotStretchedState(best_p));
    }
    Ok(best)
}

/// `max_α |<R_z(α) target|state>|²` and the maximizing α, folded into
/// [0, 2π/period). `period` is the azimuthal symmetry order of the target.
pub fn fidelity_over_azimuth(target: &RotorState, state: &RotorState, period: u32) -> Result<(f64, f64)> {
    target.check_same_basis(state)?;
    // <R_z(α)t|s> = Σ_M e^{iMα} conj(t_M) s_M, grouped by M.
    let basis = target.basis();
    let j_max = basis.j_max() as i32;
    let mut by_m = vec![Complex64::new(0.0, 0.0); (2 * j_max + 1) as usize];
    for (i, _, m) in basis.levels() {
        by_m[(m + j_max) as usize] += target.amplitudes()[i].conj() * state.amplitudes()[i];
    }
    let overlap = |alpha: f64| -> f64 {
        by_m.iter()
            .enumerate()
            .map(|(k, c)| c * Complex64::from_polar(1.0, ((k as i32 - j_max) as f64) * alpha))
            .sum::<Complex64>()
            .norm_sqr()
    };
    let span = 2.0 * PI;
    let n = 720;
    let (mut best, mut best_v) = (0.0, f64::NEG_INFINITY);
    for k in 0..n {
        let a = span * k as f64 / n as f64;
        let v = overlap(a);
        if v > best_v {
            best = a;
            best_v = v;
        }
    }
    let step = span / n as f64;
    let alpha = golden_max(&overlap, best - step, best + step, 1e-13);
    let value = overlap(alpha).max(best_v);
    let fold = 2.0 * PI / period.max(1) as f64;
    Ok((value.min(1.0), alpha.rem_euclid(fold)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::dynamics::{quarter_cycle_duration, rwa_evolution};
    use approx::assert_abs_diff_eq;

    const REFERENCE_INTENSITY: f64 = 4.9e6;

    #[test]
    fn cogwheel_examples() {
        let b = build_basis(4);
        let s = cogwheel_state(&CogwheelSpec::new(0, 2, PI / 6.0), b).unwrap();
        assert_abs_diff_eq!(s.amplitude(0, 0).re, FRAC_1_SQRT_2, epsilon = 1e-15);
        let c = s.amplitude(2, 2);
        assert_abs_diff_eq!(c.re, FRAC_1_SQRT_2 * (PI / 3.0).cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.im, -FRAC_1_SQRT_2 * (PI / 3.0).sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-15);
        let pure = cogwheel_state(&CogwheelSpec::new(0, 2, 0.0).with_weight(1.0), b).unwrap();
        assert_eq!(pure, RotorState::eigenstate(b, 0, 0).unwrap());
        assert!(matches!(
            cogwheel_state(&CogwheelSpec::new(3, 2, 0.0), b),
            Err(RotorError::CogwheelOutsideBasis { .. })
        ));
    }

    #[test]
    fn nominal_pulse_examples() {
        let mol = MoleculeParams::no2_plus();
        let p = nominal_pulse(&mol, 0, REFERENCE_INTENSITY).unwrap();
        assert_abs_diff_eq!(p.omega0, 75e9, epsilon = 1e-3);
        assert!((p.duration / 250e-9 - 1.0).abs() < 0.02);
        assert_abs_diff_eq!(raman_resonance(&mol, 1), 125e9, epsilon = 1e-3);
        assert_abs_diff_eq!(quarter_cycle_duration(1e6), 250e-9, epsilon = 1e-18);
        assert!(design_pulse(&mol, 0, 0.0).is_err());
    }

    #[test]
    fn designed_pulse_stays_near_resonance() {
        let mol = MoleculeParams::no2_plus();
        let p = design_pulse(&mol, 0, REFERENCE_INTENSITY).unwrap();
        assert!((p.omega0 / 75e9 - 1.0).abs() < 1e-5, "{}", p.omega0);
        let model = RamanDrive::new(&mol, &p, build_basis(2)).unwrap().two_level_model(0).unwrap();
        assert!(model.detuning.abs() < 1e-3 * model.rabi);
    }

    #[test]
    fn reference_pulse_prepares_cogwheel() {
        let mol = MoleculeParams::no2_plus();
        let b = build_basis(8);
        let pulse = design_pulse(&mol, 0, REFERENCE_INTENSITY).unwrap();
        let r = prepare_via_raman(&RotorState::eigenstate(b, 0, 0).unwrap(), &mol, &pulse, b).unwrap();
        assert!(r.fidelity >= 0.99, "{}", r.fidelity);
        assert!(r.leakage <= 0.01, "{}", r.leakage);
        assert!(r.off_ladder < 1e-3);
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        assert_abs_diff_eq!(r.state.norm_sqr(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn zero_intensity_leaves_ground_state() {
        let mol = MoleculeParams::no2_plus();
        let b = build_basis(4);
        let mut pulse = nominal_pulse(&mol, 0, REFERENCE_INTENSITY).unwrap();
        pulse.intensity = 0.0;
        let g = RotorState::eigenstate(b, 0, 0).unwrap();
        let r = prepare_via_raman(&g, &mol, &pulse, b).unwrap();
        assert_abs_diff_eq!(r.fidelity, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.state.population(0, 0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn detuning_follows_two_level_model() {
        let mol = MoleculeParams::no2_plus();
        let b = build_basis(6);
        let base = design_pulse(&mol, 0, REFERENCE_INTENSITY).unwrap();
        let g = RotorState::eigenstate(b, 0, 0).unwrap();
        let drive = RamanDrive::new(&mol, &base, b).unwrap();
        let rabi = drive.two_level_model(0).unwrap().rabi;
        let mut last = f64::INFINITY;
        for frac in [0.0, 0.5, 1.0] {
            let delta = frac * rabi;
            // raising ω₀ by x lowers the two-level detuning by x
            let pulse = PulseParams { omega0: base.omega0 - delta, ..base };
            let r = prepare_via_raman(&g, &mol, &pulse, b).unwrap();
            let m = RamanDrive::new(&mol, &pulse, b).unwrap().two_level_model(0).unwrap();
            let rwa = rwa_evolution([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], m.rabi, m.detuning, pulse.duration);
            assert!((r.excited_population - rwa[1].norm_sqr()).abs() < 0.05 * rwa[1].norm_sqr(), "{frac}");
            assert!(r.fidelity <= last + 1e-12);
            last = r.fidelity;
        }
    }

    #[test]
    fn far_detuned_pulse_warns() {
        let mol = MoleculeParams::no2_plus();
        let b = build_basis(4);
        let mut pulse = design_pulse(&mol, 0, REFERENCE_INTENSITY).unwrap();
        pulse.omega0 = raman_resonance(&mol, 1);
        let r = prepare_via_raman(&RotorState::eigenstate(b, 0, 0).unwrap(), &mol, &pulse, b).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn rejects_non_stretched_initial_state() {
        let mol = MoleculeParams::no2_plus();
        let b = build_basis(4);
        let pulse = design_pulse(&mol, 0, REFERENCE_INTENSITY).unwrap();
        let s = cogwheel_state(&CogwheelSpec::new(0, 2, 0.0), b).unwrap();
        assert!(matches!(prepare_via_raman(&s, &mol, &pulse, b), Err(RotorError::NotStretchedState(_))));
    }

    #[test]
    fn azimuth_fidelity_recovers_rotation() {
        let b = build_basis(3);
        let t = cogwheel_state(&CogwheelSpec::new(0, 2, 0.0), b).unwrap();
        let s = cogwheel_state(&CogwheelSpec::new(0, 2, 0.4), b).unwrap();
        let (f, a) = fidelity_over_azimuth(&t, &s, 2).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a, 0.4, epsilon = 1e-7);
    }
}
