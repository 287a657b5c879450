//! Hamiltonians and propagators: free rotation, magnetic precession (closed
//! form and numerical), the two-beam Raman drive, and the two-level RWA model.
//!
//! All Hamiltonians are angular frequencies (rad/s, ħ = 1). Parameters given
//! as frequencies (B, Ω, ω₀, ω_p) are cyclic, in Hz.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};
use num_complex::Complex64;

use crate::basis::{RotorBasis, RotorState};
use crate::constants::{PhysicalConstants, CODATA_2018};
use crate::error::{Result, RotorError};
use crate::operators::{check_unit_axis, cos2_matrix_element, op_angular, symmetric_tensor_ops, AngularKind, DirectionTensor, Operator};
use crate::rotation::Rotation;

/// Per-species input record.
#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeParams {
    pub name: String,
    /// Rotational constant B, Hz.
    pub b_rot: f64,
    /// Polarizability anisotropy α∥ − α⊥, Å³.
    pub delta_alpha: f64,
    /// Rotational g factor (signed).
    pub g_r: f64,
}

impl MoleculeParams {
    pub fn new(name: impl Into<String>, b_rot: f64, delta_alpha: f64, g_r: f64) -> Result<Self> {
        if !(b_rot.is_finite() && b_rot > 0.0) {
            return Err(RotorError::InvalidParameter(format!("rotational constant must be positive, got {b_rot}")));
        }
        if !delta_alpha.is_finite() || !g_r.is_finite() {
            return Err(RotorError::InvalidParameter("non-finite molecular parameter".into()));
        }
        Ok(Self { name: name.into(), b_rot, delta_alpha, g_r })
    }

    /// NO₂⁺: B = 12.5 GHz, Δα = 2.16 Å³, g_r = −0.0367.
    pub fn no2_plus() -> Self {
        Self { name: "NO2+".into(), b_rot: 12.5e9, delta_alpha: 2.16, g_r: -0.0367 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagneticField {
    /// Tesla.
    pub magnitude: f64,
    pub axis: Vector3<f64>,
}

impl MagneticField {
    pub fn new(magnitude: f64, axis: Vector3<f64>) -> Result<Self> {
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(RotorError::InvalidParameter(format!("field magnitude must be >= 0, got {magnitude}")));
        }
        check_unit_axis(&axis)?;
        Ok(Self { magnitude, axis })
    }

    pub fn along_y(magnitude: f64) -> Result<Self> {
        Self::new(magnitude, Vector3::y())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Envelope {
    Rectangular,
    /// Field amplitude rises as sin(πt/2t_r) over `ramp_fraction` of the
    /// pulse, holds, and falls symmetrically.
    Sin2Ramp { ramp_fraction: f64 },
}

impl Envelope {
    /// Field envelope f(t) for a pulse on [0, duration].
    pub fn amplitude(&self, t: f64, duration: f64) -> f64 {
        if !(0.0..=duration).contains(&t) {
            return 0.0;
        }
        match *self {
            Envelope::Rectangular => 1.0,
            Envelope::Sin2Ramp { ramp_fraction } => {
                let ramp = ramp_fraction * duration;
                if ramp <= 0.0 {
                    return 1.0;
                }
                let edge = t.min(duration - t);
                if edge >= ramp {
                    1.0
                } else {
                    (0.5 * PI * edge / ramp).sin()
                }
            }
        }
    }

    /// `∫ f² dt / duration`.
    pub fn intensity_area_fraction(&self) -> f64 {
        match *self {
            Envelope::Rectangular => 1.0,
            Envelope::Sin2Ramp { ramp_fraction } => 1.0 - ramp_fraction,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Envelope::Sin2Ramp { ramp_fraction } = *self {
            if !(0.0..=0.5).contains(&ramp_fraction) {
                return Err(RotorError::InvalidParameter(format!("ramp fraction {ramp_fraction} outside [0, 0.5]")));
            }
        }
        Ok(())
    }
}

/// Two counter-rotating circularly polarized beams with frequency difference ω₀.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseParams {
    /// Cycle-averaged intensity of the synthesized field, W/cm² (I = ½cε₀E₀²).
    pub intensity: f64,
    /// Beam frequency difference, Hz. The polarization turns at ω₀/2.
    pub omega0: f64,
    /// Polarization angle from x at t = 0, rad.
    pub phi: f64,
    /// Seconds.
    pub duration: f64,
    pub envelope: Envelope,
}

impl PulseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.intensity.is_finite() && self.intensity >= 0.0) {
            return Err(RotorError::InvalidParameter(format!("intensity must be >= 0, got {}", self.intensity)));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(RotorError::InvalidParameter(format!("pulse duration must be > 0, got {}", self.duration)));
        }
        if !self.omega0.is_finite() || !self.phi.is_finite() {
            return Err(RotorError::InvalidParameter("non-finite pulse parameter".into()));
        }
        self.envelope.validate()
    }

    /// Same pulse area with a sin² ramp: the duration stretches so ∫f² dt is kept.
    pub fn with_sin2_ramp(mut self, ramp_fraction: f64) -> Result<Self> {
        let env = Envelope::Sin2Ramp { ramp_fraction };
        env.validate()?;
        let area = self.duration * self.envelope.intensity_area_fraction();
        self.envelope = env;
        self.duration = area / env.intensity_area_fraction();
        Ok(self)
    }
}

/// Each amplitude picks up `exp(-i 2π B J(J+1) t)`.
pub fn free_propagate(state: &RotorState, molecule: &MoleculeParams, t: f64) -> RotorState {
    let mut out = state.clone();
    let w = 2.0 * PI * molecule.b_rot * t;
    for (i, j, _) in state.basis().levels() {
        let phase = Complex64::from_polar(1.0, -w * (j * (j + 1)) as f64);
        out.amplitudes_mut()[i] *= phase;
    }
    out
}

/// Signed precession frequency ω_p = (μ_N/h) g_r |B|, Hz.
pub fn precession_frequency(molecule: &MoleculeParams, field: &MagneticField) -> f64 {
    precession_frequency_with(&CODATA_2018, molecule, field)
}

pub fn precession_frequency_with(constants: &PhysicalConstants, molecule: &MoleculeParams, field: &MagneticField) -> f64 {
    constants.nuclear_magneton_over_h() * molecule.g_r * field.magnitude
}

/// `2πB J² − 2π ω_p (â·J)`.
pub fn magnetic_hamiltonian(molecule: &MoleculeParams, field: &MagneticField, basis: RotorBasis) -> Operator {
    let wp = precession_frequency(molecule, field);
    let j2 = op_angular(AngularKind::JSquared, basis);
    let jx = op_angular(AngularKind::Jx, basis);
    let jy = op_angular(AngularKind::Jy, basis);
    let jz = op_angular(AngularKind::Jz, basis);
    let a = field.axis;
    let s = -2.0 * PI * wp;
    Operator::linear_combination(&[(2.0 * PI * molecule.b_rot, &j2), (s * a.x, &jx), (s * a.y, &jy), (s * a.z, &jz)])
}

/// The rotation carried out by the magnetic term after time `t`: an angle
/// of −2πω_p t about the field axis. For g_r < 0 the sense is positive
/// (counterclockwise looking down the field).
pub fn precession_rotation(molecule: &MoleculeParams, field: &MagneticField, t: f64) -> Rotation {
    let angle = -2.0 * PI * precession_frequency(molecule, field) * t;
    Rotation::AxisAngle { axis: field.axis, angle }
}

const Y_AXIS_TOL: f64 = 1e-12;

/// Exact evolution under `B J² − μ_N g_r |B| J_y`. The two terms commute, so
/// the propagator factors into free rotation followed by a finite rotation
/// about y; it repeats up to the free phase whenever ω_p t is an integer.
pub fn magnetic_propagate_closed(state: &RotorState, molecule: &MoleculeParams, field: &MagneticField, t: f64) -> Result<RotorState> {
    let a = field.axis;
    let sign = if (a - Vector3::y()).norm() < Y_AXIS_TOL {
        1.0
    } else if (a + Vector3::y()).norm() < Y_AXIS_TOL {
        -1.0
    } else {
        return Err(RotorError::FieldNotAlongY { axis: [a.x, a.y, a.z] });
    };
    let beta = -sign * 2.0 * PI * precession_frequency(molecule, field) * t;
    let free = free_propagate(state, molecule, t);
    let out = apply_rotation(&free, &Rotation::about_y(beta))?;
    out.warn_on_truncation("magnetic_propagate_closed");
    Ok(out)
}

/// Applies `U(R)` shell by shell without forming the full matrix.
pub fn apply_rotation(state: &RotorState, rotation: &Rotation) -> Result<RotorState> {
    let basis = state.basis();
    let blocks = crate::rotation::wigner_d_blocks(rotation, basis.j_max());
    let mut out = RotorState::zeros(basis);
    for (j, block) in blocks.iter().enumerate() {
        let off = j * j;
        let n = 2 * j + 1;
        let v = state.amplitudes().rows(off, n).into_owned();
        let w = block * v;
        out.amplitudes_mut().rows_mut(off, n).copy_from(&w);
    }
    Ok(out)
}

/// Bookkeeping returned by [`generic_propagate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationReport {
    pub steps: usize,
    /// Largest population in the two top J shells seen at any step.
    pub max_top_shell_population: f64,
    /// Number of distinct Hamiltonian samples exponentiated.
    pub exponentials: usize,
}

/// `exp(-i H dt)` for Hermitian H, factored over the connected blocks of H.
#[derive(Clone, Debug)]
pub struct BlockUnitary {
    blocks: Vec<(Vec<usize>, DMatrix<Complex64>)>,
    dim: usize,
}

impl BlockUnitary {
    pub fn exp_hermitian(h: &DMatrix<Complex64>, dt: f64) -> Self {
        let dim = h.nrows();
        let mut blocks = Vec::new();
        for idx in connected_blocks(h) {
            let n = idx.len();
            if n == 1 {
                let k = idx[0];
                let u = Complex64::from_polar(1.0, -h[(k, k)].re * dt);
                blocks.push((idx, DMatrix::from_element(1, 1, u)));
                continue;
            }
            let shift = idx.iter().map(|&k| h[(k, k)].re).sum::<f64>() / n as f64;
            let sub = DMatrix::from_fn(n, n, |r, c| {
                let v = h[(idx[r], idx[c])];
                if r == c {
                    Complex64::new(v.re - shift, 0.0)
                } else {
                    v
                }
            });
            let eig = SymmetricEigen::new(sub);
            let phases = eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * dt));
            let v = &eig.eigenvectors;
            let mut u = v * DMatrix::from_diagonal(&phases) * v.adjoint();
            u *= Complex64::from_polar(1.0, -shift * dt);
            blocks.push((idx, u));
        }
        Self { blocks, dim }
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.dim);
        for (idx, u) in &self.blocks {
            let sub = DVector::from_iterator(idx.len(), idx.iter().map(|&k| v[k]));
            let w = u * sub;
            for (r, &k) in idx.iter().enumerate() {
                out[k] = w[r];
            }
        }
        out
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (idx, u) in &self.blocks {
            for (r, &kr) in idx.iter().enumerate() {
                for (c, &kc) in idx.iter().enumerate() {
                    m[(kr, kc)] = u[(r, c)];
                }
            }
        }
        m
    }
}

/// Index sets of the connected components of the coupling graph of `h`.
fn connected_blocks(h: &DMatrix<Complex64>) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for r in 0..n {
        for c in (r + 1)..n {
            if h[(r, c)] != Complex64::new(0.0, 0.0) || h[(c, r)] != Complex64::new(0.0, 0.0) {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for k in 0..n {
        let root = find(&mut parent, k);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(k);
    }
    groups
}

/// Steps `i dψ/dt = H(t) ψ` from `t0` to `t1` with the exponential of the
/// midpoint Hamiltonian on each step (second order in `dt`, exactly unitary).
/// The step is shrunk so an integer number of steps spans the interval.
/// Repeated identical samples reuse the previous exponential.
pub fn generic_propagate<F>(state: &RotorState, mut hamiltonian: F, t0: f64, t1: f64, dt: f64) -> Result<(RotorState, PropagationReport)>
where
    F: FnMut(f64) -> Operator,
{
    if !(dt.is_finite() && dt > 0.0) {
        return Err(RotorError::InvalidParameter(format!("time step must be > 0, got {dt}")));
    }
    if !(t1.is_finite() && t0.is_finite() && t1 >= t0) {
        return Err(RotorError::InvalidParameter(format!("need t1 >= t0, got [{t0}, {t1}]")));
    }
    let span = t1 - t0;
    let steps = if span == 0.0 { 0 } else { ((span / dt) - 1e-9).ceil().max(1.0) as usize };
    let h_step = if steps == 0 { 0.0 } else { span / steps as f64 };
    let basis = state.basis();
    let mut amps = state.amplitudes().clone();
    let mut cache: Option<(DMatrix<Complex64>, BlockUnitary)> = None;
    let mut report = PropagationReport { steps, max_top_shell_population: state.top_shell_population(), exponentials: 0 };
    for k in 0..steps {
        let t_mid = t0 + (k as f64 + 0.5) * h_step;
        let h = hamiltonian(t_mid);
        if h.basis() != basis {
            return Err(RotorError::BasisMismatch { expected: basis.j_max(), found: h.basis().j_max() });
        }
        let reuse = matches!(&cache, Some((m, _)) if m == h.matrix());
        if !reuse {
            let err = h.hermiticity_error();
            if err > 1e-12 * h.max_abs().max(1.0) {
                return Err(RotorError::NonHermitian { time: t_mid, error: err });
            }
            let u = BlockUnitary::exp_hermitian(h.matrix(), h_step);
            report.exponentials += 1;
            cache = Some((h.matrix().clone(), u));
        }
        let (_, u) = cache.as_ref().expect("cache filled above");
        amps = u.apply(&amps);
        let top = top_shell_population_of(basis, &amps);
        report.max_top_shell_population = report.max_top_shell_population.max(top);
    }
    let out = RotorState::from_amplitudes(basis, amps)?;
    if report.max_top_shell_population > crate::basis::TRUNCATION_WARN_THRESHOLD {
        log::warn!(
            "generic_propagate: population {:e} reached the top two J shells (j_max={})",
            report.max_top_shell_population,
            basis.j_max()
        );
    }
    Ok((out, report))
}

fn top_shell_population_of(basis: RotorBasis, amps: &DVector<Complex64>) -> f64 {
    let j_max = basis.j_max() as usize;
    let start = if j_max >= 1 { (j_max - 1) * (j_max - 1) } else { 0 };
    amps.rows(start, amps.len() - start).iter().map(|c| c.norm_sqr()).sum()
}

/// Step for [`generic_propagate`] that resolves the fastest retained
/// timescale: `1/(200 max(ω₀, B J_max(J_max+1)))`.
pub fn default_time_step(omega0: f64, b_rot: f64, j_max: u32) -> f64 {
    let jm = j_max as f64;
    1.0 / (200.0 * omega0.abs().max(b_rot * jm * (jm + 1.0)))
}

/// Closed-form Raman Rabi frequency `Ω = ¼ Δα E₀² <J+2,J|cos²θ|J,J> / h`, Hz.
///
/// The matrix element conserves M. The transition actually driven by the
/// rotating polarization is |J,J> → |J+2,J+2>, whose coupling differs; see
/// [`RamanDrive::two_level_model`] for the value that governs the dynamics.
pub fn rabi_frequency(molecule: &MoleculeParams, pulse: &PulseParams, j: u32) -> f64 {
    coupling_frequency(&CODATA_2018, molecule, pulse.intensity) * cos2_matrix_element(j + 2, j, j as i32)
}

/// `¼ Δα E₀² / h` in Hz: the scale of the laser term in the rotor Hamiltonian.
pub fn coupling_frequency(constants: &PhysicalConstants, molecule: &MoleculeParams, intensity_w_cm2: f64) -> f64 {
    let alpha = constants.polarizability_to_si(molecule.delta_alpha);
    let e2 = constants.field_squared_from_intensity(intensity_w_cm2);
    0.25 * alpha * e2 / constants.planck
}

/// Quarter of a Rabi cycle, `1/(4Ω)`.
pub fn quarter_cycle_duration(rabi_hz: f64) -> f64 {
    1.0 / (4.0 * rabi_hz)
}

/// Effective two-level description of |J,J> ↔ |J+2,J+2> in the frame that
/// co-rotates with the polarization. Frequencies in Hz; `rabi` follows the
/// convention excited population = sin²(πΩt) on resonance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelModel {
    pub rabi: f64,
    /// Energy of |J+2,J+2> minus |J,J> in the rotating frame, including the
    /// differential light shift.
    pub detuning: f64,
    /// Differential light shift alone.
    pub light_shift: f64,
}

/// Two-beam Raman drive on a fixed basis with its operators precomputed.
///
/// The lab-frame Hamiltonian is
/// `H(t) = 2πB J² − c f(t)² (p̂(t)·n̂)²` with `p̂(t) = (cos θ_p, sin θ_p, 0)`,
/// `θ_p = πω₀t + φ` and `c = ¼Δα E₀²/ħ` (carrier cycle-averaged). Since
/// `(p̂·n̂)² = e^{-iθ_p J_z} n_x² e^{iθ_p J_z}`, the substitution
/// `ψ = e^{-iθ_p(t) J_z} χ` removes the polarization rotation exactly and
/// leaves `K(t) = 2πB J² − c f(t)² n_x² − πω₀ J_z`, constant for a
/// rectangular pulse. No rotating-wave approximation is involved.
#[derive(Clone, Debug)]
pub struct RamanDrive {
    basis: RotorBasis,
    b_rot: f64,
    pulse: PulseParams,
    coupling: f64,
    tensor: DirectionTensor,
    j_squared: Operator,
    jz: Operator,
}

impl RamanDrive {
    pub fn new(molecule: &MoleculeParams, pulse: &PulseParams, basis: RotorBasis) -> Result<Self> {
        Self::with_constants(&CODATA_2018, molecule, pulse, basis)
    }

    pub fn with_constants(constants: &PhysicalConstants, molecule: &MoleculeParams, pulse: &PulseParams, basis: RotorBasis) -> Result<Self> {
        pulse.validate()?;
        Ok(Self {
            basis,
            b_rot: molecule.b_rot,
            pulse: *pulse,
            coupling: 2.0 * PI * coupling_frequency(constants, molecule, pulse.intensity),
            tensor: symmetric_tensor_ops(basis),
            j_squared: op_angular(AngularKind::JSquared, basis),
            jz: op_angular(AngularKind::Jz, basis),
        })
    }

    pub fn basis(&self) -> RotorBasis {
        self.basis
    }

    pub fn pulse(&self) -> &PulseParams {
        &self.pulse
    }

    /// `c/2π = ¼ΔαE₀²/h`, Hz.
    pub fn coupling_hz(&self) -> f64 {
        self.coupling / (2.0 * PI)
    }

    /// Polarization angle θ_p(t) = πω₀t + φ.
    pub fn polarization_angle(&self, t: f64) -> f64 {
        PI * self.pulse.omega0 * t + self.pulse.phi
    }

    pub fn polarization(&self, t: f64) -> Vector3<f64> {
        let a = self.polarization_angle(t);
        Vector3::new(a.cos(), a.sin(), 0.0)
    }

    fn envelope_sq(&self, t: f64) -> f64 {
        self.pulse.envelope.amplitude(t, self.pulse.duration).powi(2)
    }

    pub fn lab_hamiltonian(&self, t: f64) -> Operator {
        let p = self.polarization(t);
        let coupling = self.tensor.project(&p);
        Operator::linear_combination(&[(2.0 * PI * self.b_rot, &self.j_squared), (-self.coupling * self.envelope_sq(t), &coupling)])
    }

    pub fn rotating_frame_hamiltonian(&self, t: f64) -> Operator {
        Operator::linear_combination(&[
            (2.0 * PI * self.b_rot, &self.j_squared),
            (-self.coupling * self.envelope_sq(t), self.tensor.xx()),
            (-PI * self.pulse.omega0, &self.jz),
        ])
    }

    /// ψ = e^{-iθ_p(t) J_z} χ.
    pub fn to_lab_frame(&self, chi: &RotorState, t: f64) -> RotorState {
        rotate_about_z(chi, self.polarization_angle(t))
    }

    /// χ = e^{iθ_p(t) J_z} ψ.
    pub fn to_rotating_frame(&self, psi: &RotorState, t: f64) -> RotorState {
        rotate_about_z(psi, -self.polarization_angle(t))
    }

    /// Runs the whole pulse in the co-rotating frame with `steps` midpoint
    /// exponentials and returns the lab-frame state at the end of the pulse.
    pub fn propagate_pulse(&self, initial: &RotorState, steps: usize) -> Result<(RotorState, PropagationReport)> {
        let t_end = self.pulse.duration;
        let chi0 = self.to_rotating_frame(initial, 0.0);
        let dt = t_end / steps.max(1) as f64;
        let (chi, report) = generic_propagate(&chi0, |t| self.rotating_frame_hamiltonian(t), 0.0, t_end, dt)?;
        Ok((self.to_lab_frame(&chi, t_end), report))
    }

    /// Projects the full-amplitude rotating-frame Hamiltonian onto
    /// {|J,J>, |J+2,J+2>}.
    pub fn two_level_model(&self, j: u32) -> Result<TwoLevelModel> {
        let a = self.basis.index(j, j as i32);
        let b = self.basis.index(j + 2, j as i32 + 2);
        let (a, b) = match (a, b) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(RotorError::CogwheelOutsideBasis { j, top: j + 2, j_max: self.basis.j_max() }),
        };
        let xx = self.tensor.xx().matrix();
        let two_pi = 2.0 * PI;
        let k_aa = two_pi * self.b_rot * (j * (j + 1)) as f64 - self.coupling * xx[(a, a)].re - PI * self.pulse.omega0 * j as f64;
        let k_bb = two_pi * self.b_rot * ((j + 2) * (j + 3)) as f64 - self.coupling * xx[(b, b)].re - PI * self.pulse.omega0 * (j + 2) as f64;
        let k_ab = self.coupling * xx[(b, a)].norm();
        let light_shift = -self.coupling * (xx[(b, b)].re - xx[(a, a)].re) / two_pi;
        Ok(TwoLevelModel { rabi: k_ab / PI, detuning: (k_bb - k_aa) / two_pi, light_shift })
    }
}

fn rotate_about_z(state: &RotorState, angle: f64) -> RotorState {
    let mut out = state.clone();
    for (i, _, m) in state.basis().levels() {
        out.amplitudes_mut()[i] *= Complex64::from_polar(1.0, -(m as f64) * angle);
    }
    out
}

/// Lab-frame Raman Hamiltonian at time `t`. Builds the operator set on every
/// call; use [`RamanDrive`] inside loops.
pub fn raman_hamiltonian(t: f64, molecule: &MoleculeParams, pulse: &PulseParams, basis: RotorBasis) -> Result<Operator> {
    Ok(RamanDrive::new(molecule, pulse, basis)?.lab_hamiltonian(t))
}

/// Two-level amplitudes (ground, excited) after time `t` under
/// `H = 2π [[-δ/2, Ω/2], [Ω/2, δ/2]]`.
pub fn rwa_evolution(initial: [Complex64; 2], rabi: f64, detuning: f64, t: f64) -> [Complex64; 2] {
    let w = (rabi * rabi + detuning * detuning).sqrt();
    if w == 0.0 {
        return initial;
    }
    let (s, c) = (PI * w * t).sin_cos();
    let i = Complex64::new(0.0, 1.0);
    let nz = -detuning / w;
    let nx = rabi / w;
    // U = cos − i sin (nx σx + nz σz)
    let u00 = c - i * s * nz;
    let u11 = c + i * s * nz;
    let u01 = -i * s * nx;
    [u00 * initial[0] + u01 * initial[1], u01 * initial[0] + u11 * initial[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use approx::assert_abs_diff_eq;

    fn cogwheel_02(basis: RotorBasis) -> RotorState {
        let mut s = RotorState::zeros(basis);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        s.set_amplitude(0, 0, Complex64::new(h, 0.0)).unwrap();
        s.set_amplitude(2, 2, Complex64::new(h, 0.0)).unwrap();
        s
    }

    #[test]
    fn ground_state_is_stationary() {
        let b = build_basis(4);
        let s = RotorState::eigenstate(b, 0, 0).unwrap();
        let out = free_propagate(&s, &MoleculeParams::no2_plus(), 1.234e-9);
        assert_eq!(out, s);
    }

    #[test]
    fn free_evolution_keeps_populations() {
        let b = build_basis(4);
        let mut s = cogwheel_02(b);
        s.set_amplitude(3, -1, Complex64::new(0.3, 0.4)).unwrap();
        let s = s.normalized();
        let out = free_propagate(&s, &MoleculeParams::no2_plus(), 7.7e-12);
        for (i, _, _) in b.levels() {
            assert_eq!(out.amplitudes()[i].norm_sqr().to_bits() >> 8, s.amplitudes()[i].norm_sqr().to_bits() >> 8);
        }
    }

    #[test]
    fn precession_frequency_examples() {
        let mol = MoleculeParams::no2_plus();
        let f = precession_frequency(&mol, &MagneticField::along_y(1.0).unwrap());
        assert_abs_diff_eq!(f.abs() / 1e6, 0.2798, epsilon = 0.0005);
        assert!(f < 0.0);
        let half = precession_frequency(&mol, &MagneticField::along_y(0.5).unwrap());
        assert_abs_diff_eq!(half, f / 2.0, epsilon = 1e-9);
        let zero = MoleculeParams { g_r: 0.0, ..mol };
        assert_eq!(precession_frequency(&zero, &MagneticField::along_y(1.0).unwrap()), 0.0);
        let tp = 1.0 / f.abs();
        assert_abs_diff_eq!(tp * 1e6, 3.574, epsilon = 0.001);
    }

    #[test]
    fn closed_form_rejects_other_axes() {
        let b = build_basis(2);
        let s = RotorState::eigenstate(b, 0, 0).unwrap();
        let field = MagneticField::new(1.0, Vector3::z()).unwrap();
        assert!(matches!(
            magnetic_propagate_closed(&s, &MoleculeParams::no2_plus(), &field, 1e-6),
            Err(RotorError::FieldNotAlongY { .. })
        ));
    }

    #[test]
    fn closed_form_matches_generic_for_magnetic_field() {
        let b = build_basis(6);
        let mol = MoleculeParams::no2_plus();
        let field = MagneticField::along_y(1.0).unwrap();
        let h = magnetic_hamiltonian(&mol, &field, b);
        let s = cogwheel_02(b);
        let t = 1.3e-6;
        let closed = magnetic_propagate_closed(&s, &mol, &field, t).unwrap();
        let (numeric, report) = generic_propagate(&s, |_| h.clone(), 0.0, t, 1e-8).unwrap();
        assert_eq!(report.exponentials, 1);
        let d = closed.distance(&numeric).unwrap();
        assert!(d < 1e-8, "distance {d}");
    }

    #[test]
    fn half_period_flips_jz() {
        let b = build_basis(4);
        let mol = MoleculeParams::no2_plus();
        let field = MagneticField::along_y(1.0).unwrap();
        let tp = 1.0 / precession_frequency(&mol, &field).abs();
        let s = cogwheel_02(b);
        let out = magnetic_propagate_closed(&s, &mol, &field, tp / 2.0).unwrap();
        let jz = op_angular(AngularKind::Jz, b);
        let jy = op_angular(AngularKind::Jy, b);
        assert_abs_diff_eq!(jz.expectation(&out).unwrap().re, -jz.expectation(&s).unwrap().re, epsilon = 1e-10);
        assert_abs_diff_eq!(jy.expectation(&out).unwrap().re, jy.expectation(&s).unwrap().re, epsilon = 1e-10);
    }

    #[test]
    fn generic_rejects_non_hermitian() {
        let b = build_basis(1);
        let jp = op_angular(AngularKind::JPlus, b);
        let s = RotorState::eigenstate(b, 1, 0).unwrap();
        let r = generic_propagate(&s, |_| jp.clone(), 0.0, 1.0, 0.1);
        assert!(matches!(r, Err(RotorError::NonHermitian { .. })));
        assert!(generic_propagate(&s, |_| jp.clone(), 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn generic_with_free_hamiltonian_matches_free_propagate() {
        let b = build_basis(5);
        let mol = MoleculeParams::no2_plus();
        let mut s = cogwheel_02(b);
        s.set_amplitude(5, -3, Complex64::new(0.0, 0.5)).unwrap();
        let s = s.normalized();
        let h0 = op_angular(AngularKind::JSquared, b).scaled(2.0 * PI * mol.b_rot);
        let t = 3.3e-11;
        let (num, _) = generic_propagate(&s, |_| h0.clone(), 0.0, t, t / 7.0).unwrap();
        assert!(num.distance(&free_propagate(&s, &mol, t)).unwrap() < 1e-10);
    }

    #[test]
    fn rwa_examples() {
        let g = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let omega = 1e6;
        let q = rwa_evolution(g, omega, 0.0, quarter_cycle_duration(omega));
        assert_abs_diff_eq!(q[0].norm_sqr(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(q[1].norm_sqr(), 0.5, epsilon = 1e-12);
        let full = rwa_evolution(g, omega, 0.0, 1.0 / (2.0 * omega));
        assert_abs_diff_eq!(full[1].norm_sqr(), 1.0, epsilon = 1e-12);
        // generalized Rabi: peak Ω²/(Ω²+δ²)
        let w = 2f64.sqrt() * omega;
        let peak = rwa_evolution(g, omega, omega, 1.0 / (2.0 * w));
        assert_abs_diff_eq!(peak[1].norm_sqr(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(quarter_cycle_duration(1e6), 250e-9, epsilon = 1e-18);
    }

    #[test]
    fn rabi_frequency_checkpoint() {
        let mol = MoleculeParams::no2_plus();
        let pulse = PulseParams { intensity: 4.9e6, omega0: 75e9, phi: 0.0, duration: 250e-9, envelope: Envelope::Rectangular };
        let omega = rabi_frequency(&mol, &pulse, 0);
        assert!((omega / 1e6 - 1.0).abs() < 0.02, "{omega}");
        let zero = PulseParams { intensity: 0.0, ..pulse };
        assert_eq!(rabi_frequency(&mol, &zero, 0), 0.0);
        let double = PulseParams { intensity: 9.8e6, ..pulse };
        assert_abs_diff_eq!(rabi_frequency(&mol, &double, 0), 2.0 * omega, epsilon = 1e-6);
    }

    #[test]
    fn raman_hamiltonian_geometry() {
        let b = build_basis(4);
        let mol = MoleculeParams::no2_plus();
        let pulse = PulseParams { intensity: 4.9e6, omega0: 75e9, phi: 0.0, duration: 250e-9, envelope: Envelope::Rectangular };
        let drive = RamanDrive::new(&mol, &pulse, b).unwrap();
        let h = drive.lab_hamiltonian(0.0);
        assert!(h.is_hermitian());
        let expect = Operator::linear_combination(&[
            (2.0 * PI * mol.b_rot, &op_angular(AngularKind::JSquared, b)),
            (-2.0 * PI * drive.coupling_hz(), symmetric_tensor_ops(b).xx()),
        ]);
        assert!((h.matrix() - expect.matrix()).norm() < 1e-3);
        let off = PulseParams { intensity: 0.0, ..pulse };
        let h_off = raman_hamiltonian(1e-9, &mol, &off, b).unwrap();
        let h0 = op_angular(AngularKind::JSquared, b).scaled(2.0 * PI * mol.b_rot);
        assert_eq!(h_off.matrix(), h0.matrix());
        // ¼ΔαE₀²<2,0|cos²θ|0,0>/h is the closed-form Rabi frequency
        let check = drive.coupling_hz() * cos2_matrix_element(2, 0, 0);
        assert_abs_diff_eq!(check, rabi_frequency(&mol, &pulse, 0), epsilon = 1e-6);
    }

    #[test]
    fn block_exponential_is_unitary_and_matches_dense() {
        let b = build_basis(3);
        let mol = MoleculeParams::no2_plus();
        let pulse = PulseParams { intensity: 1e12, omega0: 75e9, phi: 0.3, duration: 1e-9, envelope: Envelope::Rectangular };
        let drive = RamanDrive::new(&mol, &pulse, b).unwrap();
        let h = drive.lab_hamiltonian(1e-12);
        let dt = 2e-13;
        let u = BlockUnitary::exp_hermitian(h.matrix(), dt).to_matrix();
        let op = Operator::general(b, u.clone()).unwrap();
        assert!(op.unitarity_error() < 1e-12);
        let eig = SymmetricEigen::new(h.matrix().clone());
        let dense = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * dt))) * eig.eigenvectors.adjoint();
        assert!((u - dense).norm() < 1e-9);
    }

    #[test]
    fn sin2_ramp_keeps_area() {
        let pulse = PulseParams { intensity: 1.0, omega0: 1.0, phi: 0.0, duration: 100e-9, envelope: Envelope::Rectangular };
        let ramped = pulse.with_sin2_ramp(0.2).unwrap();
        assert_abs_diff_eq!(ramped.duration, 125e-9, epsilon = 1e-18);
        // numerical ∫f²
        let n = 200_000;
        let h = ramped.duration / n as f64;
        let area: f64 = (0..n).map(|k| ramped.envelope.amplitude((k as f64 + 0.5) * h, ramped.duration).powi(2) * h).sum();
        assert_abs_diff_eq!(area, 100e-9, epsilon = 1e-14);
        assert!(pulse.with_sin2_ramp(0.7).is_err());
    }
}
