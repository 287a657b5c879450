//! Real functions on the sphere held as spherical-harmonic coefficients.
//!
//! `ρ(n̂) = Σ_{L,M} a_{LM} Y_{LM}(n̂)` with `a_{L,−M} = (−1)^M conj(a_{LM})`.
//! A rotor state with cutoff J_max has a density of degree at most 2·J_max,
//! so every operation here is exact up to rounding.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;

use crate::basis::RotorState;
use crate::harmonics::{harmonic_from_table, legendre_polynomials, normalized_legendre_table, AngularGrid};
use crate::optimize::nelder_mead;
use crate::rotation::{wigner_d_block, Rotation};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Blocks whose largest coefficient is below this are dropped by [`SphericalDensity::trimmed`].
pub const TRIM_THRESHOLD: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct SphericalDensity {
    /// Block L holds M = −L..=L ascending; `None` marks an identically zero block.
    blocks: Vec<Option<DVector<Complex64>>>,
}

impl SphericalDensity {
    pub fn zeros(l_max: usize) -> Self {
        Self { blocks: vec![None; l_max + 1] }
    }

    pub fn uniform() -> Self {
        let mut d = Self::zeros(0);
        d.blocks[0] = Some(DVector::from_element(1, Complex64::new((4.0 * PI).sqrt(), 0.0) / (4.0 * PI)));
        d
    }

    pub fn l_max(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn coefficient(&self, l: usize, m: i64) -> Complex64 {
        match self.blocks.get(l) {
            Some(Some(b)) if m.unsigned_abs() as usize <= l => b[(m + l as i64) as usize],
            _ => ZERO,
        }
    }

    /// Degrees with a nonzero block.
    pub fn active_degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().enumerate().filter_map(|(l, b)| b.as_ref().map(|_| l))
    }

    pub fn block(&self, l: usize) -> Option<&DVector<Complex64>> {
        self.blocks.get(l).and_then(|b| b.as_ref())
    }

    /// |ψ(n̂)|² of a rotor state.
    pub fn from_state(state: &RotorState) -> Self {
        let j_max = state.basis().j_max() as usize;
        let grid = AngularGrid::exact_for_degree(4 * j_max);
        let psi = wavefunction_on_grid(state, &grid);
        let values: Vec<f64> = psi.iter().map(|c| c.norm_sqr()).collect();
        Self::analyze(&grid, &values, 2 * j_max).trimmed()
    }

    /// `Σ_J |ψ_J(n̂)|²`: the density with all coherences between J shells
    /// removed. This is the long-time average under free rotation, and for a
    /// cogwheel it equals the azimuthal average about its rotation axis.
    pub fn shell_incoherent_from_state(state: &RotorState) -> Self {
        let j_max = state.basis().j_max() as usize;
        let grid = AngularGrid::exact_for_degree(4 * j_max);
        let mut values = vec![0.0; grid.len()];
        for j in 0..=j_max as u32 {
            if state.shell_population(j) == 0.0 {
                continue;
            }
            let mut shell = RotorState::zeros(state.basis());
            for m in -(j as i32)..=(j as i32) {
                shell.set_amplitude(j, m, state.amplitude(j, m)).expect("level in basis");
            }
            for (v, c) in values.iter_mut().zip(wavefunction_on_grid(&shell, &grid)) {
                *v += c.norm_sqr();
            }
        }
        Self::analyze(&grid, &values, 2 * j_max).trimmed()
    }

    /// Projects grid samples onto harmonics up to `l_max`. Exact when the
    /// sampled function has degree ≤ `l_max` and the grid integrates degree
    /// `2·l_max` exactly.
    pub fn analyze(grid: &AngularGrid, values: &[f64], l_max: usize) -> Self {
        assert_eq!(values.len(), grid.len(), "one value per grid node");
        let n_phi = grid.n_phi();
        let lm = l_max as i64;
        let wphi = grid.phi_weight();
        let mut blocks: Vec<DVector<Complex64>> = (0..=l_max).map(|l| DVector::zeros(2 * l + 1)).collect();
        let twiddles: Vec<Vec<Complex64>> = (-lm..=lm)
            .map(|m| grid.phi().iter().map(|&p| Complex64::from_polar(1.0, -(m as f64) * p)).collect())
            .collect();
        for i in 0..grid.n_theta() {
            let row = &values[i * n_phi..(i + 1) * n_phi];
            let g: Vec<Complex64> = twiddles
                .iter()
                .map(|tw| tw.iter().zip(row).map(|(t, &v)| t * v).sum::<Complex64>() * wphi)
                .collect();
            let table = normalized_legendre_table(l_max, grid.cos_theta()[i]);
            let w = grid.theta_weights()[i];
            for (l, block) in blocks.iter_mut().enumerate() {
                for m in -(l as i64)..=(l as i64) {
                    let y = harmonic_from_table(&table, l, m, Complex64::new(1.0, 0.0));
                    block[(m + l as i64) as usize] += g[(m + lm) as usize] * y.conj() * w;
                }
            }
        }
        Self { blocks: blocks.into_iter().map(Some).collect() }
    }

    /// Drops blocks below [`TRIM_THRESHOLD`] relative to the largest coefficient
    /// and shortens the degree range to the last nonzero block.
    pub fn trimmed(self) -> Self {
        self.trimmed_below(TRIM_THRESHOLD)
    }

    /// As [`trimmed`](Self::trimmed) with a caller-chosen relative threshold.
    pub fn trimmed_below(mut self, relative: f64) -> Self {
        let scale = self
            .blocks
            .iter()
            .flatten()
            .flat_map(|b| b.iter())
            .fold(0.0f64, |a, c| a.max(c.norm()));
        for b in self.blocks.iter_mut() {
            if b.as_ref().is_some_and(|v| v.iter().all(|c| c.norm() <= relative * scale.max(f64::MIN_POSITIVE))) {
                *b = None;
            }
        }
        while self.blocks.len() > 1 && self.blocks.last().is_some_and(|b| b.is_none()) {
            self.blocks.pop();
        }
        self
    }

    /// `∫ ρ dΩ`.
    pub fn total(&self) -> f64 {
        self.coefficient(0, 0).re * (4.0 * PI).sqrt()
    }

    pub fn value_at(&self, theta: f64, phi: f64) -> f64 {
        let table = normalized_legendre_table(self.l_max(), theta.cos());
        let e = Complex64::from_polar(1.0, phi);
        let mut sum = 0.0;
        for l in self.active_degrees() {
            let b = self.block(l).expect("active");
            for m in -(l as i64)..=(l as i64) {
                sum += (b[(m + l as i64) as usize] * harmonic_from_table(&table, l, m, e)).re;
            }
        }
        sum
    }

    pub fn value_in_direction(&self, n: &Vector3<f64>) -> f64 {
        let (theta, phi) = polar_angles(n);
        self.value_at(theta, phi)
    }

    /// Values at every node, row-major with θ outer. Each node is summed in
    /// the same order regardless of threading.
    pub fn evaluate_on(&self, grid: &AngularGrid) -> Vec<f64> {
        use rayon::prelude::*;
        let lm = self.l_max() as i64;
        let phases: Vec<Vec<Complex64>> = (0..=lm)
            .map(|m| grid.phi().iter().map(|&p| Complex64::from_polar(1.0, m as f64 * p)).collect())
            .collect();
        let rows: Vec<Vec<f64>> = (0..grid.n_theta())
            .into_par_iter()
            .map(|i| {
                let table = normalized_legendre_table(self.l_max(), grid.cos_theta()[i]);
                // b_M = Σ_L a_LM Pbar_LM; real density needs only M ≥ 0
                let mut b = vec![ZERO; lm as usize + 1];
                for l in self.active_degrees() {
                    let block = self.block(l).expect("active");
                    for m in 0..=(l as i64) {
                        b[m as usize] += block[(m + l as i64) as usize] * harmonic_from_table(&table, l, m, Complex64::new(1.0, 0.0));
                    }
                }
                (0..grid.n_phi())
                    .map(|k| {
                        let mut v = b[0].re;
                        for m in 1..=lm as usize {
                            v += 2.0 * (b[m] * phases[m][k]).re;
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        rows.concat()
    }

    /// `ρ'(n̂) = ρ(R⁻¹ n̂)`.
    pub fn rotated(&self, rotation: &Rotation) -> Self {
        let (a, b, g) = rotation.euler_zyz();
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(l, blk)| blk.as_ref().map(|v| wigner_d_block(l as u32, a, b, g) * v))
            .collect();
        Self { blocks }
    }

    /// Average over all rotations about `axis`.
    pub fn azimuthal_average(&self, axis: &Vector3<f64>) -> Self {
        let to_z = rotation_taking(axis, &Vector3::z());
        let mut aligned = self.rotated(&to_z);
        for (l, blk) in aligned.blocks.iter_mut().enumerate() {
            if let Some(v) = blk {
                for (k, c) in v.iter_mut().enumerate() {
                    if k != l {
                        *c = ZERO;
                    }
                }
            }
        }
        aligned.rotated(&to_z.inverse()).trimmed()
    }

    /// `(1 − w)·self + w·other`.
    pub fn mix(&self, other: &SphericalDensity, w: f64) -> Self {
        let l_max = self.l_max().max(other.l_max());
        let blocks = (0..=l_max)
            .map(|l| {
                let a = self.block(l);
                let b = other.block(l);
                match (a, b) {
                    (None, None) => None,
                    _ => {
                        let mut v = DVector::zeros(2 * l + 1);
                        if let Some(a) = a {
                            v += a * Complex64::new(1.0 - w, 0.0);
                        }
                        if let Some(b) = b {
                            v += b * Complex64::new(w, 0.0);
                        }
                        Some(v)
                    }
                }
            })
            .collect();
        Self { blocks }
    }

    /// `∫ ρ` over the cap of half-angle `half_angle` about unit `axis`.
    ///
    /// Funk–Hecke: `∫_cap Y_LM dΩ = 2π Y_LM(â) ∫_{cos α}^1 P_L(t) dt`.
    pub fn cap_integral(&self, axis: &Vector3<f64>, half_angle: f64) -> f64 {
        let c = half_angle.cos();
        let lm = self.l_max();
        let p = legendre_polynomials(lm + 1, c);
        let (theta, phi) = polar_angles(axis);
        let table = normalized_legendre_table(lm, theta.cos());
        let e = Complex64::from_polar(1.0, phi);
        let mut total = 0.0;
        for l in self.active_degrees() {
            let radial = if l == 0 { 1.0 - c } else { (p[l - 1] - p[l + 1]) / (2 * l + 1) as f64 };
            let b = self.block(l).expect("active");
            let mut s = 0.0;
            for m in -(l as i64)..=(l as i64) {
                s += (b[(m + l as i64) as usize] * harmonic_from_table(&table, l, m, e)).re;
            }
            total += 2.0 * PI * radial * s;
        }
        total
    }

    /// `T_ij = ∫ n_i n_j ρ dΩ`; depends only on degrees 0 and 2.
    pub fn orientation_tensor(&self) -> Matrix3<f64> {
        let low = Self { blocks: self.blocks.iter().take(3).cloned().collect() };
        let grid = AngularGrid::exact_for_degree(4);
        let values = low.evaluate_on(&grid);
        let mut t = Matrix3::zeros();
        for i in 0..grid.n_theta() {
            for k in 0..grid.n_phi() {
                let n = grid.direction(i, k);
                let w = grid.weight(i, k) * values[grid.flat(i, k)];
                for a in 0..3 {
                    for b in 0..3 {
                        t[(a, b)] += w * n[a] * n[b];
                    }
                }
            }
        }
        t
    }

    /// Global maximum of ρ, located on a grid and polished by Nelder–Mead.
    pub fn maximum(&self) -> (f64, Vector3<f64>) {
        let n_theta = (2 * self.l_max() + 8).max(16);
        let grid = AngularGrid::new(n_theta, 2 * n_theta);
        let values = self.evaluate_on(&grid);
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let mut best = (f64::NEG_INFINITY, Vector3::z());
        for &idx in order.iter().take(6) {
            let (i, k) = (idx / grid.n_phi(), idx % grid.n_phi());
            let start = [grid.theta()[i], grid.phi()[k]];
            let m = nelder_mead(|x| -self.value_at(x[0].clamp(0.0, PI), x[1]), &start, 0.02, 1e-15, 400);
            let v = -m.value;
            if v > best.0 {
                let (t, p) = (m.x[0].clamp(0.0, PI), m.x[1]);
                best = (v, Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos()));
            }
        }
        best
    }

    /// Independent directions distributed as ρ (assumed non-negative with
    /// unit integral), by rejection against `1.02 × max ρ`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vector3<f64>> {
        let bound = 1.02 * self.maximum().0;
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let z: f64 = rng.random_range(-1.0..=1.0);
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            let u: f64 = rng.random_range(0.0..bound);
            if u < self.value_at(z.acos(), phi) {
                let s = (1.0 - z * z).max(0.0).sqrt();
                out.push(Vector3::new(s * phi.cos(), s * phi.sin(), z));
            }
        }
        out
    }
}

/// ψ(n̂) = Σ c_JM Y_JM(n̂) at every grid node, θ outer.
pub fn wavefunction_on_grid(state: &RotorState, grid: &AngularGrid) -> Vec<Complex64> {
    use rayon::prelude::*;
    let basis = state.basis();
    let j_max = basis.j_max() as usize;
    let jm = j_max as i64;
    let phases: Vec<Vec<Complex64>> = (-jm..=jm)
        .map(|m| grid.phi().iter().map(|&p| Complex64::from_polar(1.0, m as f64 * p)).collect())
        .collect();
    let rows: Vec<Vec<Complex64>> = (0..grid.n_theta())
        .into_par_iter()
        .map(|i| {
            let table = normalized_legendre_table(j_max, grid.cos_theta()[i]);
            let mut b = vec![ZERO; 2 * j_max + 1];
            for (idx, j, m) in basis.levels() {
                let c = state.amplitudes()[idx];
                if c != ZERO {
                    b[(m as i64 + jm) as usize] += c * harmonic_from_table(&table, j as usize, m as i64, Complex64::new(1.0, 0.0));
                }
            }
            (0..grid.n_phi())
                .map(|k| {
                    let mut v = ZERO;
                    for (mi, bm) in b.iter().enumerate() {
                        if *bm != ZERO {
                            v += bm * phases[mi][k];
                        }
                    }
                    v
                })
                .collect()
        })
        .collect();
    rows.concat()
}

/// Polar and azimuthal angles of a nonzero vector.
pub fn polar_angles(n: &Vector3<f64>) -> (f64, f64) {
    let r = n.norm();
    ((n.z / r).clamp(-1.0, 1.0).acos(), n.y.atan2(n.x))
}

/// The smallest rotation carrying unit `from` onto unit `to`.
pub fn rotation_taking(from: &Vector3<f64>, to: &Vector3<f64>) -> Rotation {
    let a = from.normalize();
    let b = to.normalize();
    let cross = a.cross(&b);
    let s = cross.norm();
    let c = a.dot(&b);
    if s < 1e-14 {
        if c > 0.0 {
            return Rotation::identity();
        }
        // antiparallel: half turn about any perpendicular axis
        let perp = if a.x.abs() < 0.9 { Vector3::x().cross(&a) } else { Vector3::y().cross(&a) };
        return Rotation::AxisAngle { axis: perp.normalize(), angle: PI };
    }
    Rotation::AxisAngle { axis: cross / s, angle: s.atan2(c) }
}
