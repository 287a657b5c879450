//! Angular densities, alignment tracking, expectation values, fidelities and
//! the rotation-invariant shape overlap.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

use crate::basis::RotorState;
use crate::density::{rotation_taking, wavefunction_on_grid, SphericalDensity};
use crate::error::{Result, RotorError};
use crate::harmonics::AngularGrid;
use crate::operators::{op_angular, AngularKind};
use crate::optimize::{golden_max, nelder_mead, parabolic_offset};
use crate::rotation::{wigner_d_block, Rotation};
use crate::textio::{format_number, read_table, write_row};

/// Values below this are treated as rounding noise and clipped to zero.
pub const NEGATIVE_CLIP: f64 = 1e-14;

/// Eigenvalue gap below which the orientation tensor has no unique axis.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// A density sampled on a grid, with its harmonic expansion.
#[derive(Clone, Debug)]
pub struct DensityMap {
    grid: AngularGrid,
    values: Vec<f64>,
    expansion: SphericalDensity,
    fast_average: Option<SphericalDensity>,
}

impl DensityMap {
    /// Wraps samples of an arbitrary density. The expansion is fitted up to
    /// the highest degree the grid resolves; coefficient blocks below
    /// `noise * max|a|` are dropped.
    pub fn from_samples(grid: AngularGrid, values: Vec<f64>, noise: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(RotorError::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        let l_max = (grid.n_theta() - 1).min((grid.n_phi() - 1) / 2);
        let expansion = SphericalDensity::analyze(&grid, &values, l_max);
        let expansion = expansion.trimmed_below(noise);
        Ok(Self { grid, values, expansion, fast_average: None })
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[self.grid.flat(i, k)]
    }

    pub fn expansion(&self) -> &SphericalDensity {
        &self.expansion
    }

    /// The density averaged over the fast free rotation, when known.
    pub fn fast_average(&self) -> Option<&SphericalDensity> {
        self.fast_average.as_ref()
    }

    pub fn integral(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.grid.n_theta() {
            let row: f64 = (0..self.grid.n_phi()).map(|k| self.value(i, k)).sum();
            total += row * self.grid.theta_weights()[i];
        }
        total * self.grid.phi_weight()
    }

    /// Grid node with the largest value, as (i, k).
    pub fn argmax(&self) -> (usize, usize) {
        let idx = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0;
        (idx / self.grid.n_phi(), idx % self.grid.n_phi())
    }

    /// Marginal over φ at each θ node.
    pub fn theta_marginal(&self) -> Vec<f64> {
        (0..self.grid.n_theta()).map(|i| (0..self.grid.n_phi()).map(|k| self.value(i, k)).sum::<f64>() * self.grid.phi_weight()).collect()
    }
}

/// `|Σ c_JM Y_JM(θ,φ)|²` at every node of `grid`.
pub fn angular_density(state: &RotorState, grid: &AngularGrid) -> DensityMap {
    let values = wavefunction_on_grid(state, grid)
        .into_iter()
        .map(|c| {
            let v = c.norm_sqr();
            if v < NEGATIVE_CLIP {
                v.max(0.0)
            } else {
                v
            }
        })
        .collect();
    DensityMap {
        grid: grid.clone(),
        values,
        expansion: SphericalDensity::from_state(state),
        fast_average: Some(SphericalDensity::shell_incoherent_from_state(state)),
    }
}

/// Density of `expansion` sampled on `grid`; `fast_average` is carried along.
pub fn density_from_expansion(expansion: SphericalDensity, fast_average: Option<SphericalDensity>, grid: &AngularGrid) -> DensityMap {
    let values = expansion.evaluate_on(grid).into_iter().map(|v| if v < NEGATIVE_CLIP { v.max(0.0) } else { v }).collect();
    DensityMap { grid: grid.clone(), values, expansion, fast_average }
}

/// `(<J_x>, <J_y>, <J_z>)`.
pub fn expectation_j(state: &RotorState) -> Vector3<f64> {
    let b = state.basis();
    let e = |k| op_angular(k, b).expectation(state).expect("operator built on the state basis").re;
    Vector3::new(e(AngularKind::Jx), e(AngularKind::Jy), e(AngularKind::Jz))
}

pub fn fidelity(a: &RotorState, b: &RotorState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

pub fn population(state: &RotorState, j: u32, m: i32) -> f64 {
    state.population(j, m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alignment {
    /// Normal of the rotation plane, sign chosen so its largest component is
    /// positive. `None` when the orientation tensor is degenerate.
    pub normal: Option<Vector3<f64>>,
    /// Angle of the density maximum within the plane, measured from the image
    /// of x̂ under the smallest rotation taking ẑ onto the normal.
    pub azimuth_of_max: Option<f64>,
    /// Orientation-tensor eigenvalues, ascending.
    pub eigenvalues: [f64; 3],
}

impl Alignment {
    pub fn is_degenerate(&self) -> bool {
        self.normal.is_none()
    }
}

/// Plane of rotation and the direction of the density maximum within it.
///
/// The normal is the eigenvector with the smallest eigenvalue of
/// `∫ n̂⊗n̂ ρ dΩ`, taken over the fast-rotation average of the density when
/// available (a single snapshot of a two-tooth cogwheel is a cigar whose
/// narrowest axis lies in the plane, not along its normal).
pub fn alignment_axis(density: &DensityMap) -> Alignment {
    let source = density.fast_average().unwrap_or(density.expansion());
    let (normal, eigenvalues) = plane_normal(source);
    let azimuth_of_max = normal.map(|n| azimuth_of_max(density.expansion(), &n));
    Alignment { normal, azimuth_of_max, eigenvalues }
}

/// Smallest-eigenvalue axis of the orientation tensor of `density`, sign
/// canonicalized, with the ascending eigenvalues. `None` if not unique.
pub fn plane_normal(density: &SphericalDensity) -> (Option<Vector3<f64>>, [f64; 3]) {
    let (values, vectors) = sorted_eigen(&density.orientation_tensor());
    if values[1] - values[0] < DEGENERACY_GAP {
        (None, values)
    } else {
        (Some(canonical_sign(vectors[0])), values)
    }
}

fn sorted_eigen(t: &Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let eig = SymmetricEigen::new(*t);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = idx.map(|i| eig.eigenvalues[i]);
    let vectors = idx.map(|i| eig.eigenvectors.column(i).into_owned());
    (values, vectors)
}

fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let k = v.iamax();
    if v[k] < 0.0 {
        -v
    } else {
        v
    }
}

/// In-plane basis (e₁, e₂) for the great circle normal to `normal`.
pub fn plane_frame(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let r = rotation_taking(&Vector3::z(), normal).matrix();
    (r * Vector3::x(), r * Vector3::y())
}

/// Angle in [0, 2π) of the density maximum on the great circle normal to
/// `normal`, refined to ~1e-8 rad.
pub fn azimuth_of_max(density: &SphericalDensity, normal: &Vector3<f64>) -> f64 {
    let (e1, e2) = plane_frame(normal);
    let f = |psi: f64| density.value_in_direction(&(e1 * psi.cos() + e2 * psi.sin()));
    let n = 720;
    let h = 2.0 * PI / n as f64;
    let samples: Vec<f64> = (0..n).map(|k| f(k as f64 * h)).collect();
    let k = samples.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bk, bv), (k, &v)| if v > bv { (k, v) } else { (bk, bv) }).0;
    let left = samples[(k + n - 1) % n];
    let right = samples[(k + 1) % n];
    let guess = (k as f64 + parabolic_offset(left, samples[k], right)) * h;
    golden_max(&f, guess - h, guess + h, 1e-12).rem_euclid(2.0 * PI)
}

/// Rotation-maximized Bhattacharyya overlap `max_R ∫√ρ₁ √(ρ₂∘R) dΩ`,
/// normalized by `√(∫ρ₁ ∫ρ₂)`. Equals 1 exactly when the densities are rigid
/// rotations of each other. The result is symmetric in its arguments.
pub fn shape_correlation(d1: &DensityMap, d2: &DensityMap) -> Result<f64> {
    if d1.grid().shape() != d2.grid().shape() {
        return Err(RotorError::GridMismatch(d1.grid().shape(), d2.grid().shape()));
    }
    let a = directed_overlap(d1, d2);
    if a >= 1.0 - 1e-12 {
        return Ok(a.min(1.0));
    }
    let b = directed_overlap(d2, d1);
    Ok(a.max(b).clamp(0.0, 1.0))
}

/// Coarse Euler grid for the rotation search (α, β, γ).
pub const COARSE_GRID: (usize, usize, usize) = (36, 19, 36);

fn directed_overlap(d1: &DensityMap, d2: &DensityMap) -> f64 {
    let grid = d1.grid();
    let w: Vec<f64> = (0..grid.len()).map(|idx| grid.weight(idx / grid.n_phi(), idx % grid.n_phi())).collect();
    let sqrt1: Vec<f64> = d1.values().iter().map(|v| v.max(0.0).sqrt()).collect();
    let norm1: f64 = d1.values().iter().zip(&w).map(|(v, w)| v * w).sum();
    let norm2: f64 = d2.values().iter().zip(&w).map(|(v, w)| v * w).sum();
    let scale = (norm1 * norm2).sqrt();
    if scale <= 0.0 {
        return 0.0;
    }
    let e1 = d1.expansion();
    let e2 = d2.expansion();
    let overlap = |r: &Rotation| -> f64 {
        let vals = e2.rotated(r).evaluate_on(grid);
        vals.iter().zip(&sqrt1).zip(&w).map(|((v, s), w)| v.max(0.0).sqrt() * s * w).sum::<f64>() / scale
    };

    // coarse search on the L² overlap Σ conj(a₁)·D a₂. For fixed β it is a
    // trigonometric polynomial in (α, γ) with coefficients M_{m'm}(β).
    let degrees: Vec<usize> = e1.active_degrees().filter(|&l| l > 0 && e2.block(l).is_some()).collect();
    let top = degrees.iter().copied().max().unwrap_or(0) as i64;
    let width = (2 * top + 1) as usize;
    let (na, nb, ng) = COARSE_GRID;
    let phases = |n: usize| -> Vec<Vec<Complex64>> {
        (0..n).map(|k| (-top..=top).map(|m| Complex64::from_polar(1.0, -(m as f64) * 2.0 * PI * k as f64 / n as f64)).collect()).collect()
    };
    let (pa, pg) = (phases(na), phases(ng));
    let mut candidates: Vec<(f64, Rotation)> = Vec::with_capacity(na * nb * ng);
    for ib in 0..nb {
        let beta = PI * ib as f64 / (nb - 1) as f64;
        let mut coef = vec![Complex64::new(0.0, 0.0); width * width];
        for &l in &degrees {
            let d = wigner_d_block(l as u32, 0.0, beta, 0.0);
            let (a1, a2) = (e1.block(l).expect("active"), e2.block(l).expect("active"));
            let off = (top - l as i64) as usize;
            for r in 0..=2 * l {
                let left = a1[r].conj();
                for c in 0..=2 * l {
                    coef[(off + r) * width + off + c] += left * d[(r, c)] * a2[c];
                }
            }
        }
        for (ia, pa) in pa.iter().enumerate() {
            let v: Vec<Complex64> = (0..width).map(|c| (0..width).map(|r| pa[r] * coef[r * width + c]).sum()).collect();
            for (ig, pg) in pg.iter().enumerate() {
                let s: Complex64 = v.iter().zip(pg).map(|(x, y)| x * y).sum();
                let (alpha, gamma) = (2.0 * PI * ia as f64 / na as f64, 2.0 * PI * ig as f64 / ng as f64);
                candidates.push((s.re, Rotation::Euler { alpha, beta, gamma }));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));

    let proxy = |r: &Rotation| -> f64 {
        let rotated = e2.rotated(r);
        degrees
            .iter()
            .map(|&l| {
                let a1 = e1.block(l).expect("active");
                let a2 = rotated.block(l).expect("active");
                a1.iter().zip(a2.iter()).map(|(x, y)| (x.conj() * y).re).sum::<f64>()
            })
            .sum()
    };
    let perturbed = |base: &Rotation, v: &[f64]| -> Rotation {
        let vec = Vector3::new(v[0], v[1], v[2]);
        let angle = vec.norm();
        if angle == 0.0 {
            return *base;
        }
        base.then(&Rotation::AxisAngle { axis: vec / angle, angle })
    };

    let mut best_rot = candidates[0].1;
    let mut best_proxy = f64::NEG_INFINITY;
    for (_, start) in candidates.iter().take(4) {
        let m = nelder_mead(|v| -proxy(&perturbed(start, v)), &[0.0; 3], 0.15, 1e-15, 800);
        if -m.value > best_proxy {
            best_proxy = -m.value;
            best_rot = perturbed(start, &m.x);
        }
    }
    let start_value = overlap(&best_rot);
    if start_value >= 1.0 - 1e-12 {
        return start_value;
    }
    let polished = nelder_mead(|v| -overlap(&perturbed(&best_rot, v)), &[0.0; 3], 0.02, 1e-14, 300);
    start_value.max(-polished.value).max(overlap(&Rotation::identity()))
}

/// Writes `theta phi density` rows, θ outer, nine significant digits.
pub fn write_density_dump<W: Write>(density: &DensityMap, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "theta phi density")?;
    let g = density.grid();
    for i in 0..g.n_theta() {
        for k in 0..g.n_phi() {
            write_row(out, &[format_number(g.theta()[i]), format_number(g.phi()[k]), format_number(density.value(i, k))])?;
        }
    }
    Ok(())
}

/// Reads a dump written by [`write_density_dump`]. The θ nodes must be a
/// Gauss–Legendre set and the φ nodes uniform.
pub fn read_density_dump<R: BufRead>(input: R) -> Result<DensityMap> {
    let table = read_table(input)?;
    if table.header != ["theta", "phi", "density"] {
        return Err(RotorError::Parse { line: 1, message: format!("expected header 'theta phi density', found {:?}", table.header.join(" ")) });
    }
    let first_theta = table.rows.first().ok_or(RotorError::Parse { line: 2, message: "no data rows".into() })?[0];
    let n_phi = table.rows.iter().take_while(|r| r[0] == first_theta).count();
    if n_phi == 0 || table.rows.len() % n_phi != 0 {
        return Err(RotorError::Parse { line: 0, message: "rows do not form a θ × φ grid".into() });
    }
    let n_theta = table.rows.len() / n_phi;
    let grid = AngularGrid::new(n_theta, n_phi);
    for (idx, row) in table.rows.iter().enumerate() {
        let (i, k) = (idx / n_phi, idx % n_phi);
        if (row[0] - grid.theta()[i]).abs() > 1e-7 || (row[1] - grid.phi()[k]).abs() > 1e-7 {
            return Err(RotorError::Parse { line: idx + 2, message: format!("node ({}, {}) is not on the {n_theta}×{n_phi} grid", row[0], row[1]) });
        }
    }
    let values = table.rows.iter().map(|r| r[2]).collect();
    DensityMap::from_samples(grid, values, 1e-7)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::dynamics::{free_propagate, magnetic_propagate_closed, MagneticField, MoleculeParams};
    use crate::preparation::{cogwheel_state, CogwheelSpec};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn cog(phi: f64) -> RotorState {
        cogwheel_state(&CogwheelSpec::new(0, 2, phi), build_basis(8)).unwrap()
    }

    #[test]
    fn ground_state_is_uniform() {
        let g = AngularGrid::default();
        let d = angular_density(&RotorState::eigenstate(build_basis(3), 0, 0).unwrap(), &g);
        for v in d.values() {
            assert_abs_diff_eq!(*v, 1.0 / (4.0 * PI), epsilon = 1e-14);
        }
        assert!(alignment_axis(&d).is_degenerate());
    }

    #[test]
    fn cogwheel_teeth_on_x_axis() {
        let g = AngularGrid::default();
        let d = angular_density(&cog(0.0), &g);
        let (i, k) = d.argmax();
        assert!((g.theta()[i] - PI / 2.0).abs() < PI / 64.0);
        let phi = g.phi()[k];
        assert!(phi.abs() < 1e-12 || (phi - PI).abs() < 1e-12, "{phi}");
        assert_abs_diff_eq!(d.integral(), 1.0, epsilon = 1e-10);
        let a = alignment_axis(&d);
        assert!((a.normal.unwrap() - Vector3::z()).norm() < 1e-10);
        assert_abs_diff_eq!(a.azimuth_of_max.unwrap().rem_euclid(PI), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn single_m_density_has_no_phi_dependence() {
        let g = AngularGrid::new(16, 32);
        let d = angular_density(&RotorState::eigenstate(build_basis(2), 1, 1).unwrap(), &g);
        for i in 0..g.n_theta() {
            for k in 1..g.n_phi() {
                assert_abs_diff_eq!(d.value(i, k), d.value(i, 0), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn expectation_examples() {
        let b = build_basis(4);
        let j = expectation_j(&RotorState::eigenstate(b, 1, 1).unwrap());
        assert!((j - Vector3::z()).norm() < 1e-15);
        for phi in [0.0, 0.7] {
            let j = expectation_j(&cog(phi));
            assert!((j - Vector3::z()).norm() < 1e-14);
        }
        let mol = MoleculeParams::no2_plus();
        let field = MagneticField::along_y(1.0).unwrap();
        let tp = 1.0 / crate::dynamics::precession_frequency(&mol, &field).abs();
        let out = magnetic_propagate_closed(&cog(0.0), &mol, &field, tp / 4.0).unwrap();
        // g_r < 0: +z turns toward +x under a positive rotation about +y
        assert!((expectation_j(&out) - Vector3::x()).norm() < 1e-6);
        let a = alignment_axis(&angular_density(&out, &AngularGrid::default()));
        assert!(a.normal.unwrap().angle(&Vector3::x()) < 1f64.to_radians());
    }

    #[test]
    fn fidelity_and_population() {
        let b = build_basis(3);
        let s = cogwheel_state(&CogwheelSpec::new(0, 2, 0.4), b).unwrap();
        assert_abs_diff_eq!(fidelity(&s, &s).unwrap(), 1.0, epsilon = 1e-15);
        let g = RotorState::eigenstate(b, 0, 0).unwrap();
        assert_eq!(fidelity(&g, &RotorState::eigenstate(b, 2, 2).unwrap()).unwrap(), 0.0);
        assert_abs_diff_eq!(population(&s, 2, 2), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn shape_correlation_examples() {
        let g = AngularGrid::default();
        let d0 = angular_density(&cog(0.0), &g);
        assert_abs_diff_eq!(shape_correlation(&d0, &d0).unwrap(), 1.0, epsilon = 1e-10);
        let later = free_propagate(&cog(0.0), &MoleculeParams::no2_plus(), 3.1e-12);
        let d1 = angular_density(&later, &g);
        assert!(shape_correlation(&d0, &d1).unwrap() > 1.0 - 1e-6);
        let uni = angular_density(&RotorState::eigenstate(build_basis(8), 0, 0).unwrap(), &g);
        let c = shape_correlation(&d0, &uni).unwrap();
        assert!(c < 0.97, "{c}");
        let c2 = shape_correlation(&uni, &d0).unwrap();
        assert_abs_diff_eq!(c, c2, epsilon = 1e-9);
        // against the uniform density every rotation gives the same overlap up to
        // the grid quadrature error of √ρ, which is not band-limited
        let direct: f64 = (0..g.len())
            .map(|idx| {
                let (i, k) = (idx / g.n_phi(), idx % g.n_phi());
                g.weight(i, k) * (d0.value(i, k) / (4.0 * PI)).sqrt()
            })
            .sum();
        assert_abs_diff_eq!(c, direct, epsilon = 1e-4);
        let small = angular_density(&cog(0.0), &AngularGrid::new(8, 16));
        assert!(matches!(shape_correlation(&d0, &small), Err(RotorError::GridMismatch(..))));
    }

    #[test]
    fn spreading_state_scores_below_one() {
        // three shells dephase: not a rigid rotation
        let b = build_basis(4);
        let mut s = RotorState::zeros(b);
        s.set_amplitude(0, 0, Complex64::new(0.6, 0.0)).unwrap();
        s.set_amplitude(2, 2, Complex64::new(0.6, 0.0)).unwrap();
        s.set_amplitude(4, 4, Complex64::new(0.52915, 0.0)).unwrap();
        let s = s.normalized();
        let g = AngularGrid::new(32, 64);
        let d0 = angular_density(&s, &g);
        let d1 = angular_density(&free_propagate(&s, &MoleculeParams::no2_plus(), 5e-12), &g);
        assert!(shape_correlation(&d0, &d1).unwrap() < 0.999);
    }

    #[test]
    fn dump_round_trip() {
        let g = AngularGrid::new(10, 20);
        let d = angular_density(&cog(PI / 6.0), &g);
        let mut buf = Vec::new();
        write_density_dump(&d, &mut buf).unwrap();
        let back = read_density_dump(buf.as_slice()).unwrap();
        for (a, b) in d.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-3));
        }
        let mut again = Vec::new();
        write_density_dump(&back, &mut again).unwrap();
        assert_eq!(buf, again);
        assert!(read_density_dump("theta phi rho\n0 0 1\n".as_bytes()).is_err());
    }

    #[test]
    fn free_evolution_keeps_theta_marginal() {
        let b = build_basis(5);
        let mut s = RotorState::zeros(b);
        s.set_amplitude(1, 0, Complex64::new(0.5, 0.2)).unwrap();
        s.set_amplitude(3, -2, Complex64::new(0.1, 0.6)).unwrap();
        s.set_amplitude(5, 1, Complex64::new(-0.3, 0.2)).unwrap();
        let s = s.normalized();
        let g = AngularGrid::default();
        let m0 = angular_density(&s, &g).theta_marginal();
        let m1 = angular_density(&free_propagate(&s, &MoleculeParams::no2_plus(), 2.2e-11), &g).theta_marginal();
        for (a, b) in m0.iter().zip(&m1) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }
}
