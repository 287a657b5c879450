//! Finite rotations: Euler (z-y-z) and axis–angle parametrizations, Wigner
//! d/D matrices, and the block-diagonal rotation operator on a rotor basis.
//!
//! Rotations are active. `U(α,β,γ) = exp(-iαJz) exp(-iβJy) exp(-iγJz)` and
//! `<J,M'|U|J,M> = e^{-iM'α} d^J_{M'M}(β) e^{-iMγ}`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Rotation3, Unit, Vector3};
use num_complex::Complex64;

use crate::basis::RotorBasis;
use crate::error::Result;
use crate::operators::{check_unit_axis, Operator};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rotation {
    Euler { alpha: f64, beta: f64, gamma: f64 },
    AxisAngle { axis: Vector3<f64>, angle: f64 },
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation::Euler { alpha: 0.0, beta: 0.0, gamma: 0.0 }
    }

    pub fn about_y(angle: f64) -> Self {
        Rotation::Euler { alpha: 0.0, beta: angle, gamma: 0.0 }
    }

    pub fn about_z(angle: f64) -> Self {
        Rotation::Euler { alpha: angle, beta: 0.0, gamma: 0.0 }
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let (alpha, beta, gamma) = euler_zyz_from_matrix(m);
        Rotation::Euler { alpha, beta, gamma }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        match *self {
            Rotation::Euler { alpha, beta, gamma } => {
                let rz = |a: f64| Rotation3::from_axis_angle(&Vector3::z_axis(), a);
                let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), beta);
                (rz(alpha) * ry * rz(gamma)).into_inner()
            }
            Rotation::AxisAngle { axis, angle } => {
                Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner()
            }
        }
    }

    pub fn euler_zyz(&self) -> (f64, f64, f64) {
        match *self {
            Rotation::Euler { alpha, beta, gamma } => (alpha, beta, gamma),
            Rotation::AxisAngle { .. } => euler_zyz_from_matrix(&self.matrix()),
        }
    }

    pub fn inverse(&self) -> Self {
        match *self {
            Rotation::Euler { alpha, beta, gamma } => Rotation::Euler { alpha: -gamma, beta: -beta, gamma: -alpha },
            Rotation::AxisAngle { axis, angle } => Rotation::AxisAngle { axis, angle: -angle },
        }
    }

    pub fn then(&self, next: &Rotation) -> Self {
        Rotation::from_matrix(&(next.matrix() * self.matrix()))
    }

    fn validate(&self) -> Result<()> {
        if let Rotation::AxisAngle { axis, .. } = self {
            check_unit_axis(axis)?;
        }
        Ok(())
    }
}

/// z-y-z Euler angles of a proper rotation matrix, β ∈ [0, π].
pub fn euler_zyz_from_matrix(m: &Matrix3<f64>) -> (f64, f64, f64) {
    let sin_beta = (m[(0, 2)].powi(2) + m[(1, 2)].powi(2)).sqrt();
    let beta = sin_beta.atan2(m[(2, 2)]);
    if sin_beta > 1e-12 {
        let alpha = m[(1, 2)].atan2(m[(0, 2)]);
        let gamma = m[(2, 1)].atan2(-m[(2, 0)]);
        (alpha, beta, gamma)
    } else if m[(2, 2)] > 0.0 {
        (m[(1, 0)].atan2(m[(0, 0)]), 0.0, 0.0)
    } else {
        ((-m[(1, 0)]).atan2(-m[(0, 0)]), PI, 0.0)
    }
}

fn factorial(n: i64) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Wigner small-d `d^J_{M'M}(β) = <J,M'|exp(-iβJy)|J,M>` by Wigner's sum.
pub fn wigner_small_d(j: u32, mp: i32, m: i32, beta: f64) -> f64 {
    let (j, mp, m) = (j as i64, mp as i64, m as i64);
    if mp.abs() > j || m.abs() > j {
        return 0.0;
    }
    let c = (beta / 2.0).cos();
    let s = (beta / 2.0).sin();
    let pref = (factorial(j + mp) * factorial(j - mp) * factorial(j + m) * factorial(j - m)).sqrt();
    let k_min = 0.max(m - mp);
    let k_max = (j + m).min(j - mp);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let sign = if (k - m + mp) % 2 == 0 { 1.0 } else { -1.0 };
        let denom = factorial(j + m - k) * factorial(k) * factorial(j - k - mp) * factorial(k - m + mp);
        sum += sign * c.powi((2 * j - 2 * k + m - mp) as i32) * s.powi((2 * k - m + mp) as i32) / denom;
    }
    pref * sum
}

/// The (2J+1)×(2J+1) block of D^J, rows M' and columns M ascending from -J.
pub fn wigner_d_block(j: u32, alpha: f64, beta: f64, gamma: f64) -> DMatrix<Complex64> {
    let n = 2 * j as usize + 1;
    let ji = j as i32;
    DMatrix::from_fn(n, n, |r, c| {
        let mp = r as i32 - ji;
        let m = c as i32 - ji;
        let d = wigner_small_d(j, mp, m, beta);
        Complex64::from_polar(d, -(mp as f64) * alpha - (m as f64) * gamma)
    })
}

/// Per-shell D blocks for shells 0..=j_max.
pub fn wigner_d_blocks(rotation: &Rotation, j_max: u32) -> Vec<DMatrix<Complex64>> {
    let (a, b, g) = rotation.euler_zyz();
    (0..=j_max).map(|j| wigner_d_block(j, a, b, g)).collect()
}

/// Block-diagonal unitary `U(R)` on the basis.
pub fn wigner_rotation(rotation: &Rotation, basis: RotorBasis) -> Result<Operator> {
    rotation.validate()?;
    let d = basis.dim();
    let mut m = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for (j, block) in wigner_d_blocks(rotation, basis.j_max()).into_iter().enumerate() {
        let off = j * j;
        m.view_mut((off, off), (block.nrows(), block.ncols())).copy_from(&block);
    }
    Ok(Operator::from_parts(basis, m, false, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{cos2theta_op, op_angular, AngularKind};
    use approx::assert_abs_diff_eq;

    /// exp(-iβJy) through the Hermitian eigendecomposition of Jy; independent
    /// of Wigner's sum.
    fn exp_jy(beta: f64, basis: RotorBasis) -> DMatrix<Complex64> {
        let jy = op_angular(AngularKind::Jy, basis).matrix().clone();
        let eig = nalgebra::SymmetricEigen::new(jy);
        let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -beta * l)));
        &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
    }

    #[test]
    fn identity_and_full_turn() {
        let b = RotorBasis::new(5);
        let u = wigner_rotation(&Rotation::identity(), b).unwrap();
        assert!((u.matrix() - DMatrix::identity(b.dim(), b.dim())).norm() < 1e-14);
        for axis in [Vector3::x(), Vector3::y(), Vector3::new(1.0, 2.0, -2.0) / 3.0] {
            let u = wigner_rotation(&Rotation::AxisAngle { axis, angle: 2.0 * PI }, b).unwrap();
            assert!((u.matrix() - DMatrix::identity(b.dim(), b.dim())).norm() < 1e-12);
        }
    }

    #[test]
    fn small_d_examples() {
        assert_abs_diff_eq!(wigner_small_d(1, 0, 0, PI / 3.0), 0.5, epsilon = 1e-15);
        let b = RotorBasis::new(1);
        let oracle = exp_jy(PI / 3.0, b);
        let i0 = b.index(1, 0).unwrap();
        assert_abs_diff_eq!(oracle[(i0, i0)].re, 0.5, epsilon = 1e-13);
    }

    #[test]
    fn d_matches_matrix_exponential_of_jy() {
        let b = RotorBasis::new(8);
        for beta in [0.3, 1.1, 2.9, -0.7] {
            let u = wigner_rotation(&Rotation::about_y(beta), b).unwrap();
            let diff = (u.matrix() - exp_jy(beta, b)).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            assert!(diff < 1e-11, "beta={beta}: {diff}");
        }
    }

    #[test]
    fn unitary() {
        let b = RotorBasis::new(8);
        let u = wigner_rotation(&Rotation::Euler { alpha: 0.4, beta: 1.9, gamma: -2.2 }, b).unwrap();
        assert!(u.unitarity_error() < 1e-10);
    }

    #[test]
    fn euler_round_trip() {
        for r in [
            Rotation::Euler { alpha: 0.4, beta: 1.9, gamma: -2.2 },
            Rotation::Euler { alpha: 0.4, beta: 0.0, gamma: 0.3 },
            Rotation::Euler { alpha: 0.4, beta: PI, gamma: 0.3 },
            Rotation::AxisAngle { axis: Vector3::new(0.0, 0.6, 0.8), angle: 2.5 },
        ] {
            let m = r.matrix();
            let back = Rotation::from_matrix(&m).matrix();
            assert!((m - back).norm() < 1e-12);
        }
    }

    #[test]
    fn conjugating_cos2_rotates_its_axis() {
        let b = RotorBasis::new(6);
        let rot = Rotation::Euler { alpha: 0.7, beta: 1.2, gamma: -0.4 };
        let u = wigner_rotation(&rot, b).unwrap();
        let cz = cos2theta_op(&Vector3::z(), b).unwrap();
        let rotated_axis = rot.matrix() * Vector3::z();
        let target = cos2theta_op(&rotated_axis, b).unwrap();
        let got = cz.conjugate_by(&u);
        let diff = (got.matrix() - target.matrix()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn composition_matches_matrix_product() {
        let b = RotorBasis::new(4);
        let r1 = Rotation::Euler { alpha: 0.2, beta: 0.9, gamma: 1.4 };
        let r2 = Rotation::AxisAngle { axis: Vector3::new(1.0, 0.0, 0.0), angle: 0.8 };
        let u12 = wigner_rotation(&r1.then(&r2), b).unwrap();
        let prod = wigner_rotation(&r2, b).unwrap().compose(&wigner_rotation(&r1, b).unwrap());
        assert!((u12.matrix() - prod.matrix()).norm() < 1e-12);
    }
}
