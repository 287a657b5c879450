//! Dense operators on a [`RotorBasis`]: angular momentum, the molecular-axis
//! direction tensor `n_i n_j`, and the laser coupling `(â·n̂)²`.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;

use crate::basis::{RotorBasis, RotorState};
use crate::error::{Result, RotorError};

const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;
const UNIT_AXIS_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    basis: RotorBasis,
    matrix: DMatrix<Complex64>,
    hermitian: bool,
    unitary: bool,
}

impl Operator {
    /// Wraps a matrix without asserting any structure.
    pub fn general(basis: RotorBasis, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = basis.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(RotorError::DimensionMismatch { expected: d, found: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Self { basis, matrix, hermitian: false, unitary: false })
    }

    /// Wraps a matrix, setting the Hermitian flag if `max|A - A†|` is below 1e-12
    /// relative to the largest entry.
    pub fn new(basis: RotorBasis, matrix: DMatrix<Complex64>) -> Result<Self> {
        let mut op = Self::general(basis, matrix)?;
        op.hermitian = op.hermiticity_error() <= HERMITIAN_TOL * op.max_abs().max(1.0);
        op.unitary = op.unitarity_error() <= UNITARY_TOL;
        Ok(op)
    }

    pub(crate) fn from_parts(basis: RotorBasis, matrix: DMatrix<Complex64>, hermitian: bool, unitary: bool) -> Self {
        Self { basis, matrix, hermitian, unitary }
    }

    pub fn identity(basis: RotorBasis) -> Self {
        Self::from_parts(basis, DMatrix::identity(basis.dim(), basis.dim()), true, true)
    }

    pub fn zeros(basis: RotorBasis) -> Self {
        Self::from_parts(basis, DMatrix::zeros(basis.dim(), basis.dim()), true, false)
    }

    pub fn basis(&self) -> RotorBasis {
        self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn element(&self, jp: u32, mp: i32, j: u32, m: i32) -> Complex64 {
        match (self.basis.index(jp, mp), self.basis.index(j, m)) {
            (Some(r), Some(c)) => self.matrix[(r, c)],
            _ => ZERO,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.matrix.nrows();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn unitarity_error(&self) -> f64 {
        let prod = self.matrix.adjoint() * &self.matrix;
        let d = prod.nrows();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((prod[(r, c)] - target).norm());
            }
        }
        worst
    }

    pub fn adjoint(&self) -> Self {
        Self::from_parts(self.basis, self.matrix.adjoint(), self.hermitian, self.unitary)
    }

    pub fn apply(&self, state: &RotorState) -> Result<RotorState> {
        if state.basis() != self.basis {
            return Err(RotorError::BasisMismatch { expected: self.basis.j_max(), found: state.basis().j_max() });
        }
        RotorState::from_amplitudes(self.basis, &self.matrix * state.amplitudes())
    }

    /// `<ψ|A|ψ>`.
    pub fn expectation(&self, state: &RotorState) -> Result<Complex64> {
        let applied = self.apply(state)?;
        state.inner(&applied)
    }

    pub fn compose(&self, rhs: &Operator) -> Self {
        assert_eq!(self.basis, rhs.basis, "operators on different bases");
        let unitary = self.unitary && rhs.unitary;
        Self::from_parts(self.basis, &self.matrix * &rhs.matrix, false, unitary)
    }

    /// `U A U†`.
    pub fn conjugate_by(&self, u: &Operator) -> Self {
        assert_eq!(self.basis, u.basis, "operators on different bases");
        let m = &u.matrix * &self.matrix * u.matrix.adjoint();
        Self::from_parts(self.basis, m, self.hermitian && u.unitary, self.unitary && u.unitary)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_parts(self.basis, &self.matrix * Complex64::new(factor, 0.0), self.hermitian, false)
    }

    /// `Σ cᵢ Aᵢ` with real coefficients; Hermitian if every term is.
    pub fn linear_combination(terms: &[(f64, &Operator)]) -> Self {
        let (_, first) = terms.first().expect("at least one term");
        let basis = first.basis;
        let mut m = DMatrix::zeros(basis.dim(), basis.dim());
        let mut hermitian = true;
        for (c, op) in terms {
            assert_eq!(op.basis, basis, "operators on different bases");
            if *c != 0.0 {
                m += &op.matrix * Complex64::new(*c, 0.0);
            }
            hermitian &= op.hermitian;
        }
        Self::from_parts(basis, m, hermitian, false)
    }

    /// Copies the `j ≤ basis.j_max` corner of an operator built on a larger basis.
    fn truncated(&self, basis: RotorBasis) -> Self {
        assert!(basis.j_max() <= self.basis.j_max());
        let d = basis.dim();
        // J-major ordering makes the smaller basis a leading block
        let m = self.matrix.view((0, 0), (d, d)).into_owned();
        Self::from_parts(basis, m, self.hermitian, false)
    }

    fn symmetrized(mut self) -> Self {
        let m = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        self.matrix = m;
        self.hermitian = true;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngularKind {
    JSquared,
    Jz,
    JPlus,
    JMinus,
    Jx,
    Jy,
}

fn ladder_coefficient(j: u32, m: i32, up: bool) -> f64 {
    let jf = j as f64;
    let mf = m as f64;
    let arg = if up { jf * (jf + 1.0) - mf * (mf + 1.0) } else { jf * (jf + 1.0) - mf * (mf - 1.0) };
    arg.max(0.0).sqrt()
}

/// Angular momentum operators in units of ħ.
pub fn op_angular(kind: AngularKind, basis: RotorBasis) -> Operator {
    let d = basis.dim();
    let mut m = DMatrix::from_element(d, d, ZERO);
    match kind {
        AngularKind::JSquared => {
            for (i, j, _) in basis.levels() {
                m[(i, i)] = Complex64::new((j * (j + 1)) as f64, 0.0);
            }
            Operator::from_parts(basis, m, true, false)
        }
        AngularKind::Jz => {
            for (i, _, mm) in basis.levels() {
                m[(i, i)] = Complex64::new(mm as f64, 0.0);
            }
            Operator::from_parts(basis, m, true, false)
        }
        AngularKind::JPlus | AngularKind::JMinus => {
            let up = kind == AngularKind::JPlus;
            for (i, j, mm) in basis.levels() {
                let target = if up { mm + 1 } else { mm - 1 };
                if let Some(r) = basis.index(j, target) {
                    m[(r, i)] = Complex64::new(ladder_coefficient(j, mm, up), 0.0);
                }
            }
            Operator::from_parts(basis, m, false, false)
        }
        AngularKind::Jx | AngularKind::Jy => {
            let plus = op_angular(AngularKind::JPlus, basis);
            let minus = op_angular(AngularKind::JMinus, basis);
            let mat = if kind == AngularKind::Jx {
                (plus.matrix + minus.matrix) * Complex64::new(0.5, 0.0)
            } else {
                // (J+ - J-)/(2i)
                (plus.matrix - minus.matrix) * Complex64::new(0.0, -0.5)
            };
            Operator::from_parts(basis, mat, true, false)
        }
    }
}

/// Diagonal of J² without building a matrix.
pub fn j_squared_diagonal(basis: RotorBasis) -> DVector<f64> {
    DVector::from_iterator(basis.dim(), basis.levels().map(|(_, j, _)| (j * (j + 1)) as f64))
}

/// Closed-form `<J',M|cos²θ|J,M>` about the space-fixed z axis.
pub fn cos2_matrix_element(jp: u32, j: u32, m: i32) -> f64 {
    if m.unsigned_abs() > j || m.unsigned_abs() > jp {
        return 0.0;
    }
    let (lo, hi) = if jp <= j { (jp, j) } else { (j, jp) };
    let jf = lo as f64;
    let mf = m as f64;
    match hi - lo {
        0 => {
            let denom = (2.0 * jf - 1.0) * (2.0 * jf + 3.0);
            1.0 / 3.0 + 2.0 / 3.0 * (jf * (jf + 1.0) - 3.0 * mf * mf) / denom
        }
        2 => {
            let num = (((jf + 1.0).powi(2) - mf * mf) * ((jf + 2.0).powi(2) - mf * mf)).sqrt();
            num / ((2.0 * jf + 3.0) * ((2.0 * jf + 1.0) * (2.0 * jf + 5.0)).sqrt())
        }
        _ => 0.0,
    }
}

/// The six components `n_i n_j` of the molecular-axis direction tensor.
#[derive(Clone, Debug)]
pub struct DirectionTensor {
    basis: RotorBasis,
    // xx, yy, zz, xy, yz, zx
    parts: [Operator; 6],
}

impl DirectionTensor {
    pub fn xx(&self) -> &Operator {
        &self.parts[0]
    }
    pub fn yy(&self) -> &Operator {
        &self.parts[1]
    }
    pub fn zz(&self) -> &Operator {
        &self.parts[2]
    }
    pub fn xy(&self) -> &Operator {
        &self.parts[3]
    }
    pub fn yz(&self) -> &Operator {
        &self.parts[4]
    }
    pub fn zx(&self) -> &Operator {
        &self.parts[5]
    }

    pub fn basis(&self) -> RotorBasis {
        self.basis
    }

    /// `n_i n_j` for Cartesian indices 0..3.
    pub fn component(&self, i: usize, j: usize) -> &Operator {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.xx(),
            (1, 1) => self.yy(),
            (2, 2) => self.zz(),
            (0, 1) => self.xy(),
            (1, 2) => self.yz(),
            (0, 2) => self.zx(),
            _ => panic!("Cartesian index out of range"),
        }
    }

    /// `(â·n̂)² = Σ a_i a_j n_i n_j`. No normalization check on `a`.
    pub fn project(&self, a: &Vector3<f64>) -> Operator {
        Operator::linear_combination(&[
            (a.x * a.x, self.xx()),
            (a.y * a.y, self.yy()),
            (a.z * a.z, self.zz()),
            (2.0 * a.x * a.y, self.xy()),
            (2.0 * a.y * a.z, self.yz()),
            (2.0 * a.z * a.x, self.zx()),
        ])
    }

    /// Orientation tensor `<n_i n_j>` of a state.
    pub fn orientation(&self, state: &RotorState) -> Result<nalgebra::Matrix3<f64>> {
        let mut t = nalgebra::Matrix3::zeros();
        for i in 0..3 {
            for j in i..3 {
                let v = self.component(i, j).expectation(state)?.re;
                t[(i, j)] = v;
                t[(j, i)] = v;
            }
        }
        Ok(t)
    }
}

/// Builds `n_i n_j` as products of the first-rank operators `n_i` on a basis
/// one shell larger, then keeps the `j ≤ j_max` block. Intermediate states
/// reach at most `j_max + 1`, so the kept block is exact and
/// `n_x² + n_y² + n_z² = I` holds up to rounding.
pub fn symmetric_tensor_ops(basis: RotorBasis) -> DirectionTensor {
    let ext = RotorBasis::new(basis.j_max() + 1);
    let d = ext.dim();
    let mut nz = DMatrix::from_element(d, d, ZERO);
    let mut nplus = DMatrix::from_element(d, d, ZERO);
    for (col, l, m) in ext.levels() {
        let lf = l as f64;
        let mf = m as f64;
        // cos θ Y_lm
        if let Some(row) = ext.index(l + 1, m) {
            let v = (((lf + 1.0).powi(2) - mf * mf) / ((2.0 * lf + 1.0) * (2.0 * lf + 3.0))).sqrt();
            nz[(row, col)] = Complex64::new(v, 0.0);
            nz[(col, row)] = Complex64::new(v, 0.0);
        }
        // sin θ e^{iφ} Y_lm, Condon–Shortley
        if let Some(row) = ext.index(l + 1, m + 1) {
            let v = -((lf + mf + 1.0) * (lf + mf + 2.0) / ((2.0 * lf + 1.0) * (2.0 * lf + 3.0))).sqrt();
            nplus[(row, col)] = Complex64::new(v, 0.0);
        }
        if l >= 1 {
            if let Some(row) = ext.index(l - 1, m + 1) {
                let v = ((lf - mf) * (lf - mf - 1.0) / ((2.0 * lf - 1.0) * (2.0 * lf + 1.0))).sqrt();
                nplus[(row, col)] = Complex64::new(v, 0.0);
            }
        }
    }
    let nminus = nplus.adjoint();
    let nx = (&nplus + &nminus) * Complex64::new(0.5, 0.0);
    let ny = (&nplus - &nminus) * Complex64::new(0.0, -0.5);
    let first = [nx, ny, nz];
    let product = |a: usize, b: usize| {
        let m = &first[a] * &first[b];
        Operator::from_parts(ext, m, false, false).symmetrized().truncated(basis)
    };
    DirectionTensor {
        basis,
        parts: [product(0, 0), product(1, 1), product(2, 2), product(0, 1), product(1, 2), product(2, 0)],
    }
}

pub(crate) fn check_unit_axis(axis: &Vector3<f64>) -> Result<()> {
    let norm = axis.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_AXIS_TOL {
        return Err(RotorError::NonUnitAxis { norm });
    }
    Ok(())
}

/// `(â·n̂)²` for a unit lab-frame axis `â`.
pub fn cos2theta_op(axis: &Vector3<f64>, basis: RotorBasis) -> Result<Operator> {
    check_unit_axis(axis)?;
    Ok(symmetric_tensor_ops(basis).project(axis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::quadrature_oracle;
    use approx::assert_abs_diff_eq;

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    #[test]
    fn angular_elements() {
        let b = RotorBasis::new(3);
        let jz = op_angular(AngularKind::Jz, b);
        assert_abs_diff_eq!(jz.element(1, 1, 1, 1).re, 1.0);
        let j2 = op_angular(AngularKind::JSquared, b);
        for m in -2..=2 {
            assert_abs_diff_eq!(j2.element(2, m, 2, m).re, 6.0);
        }
        let jp = op_angular(AngularKind::JPlus, b);
        assert_abs_diff_eq!(jp.element(1, 1, 1, 0).re, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(jp.element(1, 0, 1, 1).norm(), 0.0);
        for k in [AngularKind::JSquared, AngularKind::Jz, AngularKind::Jx, AngularKind::Jy] {
            let op = op_angular(k, b);
            assert!(op.is_hermitian());
            assert!(op.hermiticity_error() < 1e-14);
        }
    }

    #[test]
    fn commutator_jx_jy_is_i_jz() {
        let b = RotorBasis::new(6);
        let jx = op_angular(AngularKind::Jx, b);
        let jy = op_angular(AngularKind::Jy, b);
        let jz = op_angular(AngularKind::Jz, b);
        let comm = jx.matrix() * jy.matrix() - jy.matrix() * jx.matrix();
        let target = jz.matrix() * Complex64::new(0.0, 1.0);
        // J is block diagonal, so the identity holds on every shell including the top
        assert!(max_diff(&comm, &target) < 1e-10);
    }

    #[test]
    fn j_squared_equals_sum_of_squares() {
        let b = RotorBasis::new(5);
        let [jx, jy, jz] = [AngularKind::Jx, AngularKind::Jy, AngularKind::Jz].map(|k| op_angular(k, b).matrix().clone());
        let sum = &jx * &jx + &jy * &jy + &jz * &jz;
        assert!(max_diff(&sum, op_angular(AngularKind::JSquared, b).matrix()) < 1e-12);
    }

    #[test]
    fn cos2_examples() {
        let b = RotorBasis::new(4);
        let c = cos2theta_op(&Vector3::z(), b).unwrap();
        assert_abs_diff_eq!(c.element(0, 0, 0, 0).re, 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.element(2, 0, 0, 0).re, 0.298_142_396_999_972, epsilon = 1e-12);
        assert_abs_diff_eq!(c.element(1, 1, 1, 1).re, 0.2, epsilon = 1e-14);
        assert!(c.is_hermitian());
        assert!(cos2theta_op(&Vector3::new(1.0, 1.0, 0.0), b).is_err());
    }

    #[test]
    fn cos2_closed_form_matches_operator() {
        let b = RotorBasis::new(8);
        let c = cos2theta_op(&Vector3::z(), b).unwrap();
        for (_, j, m) in b.levels() {
            for jp in [j, j + 2] {
                if jp > 8 {
                    continue;
                }
                assert_abs_diff_eq!(c.element(jp, m, j, m).re, cos2_matrix_element(jp, j, m), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn tensor_elements_match_quadrature_oracle() {
        let b = RotorBasis::new(3);
        let t = symmetric_tensor_ops(b);
        let kernels: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];
        for (i, j) in kernels {
            let op = t.component(i, j);
            for (_, jp, mp) in b.levels() {
                for (_, jj, mm) in b.levels() {
                    let oracle = quadrature_oracle(jp, mp, jj, mm, |th, ph| {
                        let n = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
                        Complex64::new(n[i] * n[j], 0.0)
                    })
                    .unwrap();
                    let diff = (op.element(jp, mp, jj, mm) - oracle).norm();
                    assert!(diff < 1e-10, "n{i}n{j} <{jp},{mp}|.|{jj},{mm}> off by {diff}");
                }
            }
        }
    }

    #[test]
    fn tensor_trace_identity_and_isotropy() {
        let b = RotorBasis::new(4);
        let t = symmetric_tensor_ops(b);
        let sum = t.xx().matrix() + t.yy().matrix() + t.zz().matrix();
        assert!(max_diff(&sum, &DMatrix::identity(b.dim(), b.dim())) < 1e-12);
        assert_abs_diff_eq!(t.zz().element(0, 0, 0, 0).re, 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t.xy().element(0, 0, 0, 0).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn selection_rules() {
        let b = RotorBasis::new(6);
        let cz = cos2theta_op(&Vector3::z(), b).unwrap();
        let cx = cos2theta_op(&Vector3::x(), b).unwrap();
        for (r, jp, mp) in b.levels() {
            for (c, j, m) in b.levels() {
                let dj = jp as i32 - j as i32;
                let dm = mp - m;
                if dm != 0 {
                    assert_eq!(cz.matrix()[(r, c)].norm(), 0.0);
                }
                if !(dj == 0 || dj.abs() == 2) || !(dm == 0 || dm.abs() == 2) {
                    assert_eq!(cx.matrix()[(r, c)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn cos2_eigenvalues_in_unit_interval() {
        let b = RotorBasis::new(6);
        let axis = Vector3::new(0.3, -0.5, 0.7).normalize();
        let c = cos2theta_op(&axis, b).unwrap();
        let eig = nalgebra::SymmetricEigen::new(c.matrix().clone());
        for ev in eig.eigenvalues.iter() {
            assert!(*ev > -1e-12 && *ev < 1.0 + 1e-12, "eigenvalue {ev}");
        }
    }
}
