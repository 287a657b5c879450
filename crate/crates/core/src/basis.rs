//! The |J,M> basis of a linear rigid rotor truncated at `j_max`, and states on it.
//!
//! Ordering is J-major with M ascending, so the flat index of |J,M> is
//! `J^2 + J + M`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Result, RotorError};

/// Population in the two highest J shells above which propagation logs a
/// truncation warning.
pub const TRUNCATION_WARN_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RotorBasis {
    j_max: u32,
}

impl RotorBasis {
    pub fn new(j_max: u32) -> Self {
        Self { j_max }
    }

    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    pub fn dim(&self) -> usize {
        let n = self.j_max as usize + 1;
        n * n
    }

    pub fn contains(&self, j: u32, m: i32) -> bool {
        j <= self.j_max && m.unsigned_abs() <= j
    }

    pub fn index(&self, j: u32, m: i32) -> Option<usize> {
        if !self.contains(j, m) {
            return None;
        }
        let j = j as i64;
        Some((j * j + j + m as i64) as usize)
    }

    pub fn level(&self, index: usize) -> (u32, i32) {
        assert!(index < self.dim(), "index {index} outside basis of dimension {}", self.dim());
        let j = (index as f64).sqrt() as usize;
        // guard the float sqrt against off-by-one at perfect squares
        let j = if (j + 1) * (j + 1) <= index {
            j + 1
        } else if j * j > index {
            j - 1
        } else {
            j
        };
        let m = index as i64 - (j * j + j) as i64;
        (j as u32, m as i32)
    }

    /// Iterates `(index, J, M)` in storage order.
    pub fn levels(&self) -> impl Iterator<Item = (usize, u32, i32)> + '_ {
        (0..=self.j_max).flat_map(|j| (-(j as i32)..=j as i32).map(move |m| (j, m))).enumerate().map(|(i, (j, m))| (i, j, m))
    }
}

pub fn build_basis(j_max: u32) -> RotorBasis {
    RotorBasis::new(j_max)
}

/// Complex amplitudes over a [`RotorBasis`].
#[derive(Clone, Debug, PartialEq)]
pub struct RotorState {
    basis: RotorBasis,
    amplitudes: DVector<Complex64>,
}

impl RotorState {
    pub fn zeros(basis: RotorBasis) -> Self {
        Self { basis, amplitudes: DVector::zeros(basis.dim()) }
    }

    /// The eigenstate |J,M>.
    pub fn eigenstate(basis: RotorBasis, j: u32, m: i32) -> Result<Self> {
        let idx = basis.index(j, m).ok_or(RotorError::InvalidQuantumNumbers { j: j as i64, m: m as i64 })?;
        let mut s = Self::zeros(basis);
        s.amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(basis: RotorBasis, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(RotorError::DimensionMismatch { expected: basis.dim(), found: amplitudes.len() });
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn basis(&self) -> RotorBasis {
        self.basis
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut DVector<Complex64> {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, j: u32, m: i32) -> Complex64 {
        self.basis.index(j, m).map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }

    pub fn set_amplitude(&mut self, j: u32, m: i32, value: Complex64) -> Result<()> {
        let idx = self.basis.index(j, m).ok_or(RotorError::InvalidQuantumNumbers { j: j as i64, m: m as i64 })?;
        self.amplitudes[idx] = value;
        Ok(())
    }

    pub fn population(&self, j: u32, m: i32) -> f64 {
        self.amplitude(j, m).norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes.unscale_mut(n);
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &RotorState) -> Result<Complex64> {
        self.check_same_basis(other)?;
        Ok(self.amplitudes.iter().zip(other.amplitudes.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    /// Euclidean distance between amplitude vectors.
    pub fn distance(&self, other: &RotorState) -> Result<f64> {
        self.check_same_basis(other)?;
        Ok((&self.amplitudes - &other.amplitudes).norm())
    }

    /// Total population of shell J.
    pub fn shell_population(&self, j: u32) -> f64 {
        if j > self.basis.j_max {
            return 0.0;
        }
        (-(j as i32)..=j as i32).map(|m| self.population(j, m)).sum()
    }

    /// Population in the two highest J shells, the proxy for truncation error.
    pub fn top_shell_population(&self) -> f64 {
        let top = self.basis.j_max;
        let mut p = self.shell_population(top);
        if top > 0 {
            p += self.shell_population(top - 1);
        }
        p
    }

    /// Re-expresses the state on a larger (or equal) basis, zero-padding.
    pub fn embed(&self, basis: RotorBasis) -> Result<Self> {
        if basis.j_max < self.basis.j_max {
            let dropped: f64 = ((basis.j_max + 1)..=self.basis.j_max).map(|j| self.shell_population(j)).sum();
            if dropped > 0.0 {
                return Err(RotorError::InvalidParameter(format!(
                    "cannot shrink basis to j_max={}: population {dropped:e} would be dropped",
                    basis.j_max
                )));
            }
        }
        let mut out = Self::zeros(basis);
        for (i, j, m) in self.basis.levels() {
            if let Some(k) = basis.index(j, m) {
                out.amplitudes[k] = self.amplitudes[i];
            }
        }
        Ok(out)
    }

    pub(crate) fn check_same_basis(&self, other: &RotorState) -> Result<()> {
        if self.basis != other.basis {
            return Err(RotorError::BasisMismatch { expected: self.basis.j_max, found: other.basis.j_max });
        }
        Ok(())
    }

    pub(crate) fn warn_on_truncation(&self, context: &str) -> f64 {
        let top = self.top_shell_population();
        if top > TRUNCATION_WARN_THRESHOLD {
            log::warn!("{context}: population {top:e} in the top two J shells (j_max={})", self.basis.j_max);
        }
        top
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dimensions() {
        assert_eq!(build_basis(0).dim(), 1);
        assert_eq!(build_basis(2).dim(), 9);
        assert_eq!(build_basis(10).dim(), 121);
    }

    #[test]
    fn ordering_is_j_major_m_ascending() {
        let b = build_basis(2);
        let order: Vec<(u32, i32)> = b.levels().map(|(_, j, m)| (j, m)).collect();
        assert_eq!(order[0], (0, 0));
        assert_eq!(order[1], (1, -1));
        assert_eq!(order[3], (1, 1));
        assert_eq!(order[4], (2, -2));
        assert_eq!(order[8], (2, 2));
    }

    #[test]
    fn out_of_range_levels_have_no_index() {
        let b = build_basis(3);
        assert_eq!(b.index(4, 0), None);
        assert_eq!(b.index(2, 3), None);
        assert_eq!(b.index(2, -3), None);
    }

    #[test]
    fn normalize_and_top_shells() {
        let b = build_basis(3);
        let mut s = RotorState::zeros(b);
        s.set_amplitude(0, 0, Complex64::new(3.0, 0.0)).unwrap();
        s.set_amplitude(3, -2, Complex64::new(0.0, 4.0)).unwrap();
        s.normalize();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((s.top_shell_population() - 16.0 / 25.0).abs() < 1e-12);
        assert!(s.embed(build_basis(2)).is_err());
        let big = s.embed(build_basis(5)).unwrap();
        assert!((big.population(3, -2) - 16.0 / 25.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn index_map_round_trips(j_max in 0u32..30, k in 0usize..10_000) {
            let b = build_basis(j_max);
            let idx = k % b.dim();
            let (j, m) = b.level(idx);
            prop_assert_eq!(b.index(j, m), Some(idx));
        }
    }
}
