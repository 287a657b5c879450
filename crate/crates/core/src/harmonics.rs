//! Spherical harmonics (Condon–Shortley phase), Gauss–Legendre nodes, the
//! product angular grid, and the quadrature oracle used to cross-check every
//! closed-form matrix element in the crate.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, RotorError};

/// Default polar resolution of [`AngularGrid`] (Gauss–Legendre nodes in cos θ).
pub const DEFAULT_THETA_NODES: usize = 64;
/// Default azimuthal resolution of [`AngularGrid`] (uniform nodes in φ).
pub const DEFAULT_PHI_NODES: usize = 128;

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Unnormalized Legendre polynomials P_0(x) ..= P_lmax(x).
pub fn legendre_polynomials(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(lmax + 1);
    p.push(1.0);
    if lmax >= 1 {
        p.push(x);
    }
    for l in 2..=lmax {
        let lf = l as f64;
        let next = ((2.0 * lf - 1.0) * x * p[l - 1] - (lf - 1.0) * p[l - 2]) / lf;
        p.push(next);
    }
    p
}

/// Index of (l, m ≥ 0) in a triangular table.
#[inline]
pub fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Orthonormalized associated Legendre functions with Condon–Shortley phase,
/// `Y_lm(θ, φ) = Pbar_lm(cos θ) e^{imφ}` for m ≥ 0. Stored by [`tri_index`].
pub fn normalized_legendre_table(lmax: usize, x: f64) -> Vec<f64> {
    let mut table = vec![0.0; tri_index(lmax, lmax) + 1];
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = (0.25 / PI).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            let mf = m as f64;
            pmm *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
        }
        table[tri_index(m, m)] = pmm;
        if m == lmax {
            break;
        }
        let mf = m as f64;
        let mut p_prev = pmm;
        let mut p = x * (2.0 * mf + 3.0).sqrt() * pmm;
        table[tri_index(m + 1, m)] = p;
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let next = a * (x * p - b * p_prev);
            p_prev = p;
            p = next;
            table[tri_index(l, m)] = p;
        }
    }
    table
}

/// Y_lm from a precomputed [`normalized_legendre_table`] entry and e^{iφ}.
#[inline]
pub fn harmonic_from_table(table: &[f64], l: usize, m: i64, phase: Complex64) -> Complex64 {
    let am = m.unsigned_abs() as usize;
    let p = table[tri_index(l, am)];
    if m >= 0 {
        phase.powi(am as i32) * p
    } else {
        let sign = if am % 2 == 0 { 1.0 } else { -1.0 };
        phase.conj().powi(am as i32) * (p * sign)
    }
}

/// Orthonormal spherical harmonic Y_JM(θ, φ), Condon–Shortley phase.
pub fn sph_harm(j: u32, m: i32, theta: f64, phi: f64) -> Result<Complex64> {
    if m.unsigned_abs() > j {
        return Err(RotorError::InvalidQuantumNumbers { j: j as i64, m: m as i64 });
    }
    if !(theta.is_finite() && (-1e-12..=PI + 1e-12).contains(&theta)) {
        return Err(RotorError::InvalidPolarAngle(theta));
    }
    let table = normalized_legendre_table(j as usize, theta.cos());
    Ok(harmonic_from_table(&table, j as usize, m as i64, Complex64::from_polar(1.0, phi)))
}

/// Product grid: Gauss–Legendre nodes in cos θ times uniform nodes in φ.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularGrid {
    cos_theta: Vec<f64>,
    theta: Vec<f64>,
    theta_weights: Vec<f64>,
    phi: Vec<f64>,
}

impl AngularGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        assert!(n_theta > 0 && n_phi > 0, "grid needs nodes in both directions");
        let (mut x, mut w) = gauss_legendre(n_theta);
        // θ ascending means cos θ descending
        x.reverse();
        w.reverse();
        let theta = x.iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect();
        let phi = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
        Self { cos_theta: x, theta, theta_weights: w, phi }
    }

    /// A grid that integrates products of harmonics up to total degree `degree` exactly.
    pub fn exact_for_degree(degree: usize) -> Self {
        Self::new(degree / 2 + 1, degree + 1)
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_theta(), self.n_phi())
    }

    pub fn len(&self) -> usize {
        self.n_theta() * self.n_phi()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn theta_weights(&self) -> &[f64] {
        &self.theta_weights
    }

    pub fn phi_weight(&self) -> f64 {
        2.0 * PI / self.n_phi() as f64
    }

    /// Solid-angle weight of node (i, k); weights sum to 4π.
    pub fn weight(&self, i: usize, k: usize) -> f64 {
        let _ = k;
        self.theta_weights[i] * self.phi_weight()
    }

    /// Row-major flat index, θ outer.
    pub fn flat(&self, i: usize, k: usize) -> usize {
        i * self.n_phi() + k
    }

    pub fn direction(&self, i: usize, k: usize) -> [f64; 3] {
        let st = (1.0 - self.cos_theta[i] * self.cos_theta[i]).max(0.0).sqrt();
        [st * self.phi[k].cos(), st * self.phi[k].sin(), self.cos_theta[i]]
    }

    /// Quadrature of a function of (θ, φ) over the sphere.
    pub fn integrate<F: FnMut(f64, f64) -> Complex64>(&self, mut f: F) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..self.n_theta() {
            let mut row = Complex64::new(0.0, 0.0);
            for &p in &self.phi {
                row += f(self.theta[i], p);
            }
            total += row * self.theta_weights[i];
        }
        total * self.phi_weight()
    }
}

impl Default for AngularGrid {
    fn default() -> Self {
        Self::new(DEFAULT_THETA_NODES, DEFAULT_PHI_NODES)
    }
}

/// `∫ Y*_{J'M'} kernel Y_{JM} dΩ` by direct quadrature on the default grid.
///
/// This path evaluates harmonics point by point and shares nothing with the
/// ladder-operator construction of the matrices it is used to check.
pub fn quadrature_oracle<K>(jp: u32, mp: i32, j: u32, m: i32, kernel: K) -> Result<Complex64>
where
    K: Fn(f64, f64) -> Complex64,
{
    for (jj, mm) in [(jp, mp), (j, m)] {
        if mm.unsigned_abs() > jj {
            return Err(RotorError::InvalidQuantumNumbers { j: jj as i64, m: mm as i64 });
        }
    }
    let grid = AngularGrid::default();
    Ok(grid.integrate(|theta, phi| {
        let bra = sph_harm(jp, mp, theta, phi).expect("validated quantum numbers");
        let ket = sph_harm(j, m, theta, phi).expect("validated quantum numbers");
        bra.conj() * kernel(theta, phi) * ket
    }))
}
