//! Single-frequency sinusoid fits: periodogram start, Levenberg–Marquardt polish.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Result, RotorError};

/// Least points accepted by [`fit_sinusoid`].
pub const MIN_POINTS: usize = 8;
/// Periodogram frequency step is `1/(OVERSAMPLING · span)`.
pub const OVERSAMPLING: f64 = 8.0;
/// Fraction of variance the best single frequency must explain.
pub const MIN_EXPLAINED: f64 = 0.5;

/// `y(t) = a cos(2πf(t − t̄)) + b sin(2πf(t − t̄)) + c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinusoidFit {
    pub frequency: f64,
    pub sigma_frequency: f64,
    pub cos_amplitude: f64,
    pub sin_amplitude: f64,
    pub offset: f64,
    /// Mean of the sample times; phases refer to it.
    pub time_origin: f64,
    /// L2 norm of the unweighted residuals.
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    /// Fraction of (weighted) variance explained by the periodogram peak.
    pub explained: f64,
}

impl SinusoidFit {
    pub fn amplitude(&self) -> f64 {
        self.cos_amplitude.hypot(self.sin_amplitude)
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let x = 2.0 * PI * self.frequency * (t - self.time_origin);
        self.cos_amplitude * x.cos() + self.sin_amplitude * x.sin() + self.offset
    }
}

/// Fits one sinusoid plus offset. `weights` are inverse variances; without
/// them the frequency uncertainty is scaled by the reduced χ².
pub fn fit_sinusoid(t: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<SinusoidFit> {
    let n = t.len();
    if n != y.len() || weights.is_some_and(|w| w.len() != n) {
        return Err(RotorError::DimensionMismatch { expected: n, found: y.len() });
    }
    if n < MIN_POINTS {
        return Err(RotorError::EstimationFailed(format!("need at least {MIN_POINTS} samples, got {n}")));
    }
    let ones = vec![1.0; n];
    let w = weights.unwrap_or(&ones);
    if w.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(RotorError::InvalidParameter("weights must be positive and finite".into()));
    }
    let t0 = t.iter().sum::<f64>() / n as f64;
    let tc: Vec<f64> = t.iter().map(|&x| x - t0).collect();
    let span = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - t.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(RotorError::EstimationFailed("sample times do not span an interval".into()));
    }
    let wsum: f64 = w.iter().sum();
    let mean = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / wsum;
    let sst: f64 = w.iter().zip(y).map(|(w, y)| w * (y - mean).powi(2)).sum();
    if sst <= 1e-24 * wsum * mean.abs().max(1.0).powi(2) {
        return Err(RotorError::EstimationFailed(format!("series is constant (value {mean:.6e}); no oscillation to fit")));
    }

    // periodogram: weighted linear fit at each trial frequency
    let f_lo = 0.5 / span;
    let f_hi = n as f64 / (2.0 * span);
    let df = 1.0 / (OVERSAMPLING * span);
    let mut best = (f_lo, f64::INFINITY, Vector3::zeros());
    let mut f = f_lo;
    while f <= f_hi + 0.5 * df {
        if let Some((ssr, coef)) = linear_fit(&tc, y, w, f) {
            if ssr < best.1 {
                best = (f, ssr, coef);
            }
        }
        f += df;
    }
    let explained = 1.0 - best.1 / sst;
    if !(explained >= MIN_EXPLAINED) {
        return Err(RotorError::EstimationFailed(format!(
            "no spectral peak above the noise floor: best trial frequency {:.6e} Hz explains {:.1}% of the variance (need {:.0}%)",
            best.0,
            100.0 * explained.max(0.0),
            100.0 * MIN_EXPLAINED
        )));
    }

    let mut p = Vector4::new(best.0, best.2[0], best.2[1], best.2[2]);
    let mut chi2 = chi_square(&tc, y, w, &p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let (jtj, jtr) = normal_equations(&tc, y, w, &p);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for d in 0..4 {
                a[(d, d)] += lambda * jtj[(d, d)].max(f64::MIN_POSITIVE);
            }
            let Some(step) = a.lu().solve(&jtr) else { break };
            let trial = p + step;
            let c = chi_square(&tc, y, w, &trial);
            if c < chi2 {
                let rel = (chi2 - c) / chi2.max(f64::MIN_POSITIVE);
                p = trial;
                chi2 = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }

    let dof = (n - 4) as f64;
    let (jtj, _) = normal_equations(&tc, y, w, &p);
    let reduced = chi2 / dof;
    let var_f = jtj.try_inverse().map(|c| c[(0, 0)]).unwrap_or(f64::INFINITY);
    let scale = if weights.is_some() { 1.0 } else { reduced };
    let residual_norm = tc.iter().zip(y).map(|(&x, &yv)| (yv - model(&p, x)).powi(2)).sum::<f64>().sqrt();
    Ok(SinusoidFit {
        frequency: p[0].abs(),
        sigma_frequency: (var_f * scale).max(0.0).sqrt(),
        cos_amplitude: p[1],
        sin_amplitude: if p[0] < 0.0 { -p[2] } else { p[2] },
        offset: p[3],
        time_origin: t0,
        residual_norm,
        reduced_chi2: reduced,
        explained,
    })
}

fn model(p: &Vector4<f64>, t: f64) -> f64 {
    let x = 2.0 * PI * p[0] * t;
    p[1] * x.cos() + p[2] * x.sin() + p[3]
}

fn chi_square(t: &[f64], y: &[f64], w: &[f64], p: &Vector4<f64>) -> f64 {
    t.iter().zip(y).zip(w).map(|((&t, &y), &w)| w * (y - model(p, t)).powi(2)).sum()
}

fn normal_equations(t: &[f64], y: &[f64], w: &[f64], p: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for ((&t, &y), &w) in t.iter().zip(y).zip(w) {
        let x = 2.0 * PI * p[0] * t;
        let (s, c) = x.sin_cos();
        let j = Vector4::new(2.0 * PI * t * (-p[1] * s + p[2] * c), c, s, 1.0);
        let r = y - model(p, t);
        jtj += w * j * j.transpose();
        jtr += w * r * j;
    }
    (jtj, jtr)
}

fn linear_fit(t: &[f64], y: &[f64], w: &[f64], f: f64) -> Option<(f64, Vector3<f64>)> {
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for ((&t, &y), &w) in t.iter().zip(y).zip(w) {
        let (s, c) = (2.0 * PI * f * t).sin_cos();
        let row = Vector3::new(c, s, 1.0);
        a += w * row * row.transpose();
        b += w * y * row;
    }
    let coef = a.lu().solve(&b)?;
    let ssr = t
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&t, &y), &w)| {
            let (s, c) = (2.0 * PI * f * t).sin_cos();
            w * (y - coef[0] * c - coef[1] * s - coef[2]).powi(2)
        })
        .sum();
    Some((ssr, coef))
}
