//! Periodic spectral calculus on uniformly sampled data.
//!
//! Conventions: samples `f_j = f(t_j)` with `t_j = j·P/n`. Odd-order
//! derivatives zero the Nyquist mode; even orders keep it (it is a cosine
//! on the grid).

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<usize, Plans>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plans(n: usize) -> Plans {
    PLANS.with(|p| {
        let mut p = p.borrow_mut();
        let (planner, cache) = &mut *p;
        cache
            .entry(n)
            .or_insert_with(|| (planner.plan_fft_forward(n), planner.plan_fft_inverse(n)))
            .clone()
    })
}

/// Unnormalized forward DFT of real samples.
pub fn fft(f: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    if !buf.is_empty() {
        plans(buf.len()).0.process(&mut buf);
    }
    buf
}

/// Inverse DFT (normalized by 1/n), keeping the real part.
pub fn ifft_real(mut c: Vec<Complex64>) -> Vec<f64> {
    let n = c.len();
    if n == 0 {
        return Vec::new();
    }
    plans(n).1.process(&mut c);
    let s = 1.0 / n as f64;
    c.into_iter().map(|z| z.re * s).collect()
}

/// Signed integer wavenumber of DFT index `j` (Nyquist reported as +n/2).
#[inline]
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

#[inline]
fn is_nyquist(j: usize, n: usize) -> bool {
    n % 2 == 0 && j == n / 2
}

/// Applies a Fourier multiplier `m(k̃)`, with `k̃ = 2πk/P`, to real samples.
/// `nyquist` selects the treatment of the Nyquist mode: `None` zeroes it,
/// `Some(v)` multiplies it by the real factor `v`.
pub fn apply_multiplier<M>(f: &[f64], period: f64, symbol: M, nyquist: Option<f64>) -> Vec<f64>
where
    M: Fn(f64) -> Complex64,
{
    let n = f.len();
    let mut c = fft(f);
    let w = 2.0 * PI / period;
    for (j, z) in c.iter_mut().enumerate() {
        if is_nyquist(j, n) {
            *z *= nyquist.unwrap_or(0.0);
        } else {
            *z *= symbol(wavenumber(j, n) as f64 * w);
        }
    }
    ifft_real(c)
}

/// `order`-th derivative of periodic samples over a period `period`.
pub fn derivative(f: &[f64], period: f64, order: u32) -> Vec<f64> {
    if order == 0 {
        return f.to_vec();
    }
    let n = f.len();
    let nyq = if order % 2 == 1 {
        None
    } else {
        let k = (n / 2) as f64 * 2.0 * PI / period;
        let sign = if (order / 2) % 2 == 1 { -1.0 } else { 1.0 };
        Some(sign * k.powi(order as i32))
    };
    let i = Complex64::new(0.0, 1.0);
    apply_multiplier(f, period, |k| (i * k).powu(order), nyq)
}

/// Band-limited interpolation onto twice as many uniform samples. The
/// Nyquist mode of even-length input is split evenly between ±n/2, so
/// grid-scale oscillations stay visible to derivatives on the fine grid.
pub fn upsample2(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let c = fft(f);
    let mut z = vec![Complex64::new(0.0, 0.0); 2 * n];
    for (j, v) in c.into_iter().enumerate() {
        let k = wavenumber(j, n).rem_euclid(2 * n as i64) as usize;
        if is_nyquist(j, n) {
            z[n / 2] = v;
            z[2 * n - n / 2] = v;
        } else {
            z[k] = v * 2.0;
        }
    }
    ifft_real(z)
}

/// Transpose of [`upsample2`].
pub fn upsample2_adjoint(g: &[f64]) -> Vec<f64> {
    let n = g.len() / 2;
    let y = fft(g);
    let c = (0..n)
        .map(|j| {
            let k = wavenumber(j, n).rem_euclid(2 * n as i64) as usize;
            if is_nyquist(j, n) {
                Complex64::new(y[k].re, 0.0)
            } else {
                y[k]
            }
        })
        .collect();
    ifft_real(c)
}

/// Mean of periodic samples (trapezoid rule).
pub fn mean(f: &[f64]) -> f64 {
    f.iter().sum::<f64>() / f.len() as f64
}

/// Real trigonometric series `f(t) = Re Σ_{k=0}^{K} a_k e^{ikt}` on `[0, 2π)`,
/// i.e. the band-limited interpolant of uniformly spaced samples.
#[derive(Debug, Clone)]
pub struct TrigSeries {
    coeffs: Vec<Complex64>,
}

impl TrigSeries {
    /// Interpolant of samples at `t_j = 2πj/n`.
    pub fn interpolate(f: &[f64]) -> Self {
        let n = f.len();
        let c = fft(f);
        let nf = n as f64;
        let kmax = n / 2;
        let mut coeffs = Vec::with_capacity(kmax + 1);
        for (k, ck) in c.iter().enumerate().take(kmax + 1) {
            let a = if k == 0 || is_nyquist(k, n) { *ck / nf } else { *ck * (2.0 / nf) };
            coeffs.push(a);
        }
        let mut s = TrigSeries { coeffs };
        s.trim(0.0);
        s
    }

    /// Drops trailing modes whose magnitude is below `rel · max |a_k|`.
    pub fn trim(&mut self, rel: f64) {
        let amax = self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let cut = rel * amax;
        while self.coeffs.len() > 1 && self.coeffs.last().map_or(false, |z| z.norm() <= cut) {
            self.coeffs.pop();
        }
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Exact derivative of the series.
    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| *a * Complex64::new(0.0, k as f64))
            .collect();
        TrigSeries { coeffs }
    }

    /// Values and first two derivatives at `t`.
    pub fn eval2(&self, t: f64) -> (f64, f64, f64) {
        let e = Complex64::from_polar(1.0, t);
        let mut p = Complex64::new(1.0, 0.0);
        let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for (k, a) in self.coeffs.iter().enumerate() {
            let z = *a * p;
            let kf = k as f64;
            f += z.re;
            d1 -= kf * z.im;
            d2 -= kf * kf * z.re;
            p *= e;
        }
        (f, d1, d2)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let e = Complex64::from_polar(1.0, t);
        let mut p = Complex64::new(1.0, 0.0);
        let mut f = 0.0;
        for a in &self.coeffs {
            f += (*a * p).re;
            p *= e;
        }
        f
    }

    /// `∫_0^t f(s) ds`.
    pub fn integral(&self, t: f64) -> f64 {
        let e = Complex64::from_polar(1.0, t);
        let mut p = e;
        let mut s = self.coeffs[0].re * t;
        for (k, a) in self.coeffs.iter().enumerate().skip(1) {
            // Re[a (e^{ikt} − 1)/(ik)]
            let z = *a * (p - 1.0) / Complex64::new(0.0, k as f64);
            s += z.re;
            p *= e;
        }
        s
    }

    /// Samples the series on `m` uniform points (`m` > twice the mode count).
    pub fn sample(&self, m: usize) -> Vec<f64> {
        assert!(m >= 2 * self.coeffs.len(), "sampling grid too coarse");
        let mf = m as f64;
        let mut c = vec![Complex64::new(0.0, 0.0); m];
        c[0] = Complex64::new(self.coeffs[0].re * mf, 0.0);
        for (k, a) in self.coeffs.iter().enumerate().skip(1) {
            c[k] += *a * (mf / 2.0);
            c[m - k] += a.conj() * (mf / 2.0);
        }
        ifft_real(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upsampling_is_interpolation_and_adjoint_is_transpose() {
        let n = 16;
        let f: Vec<f64> = (0..n).map(|j| (j as f64 * 0.7).sin() + if j % 2 == 0 { 0.3 } else { -0.3 }).collect();
        let z = upsample2(&f);
        for j in 0..n {
            assert!((z[2 * j] - f[j]).abs() < 1e-14);
        }
        let g: Vec<f64> = (0..2 * n).map(|j| (j as f64 * 1.3).cos() + 0.1 * j as f64).collect();
        let lhs: f64 = z.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = f.iter().zip(upsample2_adjoint(&g)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    fn grid(n: usize, p: f64) -> Vec<f64> {
        (0..n).map(|j| j as f64 * p / n as f64).collect()
    }

    #[test]
    fn derivative_of_band_limited_field() {
        let p = 3.7;
        let t = grid(64, p);
        let w = 2.0 * PI / p;
        let f: Vec<f64> = t.iter().map(|&s| (3.0 * w * s).sin() + 0.5 * (w * s).cos()).collect();
        let d1 = derivative(&f, p, 1);
        let d4 = derivative(&f, p, 4);
        for (j, &s) in t.iter().enumerate() {
            let e1 = 3.0 * w * (3.0 * w * s).cos() - 0.5 * w * (w * s).sin();
            let e4 = 81.0 * w.powi(4) * (3.0 * w * s).sin() + 0.5 * w.powi(4) * (w * s).cos();
            assert!((d1[j] - e1).abs() < 1e-12);
            assert!((d4[j] - e4).abs() < 1e-9 * e4.abs().max(1.0));
        }
    }

    #[test]
    fn series_matches_samples_and_integrates() {
        let n = 32;
        let f: Vec<f64> = grid(n, 2.0 * PI).iter().map(|&t| (t.cos() + 2.0).ln()).collect();
        let s = TrigSeries::interpolate(&f);
        for (j, &fj) in f.iter().enumerate() {
            assert!((s.eval(2.0 * PI * j as f64 / n as f64) - fj).abs() < 1e-13);
        }
        // ∫_0^{2π} f = 2π·mean
        assert!((s.integral(2.0 * PI) - 2.0 * PI * mean(&f)).abs() < 1e-12);
        let (_, d1, d2) = s.eval2(0.3);
        let ds = s.derivative();
        assert!((ds.eval(0.3) - d1).abs() < 1e-12);
        assert!((ds.derivative().eval(0.3) - d2).abs() < 1e-11);
        let up = s.sample(128);
        assert!((up[4] - f[1]).abs() < 1e-13);
    }
}
