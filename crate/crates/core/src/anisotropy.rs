//! Surface-energy densities: φ, its derivatives, the mobility `g`, the dual
//! norm and the Wulff shape.

use std::f64::consts::PI;

use crate::curve::ClosedCurve;
use crate::error::{Error, Result};
use crate::{Mat2, Vec2};

/// Number of directions used for sampled minima (J, m_φ, admissibility).
const SAMPLES: usize = 4096;

/// A smooth, strictly convex, one-homogeneous density on the plane.
#[derive(Debug, Clone, PartialEq)]
pub enum Anisotropy {
    /// φ(x) = |x|.
    Euclidean,
    /// φ(x) = √(x·Mx) for symmetric positive-definite M.
    Elliptic { m: Mat2 },
    /// φ(x) = |x| h(arg x), h(θ) = 1 + Σ ε cos(kθ), terms as (ε, k).
    Fourier { terms: Vec<(f64, u32)> },
}

impl Anisotropy {
    pub fn elliptic(m: Mat2) -> Result<Self> {
        if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-14 * m.norm() {
            return Err(Error::Validation("elliptic matrix must be symmetric".into()));
        }
        if m[(0, 0)] <= 0.0 || m.determinant() <= 0.0 {
            return Err(Error::Validation("elliptic matrix must be positive definite".into()));
        }
        Ok(Anisotropy::Elliptic { m })
    }

    /// Fourier family; rejected unless `min(h + h'') > 1e-6` on 4096 samples.
    pub fn fourier(terms: Vec<(f64, u32)>) -> Result<Self> {
        let a = Anisotropy::Fourier { terms };
        let min_g = (0..SAMPLES)
            .map(|j| {
                let (h, _, h2) = a.h_derivs(2.0 * PI * j as f64 / SAMPLES as f64);
                h + h2
            })
            .fold(f64::INFINITY, f64::min);
        if !(min_g > 1e-6) {
            return Err(Error::Validation(format!(
                "fourier anisotropy is not strictly convex: min(h + h'') = {min_g:.3e}"
            )));
        }
        Ok(a)
    }

    /// h, h', h'' of the Fourier family (h ≡ 1 otherwise).
    fn h_derivs(&self, theta: f64) -> (f64, f64, f64) {
        match self {
            Anisotropy::Fourier { terms } => {
                let (mut h, mut h1, mut h2) = (1.0, 0.0, 0.0);
                for &(eps, k) in terms {
                    let k = k as f64;
                    let (s, c) = (k * theta).sin_cos();
                    h += eps * c;
                    h1 -= eps * k * s;
                    h2 -= eps * k * k * c;
                }
                (h, h1, h2)
            }
            _ => (1.0, 0.0, 0.0),
        }
    }

    /// φ(v) for `v ≠ 0`.
    pub fn eval(&self, v: Vec2) -> Result<f64> {
        nonzero(v)?;
        Ok(self.value(v))
    }

    /// φ(v) without the zero check.
    pub fn value(&self, v: Vec2) -> f64 {
        match self {
            Anisotropy::Euclidean => v.norm(),
            Anisotropy::Elliptic { m } => v.dot(&(m * v)).sqrt(),
            Anisotropy::Fourier { .. } => v.norm() * self.h_derivs(v.y.atan2(v.x)).0,
        }
    }

    /// (∇φ(v), D²φ(v)) for `v ≠ 0`.
    pub fn derivatives(&self, v: Vec2) -> Result<(Vec2, Mat2)> {
        nonzero(v)?;
        Ok((self.gradient(v), self.hessian(v)))
    }

    /// ∇φ(v) without the zero check.
    pub fn gradient(&self, v: Vec2) -> Vec2 {
        match self {
            Anisotropy::Euclidean => v / v.norm(),
            Anisotropy::Elliptic { m } => {
                let mv = m * v;
                mv / v.dot(&mv).sqrt()
            }
            Anisotropy::Fourier { .. } => {
                let r = v.norm();
                let (er, et) = (v / r, Vec2::new(-v.y / r, v.x / r));
                let (h, h1, _) = self.h_derivs(v.y.atan2(v.x));
                er * h + et * h1
            }
        }
    }

    /// D²φ(v) without the zero check.
    pub fn hessian(&self, v: Vec2) -> Mat2 {
        match self {
            Anisotropy::Euclidean => {
                let r = v.norm();
                let u = v / r;
                (Mat2::identity() - u * u.transpose()) / r
            }
            Anisotropy::Elliptic { m } => {
                let mv = m * v;
                let p = v.dot(&mv).sqrt();
                (m - mv * mv.transpose() / (p * p)) / p
            }
            Anisotropy::Fourier { .. } => {
                let r = v.norm();
                let et = Vec2::new(-v.y / r, v.x / r);
                let (h, _, h2) = self.h_derivs(v.y.atan2(v.x));
                et * et.transpose() * ((h + h2) / r)
            }
        }
    }

    /// g(ν) = D²φ(ν)τ·τ for a unit normal ν (|ν| = 1 within 1e-12).
    pub fn mobility_g(&self, nu: Vec2) -> Result<f64> {
        if (nu.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("mobility needs a unit vector, |ν| = {}", nu.norm())));
        }
        Ok(self.mobility(nu))
    }

    /// g(ν) without the unit check.
    pub fn mobility(&self, nu: Vec2) -> f64 {
        match self {
            Anisotropy::Euclidean => 1.0,
            Anisotropy::Fourier { .. } => {
                let (h, _, h2) = self.h_derivs(nu.y.atan2(nu.x));
                h + h2
            }
            Anisotropy::Elliptic { .. } => {
                let tau = Vec2::new(nu.y, -nu.x);
                tau.dot(&(self.hessian(nu) * tau))
            }
        }
    }

    /// dg/dθ for ν = (cos θ, sin θ).
    pub fn mobility_derivative(&self, nu: Vec2) -> f64 {
        let theta = nu.y.atan2(nu.x);
        match self {
            Anisotropy::Euclidean => 0.0,
            Anisotropy::Fourier { terms } => terms
                .iter()
                .map(|&(eps, k)| {
                    let k = k as f64;
                    (k * k * k - k) * eps * (k * theta).sin()
                })
                .sum(),
            Anisotropy::Elliptic { .. } => {
                let g = |t: f64| self.mobility(Vec2::new(t.cos(), t.sin()));
                let d = 1e-3;
                (8.0 * (g(theta + d) - g(theta - d)) - (g(theta + 2.0 * d) - g(theta - 2.0 * d))) / (12.0 * d)
            }
        }
    }

    /// φ⁰(ξ) = sup_{|η|=1} ξ·η/φ(η) by a 1024-point scan refined by 20
    /// golden-section steps.
    pub fn dual_norm(&self, xi: Vec2) -> f64 {
        if xi.norm() == 0.0 {
            return 0.0;
        }
        let obj = |t: f64| {
            let eta = Vec2::new(t.cos(), t.sin());
            xi.dot(&eta) / self.value(eta)
        };
        const SCAN: usize = 1024;
        let dt = 2.0 * PI / SCAN as f64;
        let (jbest, _) = (0..SCAN)
            .map(|j| (j, obj(j as f64 * dt)))
            .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        let (mut a, mut b) = ((jbest as f64 - 1.0) * dt, (jbest as f64 + 1.0) * dt);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
        let (mut fc, mut fd) = (obj(c), obj(d));
        for _ in 0..20 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = obj(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = obj(d);
            }
        }
        fc.max(fd).max(obj(jbest as f64 * dt))
    }

    fn sampled<F: Fn(Vec2) -> f64>(&self, f: F) -> impl Iterator<Item = f64> {
        (0..SAMPLES).map(move |j| {
            let t = 2.0 * PI * j as f64 / SAMPLES as f64;
            f(Vec2::new(t.cos(), t.sin()))
        })
    }

    /// J: minimum of g over 4096 sampled unit normals.
    pub fn convexity_constant(&self) -> f64 {
        self.sampled(|nu| self.mobility(nu)).fold(f64::INFINITY, f64::min)
    }

    /// m_φ = min of φ on the unit circle (sampled).
    pub fn min_on_sphere(&self) -> f64 {
        self.sampled(|nu| self.value(nu)).fold(f64::INFINITY, f64::min)
    }

    /// M_φ = max of φ on the unit circle (sampled).
    pub fn max_on_sphere(&self) -> f64 {
        self.sampled(|nu| self.value(nu)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Boundary of the Wulff shape {φ⁰ ≤ 1}, traced as θ ↦ ∇φ(ν(θ)) and
    /// resampled to `n` uniform-arclength nodes.
    pub fn wulff_boundary(&self, n: usize) -> Result<ClosedCurve> {
        if n < 16 {
            return Err(Error::Domain(format!("wulff boundary needs n ≥ 16, got {n}")));
        }
        if !(self.convexity_constant() > 1e-6) {
            return Err(Error::Validation("anisotropy is not strictly convex".into()));
        }
        let m = (4 * n).max(1024);
        let pts: Vec<Vec2> = (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                self.gradient(Vec2::new(t.cos(), t.sin()))
            })
            .collect();
        ClosedCurve::from_points(&pts, n)
    }
}

fn nonzero(v: Vec2) -> Result<()> {
    if v.norm() > 0.0 && v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain("anisotropy evaluated at the zero vector".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds() -> Vec<Anisotropy> {
        vec![
            Anisotropy::Euclidean,
            Anisotropy::elliptic(Mat2::new(4.0, 0.0, 0.0, 1.0)).unwrap(),
            Anisotropy::elliptic(Mat2::new(2.0, 0.5, 0.5, 1.0)).unwrap(),
            Anisotropy::fourier(vec![(0.05, 4)]).unwrap(),
            Anisotropy::fourier(vec![(0.03, 3), (0.01, 6)]).unwrap(),
        ]
    }

    #[test]
    fn spec_examples() {
        let e = Anisotropy::elliptic(Mat2::new(4.0, 0.0, 0.0, 1.0)).unwrap();
        let f = Anisotropy::fourier(vec![(0.05, 4)]).unwrap();
        let x = Vec2::new(1.0, 0.0);
        assert_eq!(Anisotropy::Euclidean.eval(Vec2::new(0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(e.eval(x).unwrap(), 2.0);
        assert!((f.eval(x).unwrap() - 1.05).abs() < 1e-15);
        let (g, h) = Anisotropy::Euclidean.derivatives(x).unwrap();
        assert_eq!(g, x);
        assert!((h - Mat2::new(0.0, 0.0, 0.0, 1.0)).norm() < 1e-15);
        // ∇√(4x²+y²) at (1,0) = (4x, y)/φ = (2, 0)
        assert!((e.gradient(x) - Vec2::new(2.0, 0.0)).norm() < 1e-15);
        // ∂²_yy √(4x²+y²) at (1,0) = 4x²/φ³ = 1/2
        assert!((e.mobility_g(x).unwrap() - 0.5).abs() < 1e-15);
        // h + h'' at 0: 1.05 − 16·0.05
        assert!((f.mobility_g(x).unwrap() - 0.25).abs() < 1e-14);
        assert!((Anisotropy::Euclidean.dual_norm(Vec2::new(3.0, 4.0)) - 5.0).abs() < 1e-12);
        assert!((e.dual_norm(x) - 0.5).abs() < 1e-10);
        assert!(e.eval(Vec2::zeros()).is_err());
        assert!(e.mobility_g(Vec2::new(1.0, 1.0)).is_err());
        assert!(Anisotropy::fourier(vec![(0.1, 4)]).is_err());
    }

    #[test]
    fn homogeneity_euler_and_finite_differences() {
        for a in kinds() {
            for j in 0..97 {
                let t = 0.37 + j as f64 * 0.0647;
                let nu = Vec2::new(t.cos(), t.sin());
                for lam in [0.1, 0.7, 3.0, 10.0] {
                    assert!((a.value(nu * lam) - lam * a.value(nu)).abs() < 1e-12 * lam);
                }
                let (g, h) = a.derivatives(nu).unwrap();
                assert!((g.dot(&nu) - a.value(nu)).abs() < 1e-10);
                assert!((h * nu).norm() < 1e-10);
                let s = 1e-5;
                for i in 0..2 {
                    let mut e = Vec2::zeros();
                    e[i] = s;
                    let fd = (a.value(nu + e) - a.value(nu - e)) / (2.0 * s);
                    assert!((fd - g[i]).abs() < 1e-6 * g.norm());
                    let fdh = (a.gradient(nu + e) - a.gradient(nu - e)) / (2.0 * s);
                    assert!((fdh - h.column(i)).norm() < 1e-6 * h.norm().max(1e-3));
                }
                assert!((a.dual_norm(g) - 1.0).abs() < 1e-8);
            }
            assert!(a.convexity_constant() > 0.0);
        }
    }

    #[test]
    fn wulff_euclidean_is_unit_circle() {
        let c = Anisotropy::Euclidean.wulff_boundary(64).unwrap();
        for p in c.nodes() {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }
}
