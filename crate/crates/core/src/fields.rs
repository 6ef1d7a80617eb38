//! Smooth planar vector fields used to deform curves in derivative checks.

use std::fmt;
use std::sync::Arc;

use crate::Vec2;

type FieldFn = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;

/// A smooth vector field X on the plane.
#[derive(Clone)]
pub struct VectorField {
    f: FieldFn,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("VectorField")
    }
}

impl VectorField {
    pub fn new<F: Fn(Vec2) -> Vec2 + Send + Sync + 'static>(f: F) -> Self {
        VectorField { f: Arc::new(f) }
    }

    pub fn zero() -> Self {
        Self::new(|_| Vec2::zeros())
    }

    pub fn translation(v: Vec2) -> Self {
        Self::new(move |_| v)
    }

    /// (x − c)·χ(|x − c|), with χ a smooth cutoff equal to 1 for r ≤ r0 and
    /// 0 for r ≥ r1.
    pub fn radial(center: Vec2, r0: f64, r1: f64) -> Self {
        Self::new(move |p| (p - center) * cutoff((p - center).norm(), r0, r1))
    }

    /// Constant field `v` multiplied by the same cutoff around `center`.
    pub fn localized_translation(v: Vec2, center: Vec2, r0: f64, r1: f64) -> Self {
        Self::new(move |p| v * cutoff((p - center).norm(), r0, r1))
    }

    pub fn at(&self, p: Vec2) -> Vec2 {
        (self.f)(p)
    }

    /// Moves points along the flow of X for time `t` with `steps` RK4 steps.
    pub fn flow(&self, pts: &[Vec2], t: f64, steps: usize) -> Vec<Vec2> {
        let dt = t / steps as f64;
        pts.iter()
            .map(|&p0| {
                let mut p = p0;
                for _ in 0..steps {
                    let k1 = self.at(p);
                    let k2 = self.at(p + k1 * (dt / 2.0));
                    let k3 = self.at(p + k2 * (dt / 2.0));
                    let k4 = self.at(p + k3 * dt);
                    p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
                }
                p
            })
            .collect()
    }
}

/// Smooth cutoff: 1 on [0, r0], 0 on [r1, ∞), C^∞ in between.
pub fn cutoff(r: f64, r0: f64, r1: f64) -> f64 {
    if r <= r0 {
        return 1.0;
    }
    if r >= r1 {
        return 0.0;
    }
    let s = (r - r0) / (r1 - r0);
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    f(1.0 - s) / (f(1.0 - s) + f(s))
}

/// A divergence-free field X = (∂_yH, −∂_xH) given by a polynomial stream
/// function H(x, y) = Σ c x^i y^j.
#[derive(Debug, Clone)]
pub struct DivergenceFreeField {
    terms: Vec<(u32, u32, f64)>,
}

impl DivergenceFreeField {
    pub fn from_stream(terms: Vec<(u32, u32, f64)>) -> Self {
        DivergenceFreeField { terms }
    }

    pub fn zero() -> Self {
        Self::from_stream(Vec::new())
    }

    /// Rigid rotation (−y, x), from H = −(x² + y²)/2.
    pub fn rotation() -> Self {
        Self::from_stream(vec![(2, 0, -0.5), (0, 2, -0.5)])
    }

    pub fn velocity(&self, p: Vec2) -> Vec2 {
        let (mut hx, mut hy) = (0.0, 0.0);
        for &(i, j, c) in &self.terms {
            if i > 0 {
                hx += c * i as f64 * p.x.powi(i as i32 - 1) * p.y.powi(j as i32);
            }
            if j > 0 {
                hy += c * j as f64 * p.x.powi(i as i32) * p.y.powi(j as i32 - 1);
            }
        }
        Vec2::new(hy, -hx)
    }

    pub fn to_field(&self) -> VectorField {
        let s = self.clone();
        VectorField::new(move |p| s.velocity(p))
    }
}
