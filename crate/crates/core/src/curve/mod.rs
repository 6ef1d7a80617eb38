//! Closed planar curves sampled uniformly in arclength, with spectral
//! calculus, tubular-neighbourhood geometry and normal graphs.

mod graph;
mod sweep;

pub use graph::{
    extract_graph, CurvatureExpansion, GraphFrame, HeightField, Lifted,
};

use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::sync::OnceLock;

use crate::anisotropy::Anisotropy;
use crate::error::{Error, Result};
use crate::spectral::{self, TrigSeries};
use crate::Vec2;

/// Minimum node count of a curve.
pub const MIN_NODES: usize = 16;

/// Frame and curvature of a closed curve given by samples at uniform values
/// of an arbitrary parameter `t ∈ [0, 2π)`.
#[derive(Debug, Clone)]
pub(crate) struct ParamGeometry {
    /// |X'(t)|.
    #[allow(dead_code)]
    pub speed: Vec<f64>,
    /// Outer unit normal (y', −x')/|X'|.
    pub normals: Vec<Vec2>,
    pub curvature: Vec<f64>,
    pub length: f64,
    pub area: f64,
}

impl ParamGeometry {
    pub fn new(points: &[Vec2]) -> Self {
        let n = points.len();
        let x: Vec<f64> = points.iter().map(|p| p.x).collect();
        let y: Vec<f64> = points.iter().map(|p| p.y).collect();
        let p = 2.0 * PI;
        let (x1, y1) = (spectral::derivative(&x, p, 1), spectral::derivative(&y, p, 1));
        let (x2, y2) = (spectral::derivative(&x, p, 2), spectral::derivative(&y, p, 2));
        let dt = p / n as f64;
        let mut speed = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        let mut curvature = Vec::with_capacity(n);
        let (mut length, mut area) = (0.0, 0.0);
        for i in 0..n {
            let s = x1[i].hypot(y1[i]);
            speed.push(s);
            normals.push(Vec2::new(y1[i] / s, -x1[i] / s));
            curvature.push((x1[i] * y2[i] - y1[i] * x2[i]) / (s * s * s));
            length += s * dt;
            area += 0.5 * (x[i] * y1[i] - y[i] * x1[i]) * dt;
        }
        ParamGeometry { speed, normals, curvature, length, area }
    }
}

/// Result of fitting a periodic interpolant through points and resampling it.
pub(crate) struct Resampled {
    pub nodes: Vec<Vec2>,
    /// Arclength position of every input point along the fitted curve.
    pub input_arclength: Vec<f64>,
}

/// Fits the trigonometric interpolant through `points` (uniform index
/// parameter) and returns `n` nodes equally spaced in its arclength, the
/// first node at the first input point.
pub(crate) fn resample(points: &[Vec2], n: usize) -> Resampled {
    let m = points.len();
    let x: Vec<f64> = points.iter().map(|p| p.x).collect();
    let y: Vec<f64> = points.iter().map(|p| p.y).collect();
    let (mut sx, mut sy) = (TrigSeries::interpolate(&x), TrigSeries::interpolate(&y));
    sx.trim(1e-17);
    sy.trim(1e-17);
    let (dx, dy) = (sx.derivative(), sy.derivative());
    let big = (4 * sx.modes().max(sy.modes())).next_power_of_two().max(64);
    let (vx, vy) = (dx.sample(big), dy.sample(big));
    let speed: Vec<f64> = vx.iter().zip(&vy).map(|(a, b)| a.hypot(*b)).collect();
    let mut sigma = TrigSeries::interpolate(&speed);
    sigma.trim(1e-17);
    let length = 2.0 * PI * sigma.mean();
    let arclength = |t: f64| sigma.integral(t);
    let mut nodes = Vec::with_capacity(n);
    let mut t = 0.0;
    for j in 0..n {
        let target = j as f64 * length / n as f64;
        if j > 0 {
            t += 2.0 * PI / n as f64;
        }
        for _ in 0..60 {
            let r = arclength(t) - target;
            t -= r / sigma.eval(t);
            if r.abs() < 1e-15 * length {
                break;
            }
        }
        nodes.push(Vec2::new(sx.eval(t), sy.eval(t)));
    }
    let input_arclength = (0..m).map(|i| arclength(2.0 * PI * i as f64 / m as f64)).collect();
    Resampled { nodes, input_arclength }
}

/// Polygon shoelace area.
pub(crate) fn shoelace(points: &[Vec2]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (a, b) = (points[i], points[(i + 1) % n]);
            a.x * b.y - a.y * b.x
        })
        .sum::<f64>()
        * 0.5
}

/// A closed, simple, positively oriented curve with `n ≥ 16` nodes at
/// uniform arclength and cached frame and curvature fields.
#[derive(Debug, Clone)]
pub struct ClosedCurve {
    nodes: Vec<Vec2>,
    normals: Vec<Vec2>,
    tangents: Vec<Vec2>,
    curvature: Vec<f64>,
    length: f64,
    area: f64,
    series: OnceLock<(TrigSeries, TrigSeries)>,
    sigma: OnceLock<f64>,
}

impl ClosedCurve {
    /// Periodic fit through `points` resampled to `n` uniform-arclength nodes.
    /// Clockwise input is reversed.
    pub fn from_points(points: &[Vec2], n: usize) -> Result<Self> {
        let mut distinct = points.to_vec();
        distinct.dedup_by(|a, b| (*a - *b).norm() == 0.0);
        if distinct.len() > 1 && (distinct[0] - distinct[distinct.len() - 1]).norm() == 0.0 {
            distinct.pop();
        }
        if distinct.len() < 8 {
            return Err(Error::Domain(format!(
                "a closed curve needs at least 8 distinct points, got {}",
                distinct.len()
            )));
        }
        if !sweep::is_simple(&distinct) {
            return Err(Error::Validation("input polyline self-intersects".into()));
        }
        if shoelace(&distinct) < 0.0 {
            distinct.reverse();
            distinct.rotate_right(1);
        }
        Self::from_nodes(resample(&distinct, n).nodes)
    }

    /// Builds a curve from nodes that already sit at uniform arclength.
    pub fn from_nodes(nodes: Vec<Vec2>) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::Domain(format!(
                "curves need at least {MIN_NODES} nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::Validation("non-finite node".into()));
        }
        if shoelace(&nodes) <= 0.0 {
            return Err(Error::Validation("curve is not positively oriented".into()));
        }
        if !sweep::is_simple(&nodes) {
            return Err(Error::Validation("curve self-intersects".into()));
        }
        let g = ParamGeometry::new(&nodes);
        let tangents = g.normals.iter().map(|v| Vec2::new(v.y, -v.x)).collect();
        Ok(ClosedCurve {
            nodes,
            tangents,
            normals: g.normals,
            curvature: g.curvature,
            length: g.length,
            area: g.area,
            series: OnceLock::new(),
            sigma: OnceLock::new(),
        })
    }

    /// Circle of radius `r` centred at the origin.
    pub fn circle(r: f64, n: usize) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Domain("circle radius must be positive".into()));
        }
        Self::from_nodes(
            (0..n)
                .map(|j| {
                    let t = 2.0 * PI * j as f64 / n as f64;
                    Vec2::new(r * t.cos(), r * t.sin())
                })
                .collect(),
        )
    }

    /// Ellipse with semi-axes `a` (along x) and `b`.
    pub fn ellipse(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Domain("ellipse semi-axes must be positive".into()));
        }
        let m = (8 * n).max(1024);
        let pts: Vec<Vec2> = (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                Vec2::new(a * t.cos(), b * t.sin())
            })
            .collect();
        Self::from_points(&pts, n)
    }

    /// Polar curve r(θ) = radius(θ), densely sampled and resampled.
    pub fn polar<F: Fn(f64) -> f64>(radius: F, n: usize) -> Result<Self> {
        let m = (8 * n).max(1024);
        let pts: Vec<Vec2> = (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                Vec2::new(t.cos(), t.sin()) * radius(t)
            })
            .collect();
        Self::from_points(&pts, n)
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }
    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }
    /// Outer unit normals ν.
    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }
    /// Tangents τ = ν rotated clockwise by π/2.
    pub fn tangents(&self) -> &[Vec2] {
        &self.tangents
    }
    /// Signed curvature (positive on convex arcs).
    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    /// Enclosed area (spectral quadrature of ½∮ x dy − y dx).
    pub fn area(&self) -> f64 {
        self.area
    }
    /// Node spacing L/n, the quadrature weight.
    pub fn ds(&self) -> f64 {
        self.length / self.n() as f64
    }
    /// Arclength coordinate of node `i`.
    pub fn arclength(&self, i: usize) -> f64 {
        i as f64 * self.ds()
    }

    /// Trapezoid-rule integral of a nodal field.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.ds()
    }

    pub fn max_abs_curvature(&self) -> f64 {
        self.curvature.iter().fold(0.0, |m, k| m.max(k.abs()))
    }

    pub fn centroid(&self) -> Vec2 {
        self.nodes.iter().fold(Vec2::zeros(), |a, p| a + p) / self.n() as f64
    }

    /// Bit-level fingerprint of the node positions.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for p in &self.nodes {
            p.x.to_bits().hash(&mut h);
            p.y.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Trigonometric interpolants (x(t), y(t)), `t = 2πs/L`.
    pub(crate) fn series(&self) -> &(TrigSeries, TrigSeries) {
        self.series.get_or_init(|| {
            let x: Vec<f64> = self.nodes.iter().map(|p| p.x).collect();
            let y: Vec<f64> = self.nodes.iter().map(|p| p.y).collect();
            (TrigSeries::interpolate(&x), TrigSeries::interpolate(&y))
        })
    }

    /// Point, first and second derivative of the interpolant at `t = 2πs/L`.
    pub(crate) fn eval_param(&self, t: f64) -> (Vec2, Vec2, Vec2) {
        let (sx, sy) = self.series();
        let (x, x1, x2) = sx.eval2(t);
        let (y, y1, y2) = sy.eval2(t);
        (Vec2::new(x, y), Vec2::new(x1, y1), Vec2::new(x2, y2))
    }

    /// Point on the curve at arclength `s`.
    pub fn point_at(&self, s: f64) -> Vec2 {
        self.eval_param(2.0 * PI * s / self.length).0
    }

    /// Anisotropic curvature κ^φ = g(ν)κ at each node.
    pub fn aniso_curvature(&self, a: &Anisotropy) -> Vec<f64> {
        self.normals.iter().zip(&self.curvature).map(|(nu, k)| a.mobility(*nu) * k).collect()
    }

    /// P_φ = ∫ φ(ν) ds.
    pub fn aniso_perimeter(&self, a: &Anisotropy) -> f64 {
        self.normals.iter().map(|nu| a.value(*nu)).sum::<f64>() * self.ds()
    }

    /// ∫ κ^φ φ(ν) ds, which is independent of the curve.
    pub fn gauss_bonnet(&self, a: &Anisotropy) -> f64 {
        let kp = self.aniso_curvature(a);
        self.normals.iter().zip(&kp).map(|(nu, k)| k * a.value(*nu)).sum::<f64>() * self.ds()
    }

    /// `order`-th arclength derivative (counterclockwise direction), 1..=4.
    pub fn tangential_derivative(&self, f: &[f64], order: u32) -> Result<Vec<f64>> {
        if !(1..=4).contains(&order) {
            return Err(Error::Domain(format!("derivative order must be in 1..=4, got {order}")));
        }
        self.check_field(f)?;
        Ok(spectral::derivative(f, self.length, order))
    }

    pub(crate) fn check_field(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n() {
            return Err(Error::Domain(format!(
                "field has {} values but the curve has {} nodes",
                f.len(),
                self.n()
            )));
        }
        Ok(())
    }

    /// Lower bound on the uniform-ball radius: the smallest radius of a ball
    /// tangent at a node (inside or outside) that reaches another node,
    /// capped by 1/max|κ|.
    pub fn ubc_radius(&self) -> f64 {
        let n = self.n();
        let mut r = 1.0 / self.max_abs_curvature();
        for i in 0..n {
            let (xi, nu) = (self.nodes[i], self.normals[i]);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = self.nodes[j] - xi;
                let dn = d.dot(&nu).abs();
                if dn > 0.0 {
                    r = r.min(d.norm_squared() / (2.0 * dn));
                }
            }
        }
        r
    }

    /// Tube half-width σ_E = min(1/(2‖κ‖∞), UBC radius).
    pub fn sigma(&self) -> f64 {
        *self.sigma.get_or_init(|| (0.5 / self.max_abs_curvature()).min(self.ubc_radius()))
    }

    /// Closest-point parameter `t = 2πs/L` for `x`, refined by Newton from
    /// the nearest node.
    pub(crate) fn closest_param(&self, x: Vec2) -> f64 {
        let n = self.n();
        let i0 = (0..n)
            .min_by(|&a, &b| {
                (self.nodes[a] - x).norm_squared().total_cmp(&(self.nodes[b] - x).norm_squared())
            })
            .unwrap();
        let mut t = 2.0 * PI * i0 as f64 / n as f64;
        let dt = 2.0 * PI / n as f64;
        for _ in 0..50 {
            let (p, p1, p2) = self.eval_param(t);
            let r = p - x;
            let g = r.dot(&p1);
            let h = p1.norm_squared() + r.dot(&p2);
            let step = if h > 0.0 { g / h } else { g / p1.norm_squared() };
            let step = step.clamp(-dt, dt);
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        t.rem_euclid(2.0 * PI)
    }

    /// Distance from `x` to the curve (not signed).
    pub fn distance(&self, x: Vec2) -> f64 {
        (self.eval_param(self.closest_param(x)).0 - x).norm()
    }

    /// Projection onto the curve: (foot π(x), signed distance d(x), arclength
    /// of the foot). Negative distances are inside.
    pub fn project(&self, x: Vec2) -> Result<(Vec2, f64, f64)> {
        let t = self.closest_param(x);
        let (foot, p1, _) = self.eval_param(t);
        let nu = Vec2::new(p1.y, -p1.x) / p1.norm();
        let d = (x - foot).dot(&nu);
        let sigma = self.sigma();
        if !(d.abs() < sigma) {
            return Err(Error::OutOfTube { distance: d.abs(), sigma });
        }
        Ok((foot, d, t * self.length / (2.0 * PI)))
    }

    /// Snapshot as JSON with 17 significant digits.
    pub fn to_json(&self) -> String {
        let nodes: Vec<String> =
            self.nodes.iter().map(|p| format!("[{:.16e},{:.16e}]", p.x, p.y)).collect();
        format!(
            "{{\"n\":{},\"nodes\":[{}],\"length\":{:.16e},\"area\":{:.16e}}}",
            self.n(),
            nodes.join(","),
            self.length,
            self.area
        )
    }

    /// Parses a snapshot written by [`ClosedCurve::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Snap {
            nodes: Vec<[f64; 2]>,
        }
        let s: Snap = serde_json::from_str(text).map_err(|e| Error::Io(e.to_string()))?;
        Self::from_nodes(s.nodes.into_iter().map(|p| Vec2::new(p[0], p[1])).collect())
    }
}

/// Symmetric Hausdorff distance between two curves, measured from every node
/// of each curve to the smooth interpolant of the other.
pub fn hausdorff(a: &ClosedCurve, b: &ClosedCurve) -> f64 {
    let one = |p: &ClosedCurve, q: &ClosedCurve| {
        p.nodes().iter().map(|x| q.distance(*x)).fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Mat2;

    fn ellipse_curvature(a: f64, b: f64, t: f64) -> f64 {
        a * b / (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).powf(1.5)
    }

    #[test]
    fn circle_from_coarse_samples() {
        let pts: Vec<Vec2> = (0..64)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / 64.0;
                Vec2::new(t.cos(), t.sin())
            })
            .collect();
        let c = ClosedCurve::from_points(&pts, 128).unwrap();
        assert!((c.length() - 2.0 * PI).abs() < 1e-8);
        assert!((c.area() - PI).abs() < 1e-8);
        for i in 0..128 {
            assert!((c.curvature()[i] - 1.0).abs() < 1e-10);
            assert!((c.nodes()[i].norm() - 1.0).abs() < 1e-12);
        }
        // spacing uniform
        for i in 0..128 {
            let d = (c.nodes()[(i + 1) % 128] - c.nodes()[i]).norm();
            assert!((d / (c.nodes()[1] - c.nodes()[0]).norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn ellipse_tip_curvature_and_spectral_convergence() {
        let err = |n: usize| {
            let c = ClosedCurve::ellipse(2.0, 1.0, n).unwrap();
            c.nodes()
                .iter()
                .zip(c.curvature())
                .map(|(p, k)| {
                    let t = (p.y / 1.0).atan2(p.x / 2.0);
                    (k - ellipse_curvature(2.0, 1.0, t)).abs()
                })
                .fold(0.0, f64::max)
        };
        let c = ClosedCurve::ellipse(2.0, 1.0, 128).unwrap();
        assert!((c.curvature()[0] - 2.0).abs() < 1e-8);
        let (e64, e128) = (err(64), err(128));
        assert!(e64 / e128.max(1e-300) > 50.0, "{e64} {e128}");
    }

    #[test]
    fn figure_eight_rejected() {
        let pts: Vec<Vec2> = (0..64)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / 64.0;
                Vec2::new(t.sin(), (2.0 * t).sin())
            })
            .collect();
        assert!(matches!(ClosedCurve::from_points(&pts, 64), Err(Error::Validation(_))));
        assert!(matches!(ClosedCurve::from_points(&pts[..5], 64), Err(Error::Domain(_))));
    }

    #[test]
    fn tangent_convention_and_derivatives() {
        let c = ClosedCurve::circle(1.0, 32).unwrap();
        // τ = ν rotated clockwise
        assert!((c.tangents()[0] - Vec2::new(0.0, -1.0)).norm() < 1e-14);
        let e = ClosedCurve::ellipse(1.5, 0.7, 64).unwrap();
        let l = e.length();
        let f: Vec<f64> = (0..64).map(|i| (2.0 * PI * e.arclength(i) / l).sin()).collect();
        let d = e.tangential_derivative(&f, 1).unwrap();
        for i in 0..64 {
            let ex = 2.0 * PI / l * (2.0 * PI * e.arclength(i) / l).cos();
            assert!((d[i] - ex).abs() < 1e-12);
        }
        let d4 = e.tangential_derivative(&vec![3.0; 64], 4).unwrap();
        assert!(d4.iter().all(|v| v.abs() < 1e-12));
        assert!(e.tangential_derivative(&f, 5).is_err());
        let lk = c.tangential_derivative(c.curvature(), 2).unwrap();
        assert!(lk.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn anisotropic_integrals_on_circle() {
        let c = ClosedCurve::circle(1.0, 256).unwrap();
        let f = Anisotropy::fourier(vec![(0.05, 4)]).unwrap();
        assert!((c.aniso_perimeter(&Anisotropy::Euclidean) - 2.0 * PI).abs() < 1e-12);
        assert!((c.aniso_perimeter(&f) - 2.0 * PI).abs() < 1e-12);
        let e = Anisotropy::elliptic(Mat2::new(4.0, 0.0, 0.0, 1.0)).unwrap();
        // independent oracle: composite Simpson on a fine grid
        let m = 20000;
        let q: f64 = (0..=m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                let w = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
                w * (4.0 * t.cos().powi(2) + t.sin().powi(2)).sqrt()
            })
            .sum::<f64>()
            * (2.0 * PI / m as f64)
            / 3.0;
        assert!((c.aniso_perimeter(&e) - q).abs() < 1e-10);
        let c2 = ClosedCurve::circle(2.0, 64).unwrap();
        assert!(c2.aniso_curvature(&Anisotropy::Euclidean).iter().all(|k| (k - 0.5).abs() < 1e-12));
        assert!((c.aniso_curvature(&e)[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn projection_and_tube() {
        let c = ClosedCurve::circle(1.0, 64).unwrap();
        assert!((c.sigma() - 0.5).abs() < 1e-12);
        let (foot, d, _) = c.project(Vec2::new(1.2, 0.0)).unwrap();
        assert!((foot - Vec2::new(1.0, 0.0)).norm() < 1e-12 && (d - 0.2).abs() < 1e-12);
        let (_, d, _) = c.project(Vec2::new(0.9, 0.0)).unwrap();
        assert!((d + 0.1).abs() < 1e-12);
        assert!(matches!(c.project(Vec2::new(1.5, 0.0)), Err(Error::OutOfTube { .. })));
        let x = Vec2::new(0.7, 0.9);
        let (foot, d, s) = c.project(x).unwrap();
        let nu = c.eval_param(2.0 * PI * s / c.length()).1;
        let nu = Vec2::new(nu.y, -nu.x).normalize();
        assert!((foot + nu * d - x).norm() < 1e-9);
    }

    #[test]
    fn ubc_examples() {
        assert!((ClosedCurve::circle(0.7, 128).unwrap().ubc_radius() - 0.7).abs() < 1e-9);
        assert!(ClosedCurve::ellipse(2.0, 1.0, 256).unwrap().ubc_radius() <= 0.5 + 1e-9);
        // two lobes joined by a neck of width 0.1
        let pts: Vec<Vec2> = (0..2048)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / 2048.0;
                Vec2::new(2.0 * t.cos(), t.sin() * (0.05 + 0.95 * t.cos().powi(2)))
            })
            .collect();
        let d = ClosedCurve::from_points(&pts, 512).unwrap();
        assert!(d.ubc_radius() <= 0.05 + 1e-9);
    }

    #[test]
    fn json_round_trip() {
        let c = ClosedCurve::ellipse(1.3, 0.8, 32).unwrap();
        let d = ClosedCurve::from_json(&c.to_json()).unwrap();
        assert_eq!(c.nodes(), d.nodes());
    }
}
