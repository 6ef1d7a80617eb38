//! Normal graphs `x + ψ(x)ν(x)` over a reference curve.

use std::f64::consts::PI;

use super::{resample, sweep, ClosedCurve, ParamGeometry};
use crate::anisotropy::Anisotropy;
use crate::error::{Error, Result};
use crate::spectral::{self, TrigSeries};
use crate::Vec2;

/// A height function ψ on the nodes of a reference curve E.
#[derive(Debug, Clone)]
pub struct HeightField {
    reference: ClosedCurve,
    psi: Vec<f64>,
}

/// A lifted curve together with the arclength (along the lifted curve) of
/// the image of every reference node.
#[derive(Debug, Clone)]
pub struct Lifted {
    pub curve: ClosedCurve,
    pub node_arclength: Vec<f64>,
}

/// Frame of the graph curve expressed at the reference nodes.
#[derive(Debug, Clone)]
pub struct GraphFrame {
    pub tangents: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    /// J = √((1+ψκ)² + (∂_τψ)²), the ratio of arclength elements.
    pub jacobian: Vec<f64>,
}

/// Anisotropic curvature of a graph curve and its deviation from the
/// linearization `−g(ν_E)∂²_τψ + κ^φ_E`.
#[derive(Debug, Clone)]
pub struct CurvatureExpansion {
    pub kappa_phi_f: Vec<f64>,
    pub leading: Vec<f64>,
    pub remainder: Vec<f64>,
    /// Part of the remainder linear in ψ: `−gκ²ψ + g_θ κ ∂_τψ`.
    pub remainder_linear: Vec<f64>,
}

impl CurvatureExpansion {
    /// Remainder with its linear part removed; quadratic in ψ.
    pub fn remainder_quadratic(&self) -> Vec<f64> {
        self.remainder.iter().zip(&self.remainder_linear).map(|(r, l)| r - l).collect()
    }
}

impl HeightField {
    pub fn new(reference: ClosedCurve, psi: Vec<f64>) -> Result<Self> {
        reference.check_field(&psi)?;
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("height function has non-finite values".into()));
        }
        Ok(HeightField { reference, psi })
    }

    pub fn zero(reference: ClosedCurve) -> Self {
        let n = reference.n();
        HeightField { reference, psi: vec![0.0; n] }
    }

    pub fn reference(&self) -> &ClosedCurve {
        &self.reference
    }

    pub fn values(&self) -> &[f64] {
        &self.psi
    }

    pub fn sup_norm(&self) -> f64 {
        self.psi.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lifted points `x_i + ψ_i ν_i`, not resampled.
    pub fn lifted_nodes(&self) -> Vec<Vec2> {
        let e = &self.reference;
        e.nodes().iter().zip(e.normals()).zip(&self.psi).map(|((x, nu), p)| x + nu * *p).collect()
    }

    fn check_tube(&self) -> Result<()> {
        let (m, sigma) = (self.sup_norm(), self.reference.sigma());
        if !(m < sigma) {
            return Err(Error::Domain(format!(
                "‖ψ‖∞ = {m:.3e} is not below the tube half-width {sigma:.3e}"
            )));
        }
        Ok(())
    }

    /// The graph curve, resampled to the reference node count.
    pub fn lift(&self) -> Result<ClosedCurve> {
        Ok(self.lift_detailed()?.curve)
    }

    pub fn lift_detailed(&self) -> Result<Lifted> {
        self.check_tube()?;
        let pts = self.lifted_nodes();
        if !sweep::is_simple(&pts) {
            return Err(Error::Validation("lifted curve self-intersects".into()));
        }
        let r = resample(&pts, self.reference.n());
        Ok(Lifted { curve: ClosedCurve::from_nodes(r.nodes)?, node_arclength: r.input_arclength })
    }

    /// ∂_τψ along τ = ν rotated clockwise (opposite to counterclockwise arclength).
    pub fn tau_derivative(&self) -> Vec<f64> {
        spectral::derivative(&self.psi, self.reference.length(), 1).into_iter().map(|d| -d).collect()
    }

    /// Closed-form tangent, normal and arclength ratio of the graph curve.
    pub fn graph_frame(&self) -> Result<GraphFrame> {
        self.check_tube()?;
        let e = &self.reference;
        let dpsi = self.tau_derivative();
        let n = e.n();
        let mut out = GraphFrame {
            tangents: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            jacobian: Vec::with_capacity(n),
        };
        for i in 0..n {
            let (t, nu) = (e.tangents()[i], e.normals()[i]);
            let a = 1.0 + self.psi[i] * e.curvature()[i];
            let j = a.hypot(dpsi[i]);
            out.tangents.push((t * a + nu * dpsi[i]) / j);
            out.normals.push((nu * a - t * dpsi[i]) / j);
            out.jacobian.push(j);
        }
        Ok(out)
    }

    /// κ^φ of the graph curve at the lifted nodes, the leading-order
    /// expression and the remainder between them.
    pub fn curvature_expansion(&self, a: &Anisotropy) -> Result<CurvatureExpansion> {
        let frame = self.graph_frame()?;
        let e = &self.reference;
        let geo = ParamGeometry::new(&self.lifted_nodes());
        let kappa_phi_f: Vec<f64> =
            frame.normals.iter().zip(&geo.curvature).map(|(nu, k)| a.mobility(*nu) * k).collect();
        let d2 = spectral::derivative(&self.psi, e.length(), 2);
        let kpe = e.aniso_curvature(a);
        let leading: Vec<f64> = (0..e.n()).map(|i| -a.mobility(e.normals()[i]) * d2[i] + kpe[i]).collect();
        let remainder = kappa_phi_f.iter().zip(&leading).map(|(x, y)| x - y).collect();
        let dpsi = self.tau_derivative();
        let remainder_linear = (0..e.n())
            .map(|i| {
                let (nu, k) = (e.normals()[i], e.curvature()[i]);
                -a.mobility(nu) * k * k * self.psi[i] + a.mobility_derivative(nu) * k * dpsi[i]
            })
            .collect();
        Ok(CurvatureExpansion { kappa_phi_f, leading, remainder, remainder_linear })
    }

    /// Both sides of `∫_F |∂_s g|² = ∫_E |∂_s ĝ|²/J` for a field `g` on the
    /// nodes of `lift(self)`, with `ĝ(x) = g(x + ψν)`.
    pub fn pushforward_gradient_check(&self, g: &[f64]) -> Result<(f64, f64)> {
        let lifted = self.lift_detailed()?;
        let f = &lifted.curve;
        f.check_field(g)?;
        let dg = spectral::derivative(g, f.length(), 1);
        let lhs = f.integrate(&dg.iter().map(|v| v * v).collect::<Vec<_>>());
        let series = TrigSeries::interpolate(g);
        let ghat: Vec<f64> =
            lifted.node_arclength.iter().map(|u| series.eval(2.0 * PI * u / f.length())).collect();
        let e = &self.reference;
        let dgh = spectral::derivative(&ghat, e.length(), 1);
        let jac = self.graph_frame()?.jacobian;
        let rhs = e.integrate(&dgh.iter().zip(&jac).map(|(d, j)| d * d / j).collect::<Vec<_>>());
        Ok((lhs, rhs))
    }
}

/// Represents `F` as a normal graph over `E`. Fails with a graph breakdown
/// when a node of `F` leaves the tube of `E` or projection onto `E` is not
/// monotone.
pub fn extract_graph(e: &ClosedCurve, f: &ClosedCurve) -> Result<HeightField> {
    let (le, nf) = (e.length(), f.n());
    let mut feet = Vec::with_capacity(nf);
    for x in f.nodes() {
        match e.project(*x) {
            Ok((_, _, s)) => feet.push(s),
            Err(err) => return Err(Error::GraphBreakdown(format!("node of F leaves the tube: {err}"))),
        }
    }
    // unwrap the foot parameter, requiring a strictly monotone single turn
    let mut unwrapped = Vec::with_capacity(nf + 1);
    unwrapped.push(feet[0]);
    for i in 0..nf {
        let inc = (feet[(i + 1) % nf] - feet[i]).rem_euclid(le);
        if !(inc > 0.0 && inc < 0.5 * le) {
            return Err(Error::GraphBreakdown("projection onto E is not monotone".into()));
        }
        unwrapped.push(unwrapped[i] + inc);
    }
    if (unwrapped[nf] - unwrapped[0] - le).abs() > 1e-6 * le {
        return Err(Error::GraphBreakdown("projection onto E does not wind once".into()));
    }
    let sigma = e.sigma();
    let mut psi = Vec::with_capacity(e.n());
    for j in 0..e.n() {
        let (xj, tj, nj) = (e.nodes()[j], e.tangents()[j], e.normals()[j]);
        let s = unwrapped[0] + (e.arclength(j) - unwrapped[0]).rem_euclid(le);
        let i = unwrapped.partition_point(|u| *u <= s).clamp(1, nf) - 1;
        let frac = (s - unwrapped[i]) / (unwrapped[i + 1] - unwrapped[i]);
        let mut t = 2.0 * PI * (i as f64 + frac) / nf as f64;
        let mut converged = false;
        for _ in 0..50 {
            let (p, p1, _) = f.eval_param(t);
            let r = (p - xj).dot(&tj);
            let dr = p1.dot(&tj);
            if dr.abs() < 1e-300 {
                break;
            }
            let step = r / dr;
            t -= step;
            if step.abs() < 1e-14 {
                converged = true;
                break;
            }
        }
        let h = (f.eval_param(t).0 - xj).dot(&nj);
        if !converged || !(h.abs() < sigma) {
            return Err(Error::GraphBreakdown(format!("normal line at node {j} does not meet F in the tube")));
        }
        psi.push(h);
    }
    HeightField::new(e.clone(), psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth_field(e: &ClosedCurve, amp: f64, modes: &[(f64, f64, f64)]) -> Vec<f64> {
        let l = e.length();
        let raw: Vec<f64> = (0..e.n())
            .map(|i| {
                let t = 2.0 * PI * e.arclength(i) / l;
                modes.iter().map(|(k, c, s)| c * (k * t).cos() + s * (k * t).sin()).sum()
            })
            .collect();
        let m = raw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        raw.iter().map(|v| v * amp / m).collect()
    }

    #[test]
    fn concentric_lift_and_frames() {
        let e = ClosedCurve::circle(1.0, 64).unwrap();
        let hf = HeightField::new(e.clone(), vec![0.1; 64]).unwrap();
        let f = hf.lift().unwrap();
        assert!((f.area() - e.area() - PI * (1.21 - 1.0)).abs() < 1e-12);
        assert!((f.area() - e.area() - 2.0 * PI * 0.105).abs() < 1e-12);
        let fr = hf.graph_frame().unwrap();
        for i in 0..64 {
            assert!((fr.normals[i] - e.normals()[i]).norm() < 1e-14);
            assert!((fr.jacobian[i] - 1.1).abs() < 1e-12);
        }
        let c = 0.03;
        let exp = HeightField::new(e.clone(), vec![c; 64]).unwrap().curvature_expansion(&Anisotropy::Euclidean).unwrap();
        for k in &exp.kappa_phi_f {
            assert!((k - 1.0 / (1.0 + c)).abs() < 1e-10);
        }
        let z = HeightField::zero(e.clone()).curvature_expansion(&Anisotropy::Euclidean).unwrap();
        assert!(z.remainder.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn frames_match_direct_geometry() {
        let e = ClosedCurve::circle(1.0, 128).unwrap();
        let psi: Vec<f64> = (0..128).map(|i| 0.05 * (3.0 * 2.0 * PI * i as f64 / 128.0).cos()).collect();
        let hf = HeightField::new(e, psi).unwrap();
        let fr = hf.graph_frame().unwrap();
        let geo = ParamGeometry::new(&hf.lifted_nodes());
        let ds = hf.reference().length() / (2.0 * PI);
        for i in 0..128 {
            assert!((fr.normals[i] - geo.normals[i]).norm() < 1e-12);
            assert!((fr.tangents[i] - Vec2::new(geo.normals[i].y, -geo.normals[i].x)).norm() < 1e-12);
            assert!((fr.jacobian[i] - geo.speed[i] / ds).abs() < 1e-12);
        }
    }

    #[test]
    fn area_identity_round_trip_and_pushforward() {
        let e = ClosedCurve::ellipse(1.4, 0.8, 256).unwrap();
        let psi = smooth_field(&e, 0.05, &[(2.0, 0.3, -0.2), (3.0, 0.1, 0.4), (5.0, 0.2, 0.1)]);
        let hf = HeightField::new(e.clone(), psi.clone()).unwrap();
        let f = hf.lift().unwrap();
        let xi: Vec<f64> = psi.iter().zip(e.curvature()).map(|(p, k)| p + k * p * p / 2.0).collect();
        assert!((f.area() - e.area() - e.integrate(&xi)).abs() < 1e-10);
        let back = extract_graph(&e, &f).unwrap();
        let err = back.values().iter().zip(&psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        let g: Vec<f64> = f.nodes().iter().map(|p| (2.0 * p.x).sin() + p.y * p.y).collect();
        let (l, r) = hf.pushforward_gradient_check(&g).unwrap();
        assert!((l - r).abs() < 1e-8 * l, "{l} {r}");
    }

    #[test]
    fn concentric_pushforward_closed_form() {
        let e = ClosedCurve::circle(1.0, 128).unwrap();
        let c = 0.2;
        let hf = HeightField::new(e, vec![c; 128]).unwrap();
        let f = hf.lift().unwrap();
        let g: Vec<f64> = f.nodes().iter().map(|p| p.x / p.norm()).collect();
        let (l, r) = hf.pushforward_gradient_check(&g).unwrap();
        assert!((l - PI / (1.0 + c)).abs() < 1e-10 && (r - PI / (1.0 + c)).abs() < 1e-10);
    }

    #[test]
    fn breakdown_and_tube_errors() {
        let e = ClosedCurve::circle(1.0, 64).unwrap();
        let shifted = ClosedCurve::from_nodes(e.nodes().iter().map(|p| p + Vec2::new(1.5, 0.0)).collect()).unwrap();
        assert!(matches!(extract_graph(&e, &shifted), Err(Error::GraphBreakdown(_))));
        let bad = HeightField::new(e.clone(), vec![0.5; 64]).unwrap();
        assert!(matches!(bad.lift(), Err(Error::Domain(_))));
        let big = ClosedCurve::circle(1.1, 64).unwrap();
        let g = extract_graph(&e, &big).unwrap();
        assert!(g.values().iter().all(|v| (v - 0.1).abs() < 1e-12));
    }
}
