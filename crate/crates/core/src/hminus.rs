//! Pseudo-H⁻¹ distance between tube-close curves.

use std::f64::consts::PI;

use crate::curve::{extract_graph, ClosedCurve, HeightField};
use crate::error::{Error, Result};
use crate::fields::DivergenceFreeField;
use crate::spectral::{self, TrigSeries};
use crate::Vec2;

/// Fiberwise signed volume ξ between a curve F and the reference E.
#[derive(Debug, Clone)]
pub struct MassDiscrepancy {
    pub reference: ClosedCurve,
    pub xi: Vec<f64>,
}

impl MassDiscrepancy {
    /// ∫ ξ ds, equal to |F| − |E|.
    pub fn integral(&self) -> f64 {
        self.reference.integrate(&self.xi)
    }
}

/// ξ = ψ + κψ²/2 for a graph.
pub fn xi_graph(hf: &HeightField) -> MassDiscrepancy {
    let e = hf.reference();
    let xi = hf.values().iter().zip(e.curvature()).map(|(p, k)| p + 0.5 * k * p * p).collect();
    MassDiscrepancy { reference: e.clone(), xi }
}

fn inside_polygon(pts: &[Vec2], q: Vec2) -> bool {
    let n = pts.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        if (a.y > q.y) != (b.y > q.y) {
            let x = a.x + (q.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if x > q.x {
                inside = !inside;
            }
        }
    }
    inside
}

/// ξ(x) = ∫_{−σ}^{σ} (χ_F − χ_E)(x + tν)(1 + tκ) dt at every node of E.
/// The indicator of F along each normal segment is resolved exactly: its
/// jumps are located on the polygon of F and refined on its smooth
/// interpolant, and the weight is integrated in closed form between them.
pub fn xi_scan(e: &ClosedCurve, f: &ClosedCurve, sigma: f64) -> Result<MassDiscrepancy> {
    for x in f.nodes() {
        let d = e.distance(*x);
        if !(d < sigma) {
            return Err(Error::Domain(format!("F leaves the σ tube: node at distance {d:.3e}")));
        }
    }
    let fp = f.nodes();
    let nf = fp.len();
    let mut xi = Vec::with_capacity(e.n());
    for j in 0..e.n() {
        let (x, nu, k) = (e.nodes()[j], e.normals()[j], e.curvature()[j]);
        let mut cuts = Vec::new();
        for i in 0..nf {
            let (a, b) = (fp[i], fp[(i + 1) % nf]);
            // solve a + u(b − a) = x + tν
            let ab = b - a;
            let det = ab.perp(&nu);
            if det.abs() < 1e-300 {
                continue;
            }
            let r = x - a;
            let u = r.perp(&nu) / det;
            let t = r.perp(&ab) / det;
            if !(-1e-9..=1.0 + 1e-9).contains(&u) || t.abs() > sigma {
                continue;
            }
            // refine on the smooth curve: X_F(s) = x + tν
            let (mut s, mut t) = (2.0 * PI * (i as f64 + u) / nf as f64, t);
            for _ in 0..30 {
                let (p, p1, _) = f.eval_param(s);
                let g = p - x - nu * t;
                let det = p1.perp(&(-nu));
                let ds = g.perp(&(-nu)) / det;
                let dt = p1.perp(&g) / det;
                s -= ds;
                t -= dt;
                if ds.abs() + dt.abs() < 1e-15 {
                    break;
                }
            }
            if t.abs() < sigma {
                cuts.push(t);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let w = |t: f64| t + 0.5 * k * t * t;
        let mut inside_f = inside_polygon(fp, x - nu * sigma);
        let mut lo = -sigma;
        let mut acc = 0.0;
        let breaks = cuts.iter().copied().chain(std::iter::once(sigma));
        for hi in breaks {
            // split the interval at t = 0 where χ_E jumps
            for (a, b) in [(lo, hi.min(0.0)), (lo.max(0.0), hi)] {
                if b > a {
                    let chi_e = if b <= 0.0 { 1.0 } else { 0.0 };
                    let chi_f = if inside_f { 1.0 } else { 0.0 };
                    acc += (chi_f - chi_e) * (w(b) - w(a));
                }
            }
            inside_f = !inside_f;
            lo = hi;
        }
        xi.push(acc);
    }
    Ok(MassDiscrepancy { reference: e.clone(), xi })
}

/// Spectral inverse of −∂²_s on mean-zero data; the mean of `xi` is ignored.
pub(crate) fn inverse_laplacian(e: &ClosedCurve, xi: &[f64]) -> Vec<f64> {
    let n = xi.len();
    let kn = (n / 2) as f64 * 2.0 * PI / e.length();
    spectral::apply_multiplier(
        xi,
        e.length(),
        |k| {
            if k == 0.0 {
                0.0.into()
            } else {
                (1.0 / (k * k)).into()
            }
        },
        Some(1.0 / (kn * kn)),
    )
}

/// Solves −∂²_s v = ξ with ∫v = 0. ξ must have zero integral up to
/// `1e-8·L·‖ξ‖∞`.
pub fn solve_mean_zero_poisson(e: &ClosedCurve, xi: &[f64]) -> Result<Vec<f64>> {
    e.check_field(xi)?;
    let integral = e.integrate(xi);
    let sup = xi.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if integral.abs() > 1e-8 * e.length() * sup {
        return Err(Error::InfiniteDistance { integral });
    }
    Ok(inverse_laplacian(e, xi))
}

/// H⁻¹ distance and its maximizer.
#[derive(Debug, Clone)]
pub struct Distance {
    pub d: f64,
    /// Maximizer f = v/d (zero when degenerate).
    pub f: Vec<f64>,
    /// Potential v with −∂²_s v = ξ.
    pub v: Vec<f64>,
    pub degenerate: bool,
}

fn distance_from_potential(e: &ClosedCurve, v: Vec<f64>) -> Distance {
    let dv = spectral::derivative(&v, e.length(), 1);
    let d = e.integrate(&dv.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt();
    if d == 0.0 {
        let n = v.len();
        return Distance { d, f: vec![0.0; n], v, degenerate: true };
    }
    Distance { d, f: v.iter().map(|x| x / d).collect(), v, degenerate: false }
}

/// d = ‖∂_s v‖_{L²} for mean-zero ξ.
pub fn dist(e: &ClosedCurve, xi: &[f64]) -> Result<Distance> {
    let v = solve_mean_zero_poisson(e, xi)?;
    Ok(distance_from_potential(e, v))
}

/// Distance of ξ after subtracting its mean; returns the subtracted mean.
pub fn dist_projected(e: &ClosedCurve, xi: &[f64]) -> Result<(Distance, f64)> {
    e.check_field(xi)?;
    let m = spectral::mean(xi);
    Ok((distance_from_potential(e, inverse_laplacian(e, xi)), m))
}

/// First variation of t ↦ d(Φ_t(F), E) along a divergence-free field:
/// returns (∫_F f∘π X·ν_F, central difference with t = 1e-4).
pub fn first_variation_check(
    e: &ClosedCurve,
    f: &ClosedCurve,
    x: &DivergenceFreeField,
) -> Result<(f64, f64)> {
    let d_of = |curve: &ClosedCurve| -> Result<Distance> {
        let g = extract_graph(e, curve)?;
        Ok(dist_projected(e, &xi_graph(&g).xi)?.0)
    };
    let base = d_of(f)?;
    if base.degenerate {
        return Err(Error::Degenerate);
    }
    let fs = TrigSeries::interpolate(&base.f);
    let mut analytic = 0.0;
    for (p, nu) in f.nodes().iter().zip(f.normals()) {
        let (_, _, s) = e.project(*p)?;
        analytic += fs.eval(2.0 * PI * s / e.length()) * x.velocity(*p).dot(nu);
    }
    analytic *= f.ds();
    let t = 1e-4;
    let field = x.to_field();
    let moved = |sign: f64| -> Result<f64> {
        let pts = field.flow(f.nodes(), sign * t, 1);
        Ok(d_of(&ClosedCurve::from_points(&pts, f.n())?)?.d)
    };
    let numeric = (moved(1.0)? - moved(-1.0)?) / (2.0 * t);
    Ok((analytic, numeric))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_modes_on_unit_circle() {
        let e = ClosedCurve::circle(1.0, 128).unwrap();
        for k in 1..=16 {
            let xi: Vec<f64> = (0..128).map(|i| (k as f64 * 2.0 * PI * i as f64 / 128.0).cos()).collect();
            let v = solve_mean_zero_poisson(&e, &xi).unwrap();
            for i in 0..128 {
                assert!((v[i] - xi[i] / (k * k) as f64).abs() < 1e-13);
            }
            let d = dist(&e, &xi).unwrap();
            assert!((d.d - PI.sqrt() / k as f64).abs() < 1e-10);
        }
        assert!(matches!(solve_mean_zero_poisson(&e, &vec![1.0; 128]), Err(Error::InfiniteDistance { .. })));
        let z = dist(&e, &vec![0.0; 128]).unwrap();
        assert!(z.degenerate && z.d == 0.0);
    }

    #[test]
    fn scan_matches_graph() {
        let e = ClosedCurve::circle(1.0, 64).unwrap();
        let hf = HeightField::new(e.clone(), vec![0.1; 64]).unwrap();
        let f = hf.lift().unwrap();
        let s = xi_scan(&e, &f, 0.3).unwrap();
        assert!(s.xi.iter().all(|x| (x - 0.105).abs() < 1e-12));
        assert!(xi_scan(&e, &e, 0.3).unwrap().xi.iter().all(|x| x.abs() < 1e-12));
        let psi: Vec<f64> = (0..64).map(|i| 0.04 * (3.0 * 2.0 * PI * i as f64 / 64.0).sin()).collect();
        let hf = HeightField::new(e.clone(), psi).unwrap();
        let g = xi_graph(&hf);
        let s = xi_scan(&e, &hf.lift().unwrap(), 0.3).unwrap();
        for i in 0..64 {
            assert!((g.xi[i] - s.xi[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn rotation_first_variation() {
        let e = ClosedCurve::circle(1.0, 128).unwrap();
        let psi: Vec<f64> = (0..128).map(|i| 0.05 * (2.0 * 2.0 * PI * i as f64 / 128.0).cos()).collect();
        let f = HeightField::new(e.clone(), psi).unwrap().lift().unwrap();
        // rotation leaves the distance to a circle unchanged
        let (a, n) = first_variation_check(&e, &f, &DivergenceFreeField::rotation()).unwrap();
        assert!(a.abs() < 1e-9 && n.abs() < 1e-9, "{a} {n}");
        let (a, n) = first_variation_check(&e, &f, &DivergenceFreeField::from_stream(vec![(1, 1, 1.0)])).unwrap();
        assert!(a.abs() > 1e-3 && (a - n).abs() < 1e-3 * a.abs(), "{a} {n}");
        let (a, n) = first_variation_check(&e, &f, &DivergenceFreeField::zero()).unwrap();
        assert!(a == 0.0 && n.abs() < 1e-9);
    }
}
