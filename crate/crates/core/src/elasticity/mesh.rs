//! Conforming triangulation of Ω∖F.

use std::collections::HashMap;
use std::ops::Range;

use serde::Serialize;
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::Domain;
use crate::curve::ClosedCurve;
use crate::error::{Error, Result};
use crate::Vec2;

/// Triangle mesh; vertices `0..outer` lie on ∂Ω, `hole` on ∂F.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub outer: usize,
    pub hole: Range<usize>,
    /// Arclength position on F of each hole vertex.
    pub hole_arclength: Vec<f64>,
}

#[derive(Serialize)]
struct MeshDump<'a> {
    vertices: Vec<[f64; 2]>,
    triangles: &'a [[usize; 3]],
    displacement: Vec<[f64; 2]>,
}

impl Mesh {
    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| self.signed_area(t)).sum()
    }

    pub(crate) fn signed_area(&self, t: &[usize; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i]);
        0.5 * (b - a).perp(&(c - a))
    }

    /// JSON with vertices, triangles and a displacement per vertex.
    pub fn dump_json(&self, displacement: &[Vec2]) -> String {
        serde_json::to_string(&MeshDump {
            vertices: self.vertices.iter().map(|p| [p.x, p.y]).collect(),
            triangles: &self.triangles,
            displacement: displacement.iter().map(|u| [u.x, u.y]).collect(),
        })
        .expect("mesh serializes")
    }
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - a - ab * t).norm()
}

fn inside(poly: &[Vec2], q: Vec2) -> bool {
    let n = poly.len();
    let mut c = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > q.y) != (b.y > q.y) && a.x + (q.y - a.y) / (b.y - a.y) * (b.x - a.x) > q.x {
            c = !c;
        }
    }
    c
}

/// Meshes Ω (minus F when given) with target edge length `h`: boundary
/// rings at spacing ≈h, a hexagonal interior lattice, constrained Delaunay,
/// and removal of triangles inside F.
pub fn build_mesh(omega: &Domain, f: Option<&ClosedCurve>, h: f64) -> Result<Mesh> {
    omega.validate()?;
    if !(h > 0.0) {
        return Err(Error::Validation("mesh size must be positive".into()));
    }
    let mut vertices = omega.boundary_points(h);
    let outer = vertices.len();
    let mut ring = Vec::new();
    let mut hole_arclength = Vec::new();
    if let Some(f) = f {
        let m = ((f.length() / h).ceil() as usize).max(12);
        for j in 0..m {
            let s = f.length() * j as f64 / m as f64;
            ring.push(f.point_at(s));
            hole_arclength.push(s);
        }
    }
    let hole = outer..outer + ring.len();
    vertices.extend_from_slice(&ring);

    let (lo, hi) = match omega {
        Domain::Disk { center, radius } => (center - Vec2::repeat(*radius), center + Vec2::repeat(*radius)),
        Domain::Rectangle { min, max } => (*min, *max),
    };
    let (rlo, rhi) = ring.iter().fold((Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY)), |(a, b), p| {
        (a.inf(p), b.sup(p))
    });
    let gap = 0.6 * h;
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = ((hi.y - lo.y) / dy).ceil() as i64;
    let cols = ((hi.x - lo.x) / h).ceil() as i64 + 1;
    for r in 0..=rows {
        let y = lo.y + r as f64 * dy;
        let shift = if r % 2 == 1 { 0.5 * h } else { 0.0 };
        for c in 0..=cols {
            let p = Vec2::new(lo.x + shift + c as f64 * h, y);
            if omega.clearance(p) <= gap {
                continue;
            }
            if !ring.is_empty()
                && p.x > rlo.x - gap
                && p.x < rhi.x + gap
                && p.y > rlo.y - gap
                && p.y < rhi.y + gap
            {
                if inside(&ring, p) {
                    continue;
                }
                let m = ring.len();
                if (0..m).any(|i| segment_distance(p, ring[i], ring[(i + 1) % m]) <= gap) {
                    continue;
                }
            }
            vertices.push(p);
        }
    }

    let mut edges: Vec<[usize; 2]> = (0..outer).map(|i| [i, (i + 1) % outer]).collect();
    let m = ring.len();
    edges.extend((0..m).map(|i| [outer + i, outer + (i + 1) % m]));
    let pts: Vec<Point2<f64>> = vertices.iter().map(|p| Point2::new(p.x, p.y)).collect();
    let mut conflict = false;
    let cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::try_bulk_load_cdt(pts, edges, |_| conflict = true)
        .map_err(|e| Error::Mesh(format!("triangulation failed: {e:?}")))?;
    if conflict {
        return Err(Error::Mesh("boundary constraints intersect (tangency or insufficient clearance)".into()));
    }
    if cdt.num_vertices() != vertices.len() {
        return Err(Error::Mesh("duplicate mesh vertices".into()));
    }
    let lookup: HashMap<(u64, u64), usize> =
        vertices.iter().enumerate().map(|(i, p)| ((p.x.to_bits(), p.y.to_bits()), i)).collect();
    let index_of = |p: Point2<f64>| lookup[&(p.x.to_bits(), p.y.to_bits())];
    let mut triangles = Vec::with_capacity(cdt.num_inner_faces());
    for face in cdt.inner_faces() {
        let t = face.vertices().map(|v| index_of(v.position()));
        let [a, b, c] = t.map(|i| vertices[i]);
        if !ring.is_empty() && inside(&ring, (a + b + c) / 3.0) {
            continue;
        }
        if (b - a).perp(&(c - a)) <= 0.0 {
            return Err(Error::Mesh("degenerate triangle".into()));
        }
        triangles.push(t);
    }
    // fixed order for bit-reproducible assembly
    triangles.sort_unstable();
    Ok(Mesh { vertices, triangles, outer, hole, hole_arclength })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn annulus_mesh_area() {
        let omega = Domain::Disk { center: Vec2::zeros(), radius: 2.0 };
        let f = ClosedCurve::circle(0.5, 64).unwrap();
        let m = build_mesh(&omega, Some(&f), 0.1).unwrap();
        let exact = PI * (4.0 - 0.25);
        assert!((m.area() - exact).abs() < 0.01 * exact);
        assert_eq!(m.hole.len(), m.hole_arclength.len());
        let r = build_mesh(&Domain::Rectangle { min: Vec2::new(-1.0, -1.0), max: Vec2::new(1.0, 2.0) }, None, 0.1).unwrap();
        assert!((r.area() - 6.0).abs() < 1e-12);
    }
}
