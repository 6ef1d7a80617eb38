//! P1 plane-strain assembly and solve.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{Matrix3, SMatrix, Vector3};

use super::{DirichletData, HookeTensor, Mesh};
use crate::curve::ClosedCurve;
use crate::error::{Error, Result};
use crate::{Mat2, Vec2};

/// Discrete equilibrium in Ω∖F.
#[derive(Debug, Clone)]
pub struct ElasticSolution {
    pub mesh: Mesh,
    pub displacement: Vec<Vec2>,
    pub energy: f64,
    /// Q(E(u)) at the hole vertices of the mesh.
    pub ring_q: Vec<f64>,
    /// Q(E(u)) at the curve nodes (empty before `trace_on`).
    pub boundary_q: Vec<f64>,
    /// ‖interior force‖ / ‖load‖.
    pub residual: f64,
    /// max over elements of |∇u|.
    pub max_gradient: f64,
}

/// Half-width of the tangential-strain stencil on the void ring.
const SLOPE_STENCIL: usize = 3;

type Bmat = SMatrix<f64, 3, 6>;

fn element(mesh: &Mesh, t: &[usize; 3]) -> (f64, Bmat, [Vec2; 3]) {
    let p = t.map(|i| mesh.vertices[i]);
    let area = 0.5 * (p[1] - p[0]).perp(&(p[2] - p[0]));
    // ∇λ_a = perp of opposite edge / 2A
    let grads = [0, 1, 2].map(|a| {
        let (b, c) = (p[(a + 1) % 3], p[(a + 2) % 3]);
        Vec2::new(b.y - c.y, c.x - b.x) / (2.0 * area)
    });
    let mut b = Bmat::zeros();
    for a in 0..3 {
        b[(0, 2 * a)] = grads[a].x;
        b[(1, 2 * a + 1)] = grads[a].y;
        b[(2, 2 * a)] = grads[a].y;
        b[(2, 2 * a + 1)] = grads[a].x;
    }
    (area, b, grads)
}

fn gradient(grads: &[Vec2; 3], u: [Vec2; 3]) -> Mat2 {
    (0..3).fold(Mat2::zeros(), |m, a| m + u[a] * grads[a].transpose())
}

/// Assembles and solves on a fixed mesh.
pub fn solve_on_mesh(mesh: Mesh, c: &HookeTensor, w0: &DirichletData) -> Result<ElasticSolution> {
    let d: Matrix3<f64> = c.voigt();
    let nv = mesh.vertices.len();
    let ndof = 2 * nv;
    let fixed = 2 * mesh.outer;
    // free dofs are numbered after the boundary ones
    let nfree = ndof - fixed;
    let mut ub = vec![0.0; fixed];
    for i in 0..mesh.outer {
        let w = w0.eval(mesh.vertices[i]);
        ub[2 * i] = w.x;
        ub[2 * i + 1] = w.y;
    }
    let mut trips = Vec::with_capacity(mesh.triangles.len() * 21);
    let mut rhs = vec![0.0; nfree];
    let mut elems = Vec::with_capacity(mesh.triangles.len());
    for t in &mesh.triangles {
        let (area, b, _) = element(&mesh, t);
        let k = b.transpose() * d * b * area;
        let dofs: [usize; 6] = [2 * t[0], 2 * t[0] + 1, 2 * t[1], 2 * t[1] + 1, 2 * t[2], 2 * t[2] + 1];
        for (a, &ga) in dofs.iter().enumerate() {
            if ga < fixed {
                continue;
            }
            for (bb, &gb) in dofs.iter().enumerate() {
                if gb < fixed {
                    rhs[ga - fixed] -= k[(a, bb)] * ub[gb];
                } else if ga >= gb {
                    trips.push(Triplet::new(ga - fixed, gb - fixed, k[(a, bb)]));
                }
            }
        }
        elems.push(k);
    }
    let mut u = vec![0.0; ndof];
    u[..fixed].copy_from_slice(&ub);
    if nfree > 0 {
        let kmat = SparseColMat::<usize, f64>::try_new_from_triplets(nfree, nfree, &trips)
            .map_err(|e| Error::Solver(format!("sparse assembly: {e:?}")))?;
        let llt = kmat.sp_cholesky(Side::Lower).map_err(|e| Error::Solver(format!("cholesky: {e:?}")))?;
        let b = Mat::from_fn(nfree, 1, |i, _| rhs[i]);
        let x = llt.solve(&b);
        for i in 0..nfree {
            u[fixed + i] = x[(i, 0)];
        }
    }
    // energy, residual and gradient bound from the element matrices
    let mut energy = 0.0;
    let mut force = vec![0.0; ndof];
    let mut max_gradient: f64 = 0.0;
    for (t, k) in mesh.triangles.iter().zip(&elems) {
        let dofs: [usize; 6] = [2 * t[0], 2 * t[0] + 1, 2 * t[1], 2 * t[1] + 1, 2 * t[2], 2 * t[2] + 1];
        let ue = SMatrix::<f64, 6, 1>::from_fn(|a, _| u[dofs[a]]);
        let f = k * ue;
        energy += 0.5 * ue.dot(&f);
        for a in 0..6 {
            force[dofs[a]] += f[a];
        }
        let (_, _, grads) = element(&mesh, t);
        let g = gradient(&grads, t.map(|i| Vec2::new(u[2 * i], u[2 * i + 1])));
        max_gradient = max_gradient.max(g.norm());
    }
    let load = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let res = force[fixed..].iter().map(|x| x * x).sum::<f64>().sqrt();
    let residual = if load > 0.0 { res / load } else { res };
    let displacement: Vec<Vec2> = (0..nv).map(|i| Vec2::new(u[2 * i], u[2 * i + 1])).collect();
    let mut sol = ElasticSolution {
        mesh,
        displacement,
        energy,
        ring_q: Vec::new(),
        boundary_q: Vec::new(),
        residual,
        max_gradient,
    };
    sol.ring_q = sol.recover_ring_q(&d);
    Ok(sol)
}

impl ElasticSolution {
    /// Q at each hole vertex from the traction-free condition: the
    /// tangential strain comes from the displacement along the ring, the
    /// normal and shear strains from ℂE(u)ν = 0.
    fn recover_ring_q(&self, d: &Matrix3<f64>) -> Vec<f64> {
        let ring = self.mesh.hole.clone();
        let m = ring.len();
        if m == 0 {
            return Vec::new();
        }
        (0..m)
            .map(|i| {
                // the same least-squares stencil differentiates u and the
                // ring itself, so affine and rigid displacements are exact
                let k = SLOPE_STENCIL.min((m - 1) / 2) as i64;
                let (mut du, mut dp) = (Vec2::zeros(), Vec2::zeros());
                for j in -k..=k {
                    let idx = ring.start + (i as i64 + j).rem_euclid(m as i64) as usize;
                    du += self.displacement[idx] * j as f64;
                    dp += self.mesh.vertices[idx] * j as f64;
                }
                let t = dp.normalize();
                let n = Vec2::new(t.y, -t.x);
                let ett = du.dot(&dp) / dp.norm_squared();
                let voigt = |a: Mat2| Vector3::new(a[(0, 0)], a[(1, 1)], a[(0, 1)] + a[(1, 0)]);
                let tt = voigt(t * t.transpose());
                let nn = voigt(n * n.transpose());
                let tn = voigt(t * n.transpose() + n * t.transpose());
                let traction = |e: Vector3<f64>| {
                    let sg = d * e;
                    Vec2::new(sg[0] * n.x + sg[2] * n.y, sg[2] * n.x + sg[1] * n.y)
                };
                let (c0, c1, c2) = (traction(tt * ett), traction(nn), traction(tn));
                let a = Mat2::new(c1.x, c2.x, c1.y, c2.y);
                let x = a.lu().solve(&(-c0)).unwrap_or_else(Vec2::zeros);
                let e = tt * ett + nn * x.x + tn * x.y;
                0.5 * e.dot(&(d * e))
            })
            .collect()
    }

    /// Periodic linear interpolation of the ring values to the nodes of `f`.
    pub fn trace_on(&self, f: &ClosedCurve) -> Vec<f64> {
        let s: Vec<f64> = (0..f.n()).map(|i| f.arclength(i)).collect();
        self.trace_at(&s, f.length())
    }

    /// Ring values at arclength positions `s` along a void boundary of
    /// length `period`.
    pub fn trace_at(&self, s: &[f64], period: f64) -> Vec<f64> {
        let ring = &self.mesh.hole_arclength;
        let m = ring.len();
        if m == 0 {
            return vec![0.0; s.len()];
        }
        s.iter()
            .map(|&x| {
                let x = x.rem_euclid(period);
                let j = ring.partition_point(|v| *v <= x).max(1) - 1;
                let (s0, s1) = (ring[j], if j + 1 < m { ring[j + 1] } else { period });
                let (q0, q1) = (self.ring_q[j], self.ring_q[(j + 1) % m]);
                let w = ((x - s0) / (s1 - s0)).clamp(0.0, 1.0);
                q0 * (1.0 - w) + q1 * w
            })
            .collect()
    }
}
