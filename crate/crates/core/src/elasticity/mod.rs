//! Plane linear elasticity in Ω∖F with a traction-free void.

mod fem;
mod mesh;

pub use fem::{solve_on_mesh, ElasticSolution};
pub use mesh::{build_mesh, Mesh};

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use nalgebra::Matrix3;

use crate::curve::ClosedCurve;
use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::quadrature::gauss_legendre;
use crate::spectral;
use crate::{Mat2, Vec2};

/// Fourth-order elasticity tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum HookeTensor {
    /// ℂA = 2μA + λ tr(A) I.
    Isotropic { lambda: f64, mu: f64 },
    /// Components C[i][j][k][l].
    Full(Box<[[[[f64; 2]; 2]; 2]; 2]>),
}

const VOIGT: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];

impl HookeTensor {
    pub fn isotropic(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !(lambda >= 0.0) {
            return Err(Error::Validation(format!("Lamé parameters need λ ≥ 0, μ > 0 (got {lambda}, {mu})")));
        }
        Ok(HookeTensor::Isotropic { lambda, mu })
    }

    /// Full tensor; checked for minor/major symmetry and coercivity.
    pub fn full(c: [[[[f64; 2]; 2]; 2]; 2]) -> Result<Self> {
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let v = c[i][j][k][l];
                        if (v - c[j][i][k][l]).abs() > 1e-12
                            || (v - c[i][j][l][k]).abs() > 1e-12
                            || (v - c[k][l][i][j]).abs() > 1e-12
                        {
                            return Err(Error::Validation("elasticity tensor lacks minor/major symmetry".into()));
                        }
                    }
                }
            }
        }
        let t = HookeTensor::Full(Box::new(c));
        t.check_coercive()?;
        Ok(t)
    }

    /// Coercivity on symmetric matrices: the Voigt matrix (with engineering
    /// shear) must be positive definite.
    pub fn check_coercive(&self) -> Result<()> {
        if self.voigt().cholesky().is_none() {
            return Err(Error::Validation("elasticity tensor is not coercive on symmetric matrices".into()));
        }
        Ok(())
    }

    /// D with σ = Dε for ε = (ε_xx, ε_yy, 2ε_xy).
    pub fn voigt(&self) -> Matrix3<f64> {
        match self {
            HookeTensor::Isotropic { lambda: l, mu: m } => {
                Matrix3::new(l + 2.0 * m, *l, 0.0, *l, l + 2.0 * m, 0.0, 0.0, 0.0, *m)
            }
            HookeTensor::Full(c) => Matrix3::from_fn(|a, b| {
                let ((i, j), (k, l)) = (VOIGT[a], VOIGT[b]);
                c[i][j][k][l]
            }),
        }
    }

    /// ℂA for symmetric A.
    pub fn apply(&self, a: Mat2) -> Mat2 {
        let s = self.voigt() * voigt_strain(a);
        Mat2::new(s[0], s[2], s[2], s[1])
    }
}

pub(crate) fn voigt_strain(a: Mat2) -> nalgebra::Vector3<f64> {
    nalgebra::Vector3::new(a[(0, 0)], a[(1, 1)], a[(0, 1)] + a[(1, 0)])
}

/// Q(A) = ½ ℂ sym(A) : sym(A).
pub fn quadratic_form(c: &HookeTensor, a: Mat2) -> f64 {
    let e = voigt_strain((a + a.transpose()) * 0.5);
    0.5 * e.dot(&(c.voigt() * e))
}

/// Outer domain Ω.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Disk { center: Vec2, radius: f64 },
    Rectangle { min: Vec2, max: Vec2 },
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Domain::Disk { radius, .. } => *radius > 0.0,
            Domain::Rectangle { min, max } => max.x > min.x && max.y > min.y,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation("outer domain has non-positive size".into()))
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Domain::Disk { radius, .. } => PI * radius * radius,
            Domain::Rectangle { min, max } => (max.x - min.x) * (max.y - min.y),
        }
    }

    /// Distance from an interior point to ∂Ω (negative outside).
    pub fn clearance(&self, p: Vec2) -> f64 {
        match self {
            Domain::Disk { center, radius } => radius - (p - center).norm(),
            Domain::Rectangle { min, max } => {
                (p.x - min.x).min(max.x - p.x).min(p.y - min.y).min(max.y - p.y)
            }
        }
    }

    pub fn center(&self) -> Vec2 {
        match self {
            Domain::Disk { center, .. } => *center,
            Domain::Rectangle { min, max } => (min + max) * 0.5,
        }
    }

    /// Boundary points at spacing about `h`, counterclockwise.
    pub(crate) fn boundary_points(&self, h: f64) -> Vec<Vec2> {
        match self {
            Domain::Disk { center, radius } => {
                let m = ((2.0 * PI * radius / h).ceil() as usize).max(16);
                (0..m)
                    .map(|j| {
                        let t = 2.0 * PI * j as f64 / m as f64;
                        center + Vec2::new(t.cos(), t.sin()) * *radius
                    })
                    .collect()
            }
            Domain::Rectangle { min, max } => {
                let corners = [*min, Vec2::new(max.x, min.y), *max, Vec2::new(min.x, max.y)];
                let mut pts = Vec::new();
                for i in 0..4 {
                    let (a, b) = (corners[i], corners[(i + 1) % 4]);
                    let m = (((b - a).norm() / h).ceil() as usize).max(1);
                    for j in 0..m {
                        pts.push(a + (b - a) * (j as f64 / m as f64));
                    }
                }
                pts
            }
        }
    }

    /// ∫_Ω q by tensor Gauss rules (exact for polynomials of moderate degree).
    pub fn integrate(&self, q: &Polynomial) -> f64 {
        match self {
            Domain::Disk { center, radius } => {
                let m = 96;
                let mut s = 0.0;
                for (r, w) in gauss_legendre(24, 0.0, *radius) {
                    for j in 0..m {
                        let t = 2.0 * PI * j as f64 / m as f64;
                        s += w * r * q.eval(center + Vec2::new(t.cos(), t.sin()) * r);
                    }
                }
                s * 2.0 * PI / m as f64
            }
            Domain::Rectangle { min, max } => {
                let (gx, gy) = (gauss_legendre(24, min.x, max.x), gauss_legendre(24, min.y, max.y));
                gx.iter()
                    .map(|(x, wx)| gy.iter().map(|(y, wy)| wx * wy * q.eval(Vec2::new(*x, *y))).sum::<f64>())
                    .sum()
            }
        }
    }
}

/// Polynomial q(x, y) = Σ c x^i y^j, terms as (i, j, c).
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<(u32, u32, f64)>,
}

impl Polynomial {
    pub fn new(terms: Vec<(u32, u32, f64)>) -> Self {
        Polynomial { terms }
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        self.terms.iter().map(|&(i, j, c)| c * p.x.powi(i as i32) * p.y.powi(j as i32)).sum()
    }

    /// A = ∫_0^x q dx and ∂A/∂y, used for ∫_F q = ∮ A dy.
    fn antiderivative(&self, p: Vec2) -> (f64, f64) {
        let (mut a, mut ay) = (0.0, 0.0);
        for &(i, j, c) in &self.terms {
            let xi = p.x.powi(i as i32 + 1) / (i as f64 + 1.0);
            a += c * xi * p.y.powi(j as i32);
            if j > 0 {
                ay += c * xi * j as f64 * p.y.powi(j as i32 - 1);
            }
        }
        (a, ay)
    }

    /// ∫_F q for the closed curve through `pts` (uniform parameter) and the
    /// exact gradient of that discrete value with respect to the points.
    pub(crate) fn green_integral(&self, pts: &[Vec2]) -> (f64, Vec<Vec2>) {
        let n = pts.len();
        let dt = 2.0 * PI / n as f64;
        let y: Vec<f64> = pts.iter().map(|p| p.y).collect();
        let y1 = spectral::derivative(&y, 2.0 * PI, 1);
        let (a, ay): (Vec<f64>, Vec<f64>) = pts.iter().map(|p| self.antiderivative(*p)).unzip();
        let value = a.iter().zip(&y1).map(|(a, y)| a * y).sum::<f64>() * dt;
        // d/dy_k of Σ a_j (Dy)_j = a_y,k y'_k + (Dᵀa)_k, Dᵀ = −D
        let da = spectral::derivative(&a, 2.0 * PI, 1);
        let grad = (0..n)
            .map(|k| Vec2::new(self.eval(pts[k]) * y1[k], ay[k] * y1[k] - da[k]) * dt)
            .collect();
        (value, grad)
    }
}

/// Prescribed displacement on ∂Ω.
#[derive(Debug, Clone, PartialEq)]
pub enum DirichletData {
    /// w₀(x) = A x + b.
    Affine { matrix: Mat2, shift: Vec2 },
    /// w₀(x) = δ (x − c)/|x − c| with c the centre of Ω.
    Radial { delta: f64, center: Vec2 },
}

impl DirichletData {
    pub fn eval(&self, p: Vec2) -> Vec2 {
        match self {
            DirichletData::Affine { matrix, shift } => matrix * p + shift,
            DirichletData::Radial { delta, center } => (p - center).normalize() * *delta,
        }
    }
}

/// Finite-element model data.
#[derive(Debug, Clone, PartialEq)]
pub struct FemModel {
    pub tensor: HookeTensor,
    pub omega: Domain,
    pub w0: DirichletData,
    pub mesh_size: f64,
}

/// Source of the bulk energy 𝓔 and its boundary trace Q.
#[derive(Debug, Clone, PartialEq)]
pub enum BulkEnergyModel {
    None,
    /// q stands for Q(E(u)); 𝓔(F) = ∫_{Ω∖F} q.
    Analytic { q: Polynomial, omega: Domain },
    Fem(FemModel),
}

impl BulkEnergyModel {
    pub fn is_none(&self) -> bool {
        matches!(self, BulkEnergyModel::None)
    }

    /// Checks that Ω strictly contains `f` (with two mesh sizes of clearance
    /// for the finite-element model).
    pub fn check_contains(&self, f: &ClosedCurve) -> Result<()> {
        let (omega, gap) = match self {
            BulkEnergyModel::None => return Ok(()),
            BulkEnergyModel::Analytic { omega, .. } => (omega, 0.0),
            BulkEnergyModel::Fem(m) => (omega_of(m), 2.0 * m.mesh_size),
        };
        let c = f.nodes().iter().map(|p| omega.clearance(*p)).fold(f64::INFINITY, f64::min);
        if !(c > gap) {
            return Err(Error::Mesh(format!("curve clearance to ∂Ω is {c:.3e}, need more than {gap:.3e}")));
        }
        Ok(())
    }
}

fn omega_of(m: &FemModel) -> &Domain {
    &m.omega
}

/// Finite-element equilibrium in Ω∖F (F = None leaves Ω intact).
pub fn solve_equilibrium(model: &FemModel, f: Option<&ClosedCurve>) -> Result<ElasticSolution> {
    if let Some(f) = f {
        BulkEnergyModel::Fem(model.clone()).check_contains(f)?;
    }
    let mesh = build_mesh(&model.omega, f, model.mesh_size)?;
    let mut sol = solve_on_mesh(mesh, &model.tensor, &model.w0)?;
    if let Some(f) = f {
        sol.boundary_q = sol.trace_on(f);
    }
    Ok(sol)
}

/// 𝓔(F).
pub fn energy(model: &BulkEnergyModel, f: &ClosedCurve) -> Result<f64> {
    match model {
        BulkEnergyModel::None => Ok(0.0),
        BulkEnergyModel::Analytic { q, omega } => {
            model.check_contains(f)?;
            Ok(omega.integrate(q) - q.green_integral(f.nodes()).0)
        }
        BulkEnergyModel::Fem(m) => Ok(solve_equilibrium(m, Some(f))?.energy),
    }
}

/// Q(E(u_F)) at the nodes of F.
pub fn boundary_q(model: &BulkEnergyModel, f: &ClosedCurve) -> Result<Vec<f64>> {
    match model {
        BulkEnergyModel::None => Ok(vec![0.0; f.n()]),
        BulkEnergyModel::Analytic { q, .. } => Ok(f.nodes().iter().map(|p| q.eval(*p)).collect()),
        BulkEnergyModel::Fem(m) => Ok(solve_equilibrium(m, Some(f))?.boundary_q),
    }
}

/// Shape derivative of the elastic energy along X: returns
/// (−∫_{∂F} Q X·ν, central difference of the energy with t = 1e-3·diam F).
/// The difference quotient deforms every mesh vertex by x + tX on a fixed
/// triangulation, so no remeshing noise enters it.
pub fn shape_derivative_check(model: &FemModel, f: &ClosedCurve, x: &VectorField) -> Result<(f64, f64)> {
    let sol = solve_equilibrium(model, Some(f))?;
    let analytic = -f
        .nodes()
        .iter()
        .zip(f.normals())
        .zip(&sol.boundary_q)
        .map(|((p, nu), q)| q * x.at(*p).dot(nu))
        .sum::<f64>()
        * f.ds();
    let diam = f
        .nodes()
        .iter()
        .flat_map(|a| f.nodes().iter().map(move |b| (a - b).norm()))
        .fold(0.0, f64::max);
    let t = 1e-3 * diam;
    let moved = |s: f64| -> Result<f64> {
        let mut mesh = sol.mesh.clone();
        for v in mesh.vertices.iter_mut() {
            *v += x.at(*v) * (s * t);
        }
        Ok(solve_on_mesh(mesh, &model.tensor, &model.w0)?.energy)
    };
    let numeric = (moved(1.0)? - moved(-1.0)?) / (2.0 * t);
    Ok((analytic, numeric))
}

/// Small cache of finite-element solutions keyed by curve fingerprint.
#[derive(Debug, Default, Clone)]
pub struct SolutionCache {
    inner: Arc<Mutex<HashMap<u64, Arc<ElasticSolution>>>>,
}

impl SolutionCache {
    pub fn solve(&self, model: &FemModel, f: &ClosedCurve) -> Result<Arc<ElasticSolution>> {
        let key = f.fingerprint();
        if let Some(s) = self.inner.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(solve_equilibrium(model, Some(f))?);
        let mut map = self.inner.lock().expect("cache lock");
        if map.len() > 8 {
            map.clear();
        }
        map.insert(key, s.clone());
        Ok(s)
    }
}
