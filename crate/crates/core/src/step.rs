//! One incremental minimization of perimeter + bulk energy + d²/(2h) over
//! normal graphs on the previous curve.

use std::f64::consts::PI;

use crate::anisotropy::Anisotropy;
use crate::curve::{ClosedCurve, HeightField, Lifted};
use crate::elasticity::{self, BulkEnergyModel, SolutionCache};
use crate::error::{Error, Result};
use crate::hminus;
use crate::optim::{self, LbfgsConfig};
use crate::spectral;
use crate::Vec2;

/// Solver used for the incremental problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Minimize,
    ElFixedPoint,
}

#[derive(Debug, Clone)]
pub struct StepConfig {
    pub h: f64,
    pub beta: f64,
    pub anisotropy: Anisotropy,
    pub bulk: BulkEnergyModel,
    pub backend: Backend,
    /// Sup-norm tolerance on the gradient density (minimize) or on the
    /// update (fixed point).
    pub tol: f64,
    pub max_iter: usize,
    /// Outer re-linearizations of a finite-element bulk term.
    pub max_outer: usize,
    pub outer_tol: f64,
    pub cache: SolutionCache,
}

impl StepConfig {
    pub fn new(h: f64, beta: f64, anisotropy: Anisotropy) -> Self {
        StepConfig {
            h,
            beta,
            anisotropy,
            bulk: BulkEnergyModel::None,
            backend: Backend::Minimize,
            tol: 1e-9,
            max_iter: 500,
            max_outer: 12,
            outer_tol: 1e-10,
            cache: SolutionCache::default(),
        }
    }

    pub fn with_bulk(mut self, bulk: BulkEnergyModel) -> Self {
        self.bulk = bulk;
        self
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Validation(format!("h must be positive (got {})", self.h)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Validation(format!("beta must be positive (got {})", self.beta)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Validation("optimizer tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }

    /// Validity against the incoming curve: β below the tube half-width.
    pub fn validate_for(&self, e: &ClosedCurve) -> Result<()> {
        self.validate()?;
        let sigma = e.sigma();
        if !(self.beta < sigma) {
            return Err(Error::Validation(format!("beta = {} is not below σ_E = {sigma:.4e}", self.beta)));
        }
        self.bulk.check_contains(e)
    }
}

/// Energy split of a step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Energies {
    pub perimeter: f64,
    pub elastic: f64,
    /// d²/(2h).
    pub dissipation: f64,
}

impl Energies {
    /// P_φ + 𝓔.
    pub fn free_energy(&self) -> f64 {
        self.perimeter + self.elastic
    }

    pub fn total(&self) -> f64 {
        self.perimeter + self.elastic + self.dissipation
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub f: ClosedCurve,
    pub psi: HeightField,
    pub d: f64,
    pub lagrange_l: f64,
    pub el_residual_norm: f64,
    pub energies: Energies,
    /// ‖ψ‖∞/β.
    pub constraint_margin: f64,
    /// The box |ψ| ≤ β was reached during the solve.
    pub box_active: bool,
    pub iteration_quantity: f64,
    pub iterations: usize,
    /// Largest |∇u| of the elastic solution on F (0 without elasticity).
    pub elastic_max_gradient: f64,
}

/// 𝓖(E) = P_φ(E) + 𝓔(E).
pub fn free_energy(e: &ClosedCurve, cfg: &StepConfig) -> Result<f64> {
    Ok(e.aniso_perimeter(&cfg.anisotropy) + bulk_energy(e, cfg)?)
}

fn bulk_energy(f: &ClosedCurve, cfg: &StepConfig) -> Result<f64> {
    match &cfg.bulk {
        BulkEnergyModel::Fem(m) => Ok(cfg.cache.solve(m, f)?.energy),
        other => elasticity::energy(other, f),
    }
}

/// Q at the lifted nodes of a graph.
fn bulk_trace(lifted: &Lifted, pts: &[Vec2], cfg: &StepConfig) -> Result<Vec<f64>> {
    match &cfg.bulk {
        BulkEnergyModel::None => Ok(vec![0.0; pts.len()]),
        BulkEnergyModel::Analytic { q, .. } => Ok(pts.iter().map(|p| q.eval(*p)).collect()),
        BulkEnergyModel::Fem(m) => {
            let sol = cfg.cache.solve(m, &lifted.curve)?;
            Ok(sol.trace_at(&lifted.node_arclength, lifted.curve.length()))
        }
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Bulk contribution to the discrete objective.
enum BulkTerm {
    None,
    Analytic { omega_integral: f64, q: elasticity::Polynomial },
    /// 𝓔 ≈ e0 − Σ w q_j (ξ_j − ξ0_j), re-linearized between outer passes.
    Frozen { e0: f64, q: Vec<f64>, xi0: Vec<f64> },
}

/// Discrete objective over heights on the nodes of E.
struct Objective<'a> {
    e: &'a ClosedCurve,
    a: &'a Anisotropy,
    h: f64,
    beta: f64,
    bulk: BulkTerm,
    w: f64,
}

struct Evaluation {
    value: f64,
    grad: Vec<f64>,
}

impl<'a> Objective<'a> {
    /// Heights with exactly mean-zero ξ: ψ = φ + c, c the small root of
    /// ∫(φ + c) + κ(φ + c)²/2 = 0.
    fn constrained(&self, phi: &[f64]) -> Option<Vec<f64>> {
        let k = self.e.curvature();
        let w = self.w;
        let a = 0.5 * w * k.iter().sum::<f64>();
        let b = w * phi.iter().zip(k).map(|(p, k)| 1.0 + k * p).sum::<f64>();
        let c0 = w * phi.iter().zip(k).map(|(p, k)| p + 0.5 * k * p * p).sum::<f64>();
        let disc = b * b - 4.0 * a * c0;
        if !(disc >= 0.0) || !(b > 0.0) {
            return None;
        }
        let c = -2.0 * c0 / (b + disc.sqrt());
        Some(phi.iter().map(|p| p + c).collect())
    }

    fn xi(&self, psi: &[f64]) -> Vec<f64> {
        psi.iter().zip(self.e.curvature()).map(|(p, k)| p + 0.5 * k * p * p).collect()
    }

    /// Value and ψ-gradient; `None` outside the box or where the graph
    /// degenerates.
    fn eval(&self, psi: &[f64]) -> Option<Evaluation> {
        let e = self.e;
        let n = e.n();
        if sup(psi) > self.beta || psi.iter().zip(e.curvature()).any(|(p, k)| 1.0 + k * p <= 0.0) {
            return None;
        }
        let pts: Vec<Vec2> = (0..n).map(|i| e.nodes()[i] + e.normals()[i] * psi[i]).collect();
        // P = Σ φ(y', −x') dt on the doubled grid, gradient through the
        // transposes of D (= −D) and of the upsampling
        let x = spectral::upsample2(&pts.iter().map(|p| p.x).collect::<Vec<_>>());
        let y = spectral::upsample2(&pts.iter().map(|p| p.y).collect::<Vec<_>>());
        let tp = 2.0 * PI;
        let (x1, y1) = (spectral::derivative(&x, tp, 1), spectral::derivative(&y, tp, 1));
        let dt = tp / x.len() as f64;
        let mut perimeter = 0.0;
        let (mut ax, mut ay) = (Vec::with_capacity(2 * n), Vec::with_capacity(2 * n));
        for i in 0..2 * n {
            let nv = Vec2::new(y1[i], -x1[i]);
            perimeter += self.a.value(nv) * dt;
            let g = self.a.gradient(nv);
            ax.push(g.x);
            ay.push(g.y);
        }
        let gx = spectral::upsample2_adjoint(&spectral::derivative(&ay, tp, 1));
        let gy = spectral::upsample2_adjoint(&spectral::derivative(&ax, tp, 1));
        let mut grad: Vec<f64> = (0..n).map(|i| e.normals()[i].dot(&Vec2::new(gx[i], -gy[i])) * dt).collect();

        let xi = self.xi(psi);
        let v = hminus::inverse_laplacian(e, &xi);
        let d2 = self.w * xi.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        let k = e.curvature();
        for i in 0..n {
            grad[i] += self.w / self.h * v[i] * (1.0 + k[i] * psi[i]);
        }
        let bulk = match &self.bulk {
            BulkTerm::None => 0.0,
            BulkTerm::Analytic { omega_integral, q } => {
                let (inner, g) = q.green_integral(&pts);
                for i in 0..n {
                    grad[i] -= e.normals()[i].dot(&g[i]);
                }
                omega_integral - inner
            }
            BulkTerm::Frozen { e0, q, xi0 } => {
                for i in 0..n {
                    grad[i] -= self.w * q[i] * (1.0 + k[i] * psi[i]);
                }
                e0 - self.w * (0..n).map(|i| q[i] * (xi[i] - xi0[i])).sum::<f64>()
            }
        };
        Some(Evaluation { value: perimeter + bulk + d2 / (2.0 * self.h), grad })
    }

    /// Gradient with respect to the free heights φ (constraint eliminated)
    /// and the multiplier Σg/Σγ.
    fn reduced(&self, psi: &[f64], g: &[f64]) -> (Vec<f64>, f64) {
        let gamma: Vec<f64> = psi.iter().zip(self.e.curvature()).map(|(p, k)| self.w * (1.0 + k * p)).collect();
        let l = g.iter().sum::<f64>() / gamma.iter().sum::<f64>();
        (g.iter().zip(&gamma).map(|(g, c)| g - l * c).collect(), l)
    }

    /// Fourier-diagonal approximation of the inverse Hessian.
    fn precondition(&self, g: &[f64], gbar: f64) -> Vec<f64> {
        let (w, h) = (self.w, self.h);
        let nyq = {
            let k = (g.len() / 2) as f64 * 2.0 * PI / self.e.length();
            1.0 / (w * (gbar * k * k + 1.0 / (h * k * k)))
        };
        spectral::apply_multiplier(
            g,
            self.e.length(),
            |k| if k == 0.0 { 0.0.into() } else { (1.0 / (w * (gbar * k * k + 1.0 / (h * k * k)))).into() },
            Some(nyq),
        )
    }
}

fn bulk_term(e: &ClosedCurve, cfg: &StepConfig, psi: &[f64]) -> Result<BulkTerm> {
    Ok(match &cfg.bulk {
        BulkEnergyModel::None => BulkTerm::None,
        BulkEnergyModel::Analytic { q, omega } => {
            BulkTerm::Analytic { omega_integral: omega.integrate(q), q: q.clone() }
        }
        BulkEnergyModel::Fem(m) => {
            let hf = HeightField::new(e.clone(), psi.to_vec())?;
            let lifted = hf.lift_detailed().map_err(step_failure)?;
            cfg.bulk.check_contains(&lifted.curve)?;
            let sol = cfg.cache.solve(m, &lifted.curve)?;
            let q = sol.trace_at(&lifted.node_arclength, lifted.curve.length());
            let xi0 = psi.iter().zip(e.curvature()).map(|(p, k)| p + 0.5 * k * p * p).collect();
            BulkTerm::Frozen { e0: sol.energy, q, xi0 }
        }
    })
}

fn step_failure(e: Error) -> Error {
    match e {
        Error::StepFailure(_) | Error::Mesh(_) | Error::Solver(_) => e,
        other => Error::StepFailure(format!("graph lift failed: {other}")),
    }
}

fn mean_gbar(e: &ClosedCurve, a: &Anisotropy) -> f64 {
    e.normals().iter().map(|nu| a.mobility(*nu)).fold(0.0, f64::max)
}

/// Minimizes the incremental functional from ψ = 0 with a quasi-Newton
/// method over mean-zero-ξ graphs.
pub fn minimize_step(e: &ClosedCurve, cfg: &StepConfig) -> Result<StepResult> {
    cfg.validate_for(e)?;
    let n = e.n();
    let w = e.ds();
    let gbar = mean_gbar(e, &cfg.anisotropy);
    let outer = if matches!(cfg.bulk, BulkEnergyModel::Fem(_)) { cfg.max_outer.max(1) } else { 1 };
    let mut psi = vec![0.0; n];
    let mut iterations = 0;
    let mut box_active = false;
    for pass in 0..outer {
        let obj = Objective { e, a: &cfg.anisotropy, h: cfg.h, beta: cfg.beta, bulk: bulk_term(e, cfg, &psi)?, w };
        let mut hit_box = false;
        let out = optim::minimize(
            psi.clone(),
            |phi| {
                let psi = obj.constrained(phi)?;
                match obj.eval(&psi) {
                    Some(ev) => Some((ev.value, obj.reduced(&psi, &ev.grad).0)),
                    None => {
                        hit_box |= sup(&psi) > cfg.beta;
                        None
                    }
                }
            },
            |g| obj.precondition(g, gbar),
            |g| sup(g) / w,
            LbfgsConfig { tol: cfg.tol, max_iter: cfg.max_iter, ..Default::default() },
        )
        .ok_or_else(|| Error::StepFailure("objective undefined at ψ = 0".into()))?;
        iterations += out.iterations;
        box_active |= hit_box;
        let new_psi = obj.constrained(&out.x).expect("accepted iterate is feasible");
        // stalling against |ψ| ≤ β is saturation, reported through box_active
        if !out.converged && !hit_box {
            return Err(Error::NonConvergence { iterations, gradient: out.grad_norm, best: new_psi });
        }
        let change = new_psi.iter().zip(&psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        psi = new_psi;
        if !out.converged || (pass > 0 && change < cfg.outer_tol) {
            break;
        }
    }
    finish(e, cfg, psi, iterations, box_active)
}

/// Spectral fixed-point iteration on the combined Euler–Lagrange equation
/// (ψ + κψ²/2)/h = ∂²_s(−g∂²_sψ + κ^φ_E + R − Q) + L, the variable
/// coefficient split as ḡ implicit and (ḡ − g) explicit.
pub fn el_fixed_point_step(e: &ClosedCurve, cfg: &StepConfig) -> Result<StepResult> {
    cfg.validate_for(e)?;
    let n = e.n();
    let len = e.length();
    let a = &cfg.anisotropy;
    let g: Vec<f64> = e.normals().iter().map(|nu| a.mobility(*nu)).collect();
    let gbar = g.iter().fold(0.0, |m: f64, v| m.max(*v));
    let kpe = e.aniso_curvature(a);
    let k = e.curvature();
    let obj = Objective { e, a, h: cfg.h, beta: cfg.beta, bulk: BulkTerm::None, w: e.ds() };
    let mut psi = vec![0.0; n];
    let mut last_change = f64::INFINITY;
    let mut growth = 0;
    let kn = (n / 2) as f64 * 2.0 * PI / len;
    for it in 1..=cfg.max_iter {
        let hf = HeightField::new(e.clone(), psi.clone())?;
        let ce = hf.curvature_expansion(a).map_err(step_failure)?;
        let q = if cfg.bulk.is_none() {
            vec![0.0; n]
        } else {
            let lifted = hf.lift_detailed().map_err(step_failure)?;
            bulk_trace(&lifted, &hf.lifted_nodes(), cfg)?
        };
        let d2psi = spectral::derivative(&psi, len, 2);
        let inner: Vec<f64> =
            (0..n).map(|i| kpe[i] + ce.remainder[i] - q[i] + (gbar - g[i]) * d2psi[i]).collect();
        let mut rhs = spectral::derivative(&inner, len, 2);
        for i in 0..n {
            rhs[i] -= 0.5 * k[i] * psi[i] * psi[i] / cfg.h;
        }
        let osc = spectral::apply_multiplier(
            &rhs,
            len,
            |kk| if kk == 0.0 { 0.0.into() } else { (1.0 / (1.0 / cfg.h + gbar * kk.powi(4))).into() },
            Some(1.0 / (1.0 / cfg.h + gbar * kn.powi(4))),
        );
        let next = obj
            .constrained(&osc)
            .ok_or_else(|| Error::BackendFailure("fixed-point iterate lost the area constraint".into()))?;
        if sup(&next) >= cfg.beta {
            return Err(Error::BackendFailure("fixed-point iterate left the β tube".into()));
        }
        let change = next.iter().zip(&psi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        psi = next;
        if change < cfg.tol {
            return finish(e, cfg, psi, it, false);
        }
        if change > 10.0 * last_change {
            growth += 1;
            if growth >= 2 {
                return Err(Error::BackendFailure(format!(
                    "fixed-point iteration diverges (update {change:.3e})"
                )));
            }
        } else {
            growth = 0;
        }
        last_change = change;
    }
    Err(Error::NonConvergence { iterations: cfg.max_iter, gradient: last_change, best: psi })
}

/// Runs the configured backend.
pub fn step(e: &ClosedCurve, cfg: &StepConfig) -> Result<StepResult> {
    match cfg.backend {
        Backend::Minimize => minimize_step(e, cfg),
        Backend::ElFixedPoint => el_fixed_point_step(e, cfg),
    }
}

/// Offsets `f` along its normals so that its area equals `target`.
fn correct_area(f: ClosedCurve, target: f64) -> Result<ClosedCurve> {
    let mut f = f;
    for _ in 0..3 {
        let gap = f.area() - target;
        if gap.abs() <= 1e-14 * target.abs() {
            break;
        }
        // |F + cν| = |F| + cL + πc²
        let (l, a) = (f.length(), PI);
        let c = -2.0 * gap / (l + (l * l - 4.0 * a * gap).max(0.0).sqrt());
        let pts: Vec<Vec2> = f.nodes().iter().zip(f.normals()).map(|(x, nu)| x + nu * c).collect();
        f = ClosedCurve::from_points(&pts, f.n())?;
    }
    Ok(f)
}

fn finish(e: &ClosedCurve, cfg: &StepConfig, psi: Vec<f64>, iterations: usize, box_active: bool) -> Result<StepResult> {
    let hf = HeightField::new(e.clone(), psi)?;
    let f = correct_area(hf.lift().map_err(step_failure)?, e.area()).map_err(step_failure)?;
    let xi = hminus::xi_graph(&hf).xi;
    let (dist, _) = hminus::dist_projected(e, &xi)?;
    let (residual, l) = el_residual_parts(e, &hf, cfg)?;
    let elastic = bulk_energy(&f, cfg)?;
    let elastic_max_gradient = match &cfg.bulk {
        BulkEnergyModel::Fem(m) => cfg.cache.solve(m, &f)?.max_gradient,
        _ => 0.0,
    };
    let energies = Energies {
        perimeter: f.aniso_perimeter(&cfg.anisotropy),
        elastic,
        dissipation: dist.d * dist.d / (2.0 * cfg.h),
    };
    let margin = hf.sup_norm() / cfg.beta;
    let iteration_quantity = iteration_quantity(&hf, &xi, cfg);
    Ok(StepResult {
        f,
        d: dist.d,
        lagrange_l: l,
        el_residual_norm: residual,
        energies,
        constraint_margin: margin,
        box_active: box_active || margin >= 1.0 - 1e-9,
        iteration_quantity,
        iterations,
        elastic_max_gradient,
        psi: hf,
    })
}

/// ∫ξ² + (h/2)∫ g(ν_E)|∂²_sψ|² over E.
fn iteration_quantity(hf: &HeightField, xi: &[f64], cfg: &StepConfig) -> f64 {
    let e = hf.reference();
    let d2 = spectral::derivative(hf.values(), e.length(), 2);
    let dens: Vec<f64> = (0..e.n())
        .map(|i| xi[i] * xi[i] + 0.5 * cfg.h * cfg.anisotropy.mobility(e.normals()[i]) * d2[i] * d2[i])
        .collect();
    e.integrate(&dens)
}

/// Deviation of κ^φ_F − Q + (d/h) f∘π from its ∂F-average (returned second,
/// the multiplier L), in L²(∂F), evaluated at the lifted nodes.
fn el_residual_parts(e: &ClosedCurve, hf: &HeightField, cfg: &StepConfig) -> Result<(f64, f64)> {
    let ce = hf.curvature_expansion(&cfg.anisotropy)?;
    let q = if cfg.bulk.is_none() {
        vec![0.0; e.n()]
    } else {
        let lifted = hf.lift_detailed().map_err(step_failure)?;
        bulk_trace(&lifted, &hf.lifted_nodes(), cfg)?
    };
    let xi = hminus::xi_graph(hf).xi;
    let v = hminus::inverse_laplacian(e, &xi);
    let jac = hf.graph_frame()?.jacobian;
    let r: Vec<f64> = (0..e.n()).map(|i| ce.kappa_phi_f[i] - q[i] + v[i] / cfg.h).collect();
    let wsum: f64 = jac.iter().sum();
    let l = r.iter().zip(&jac).map(|(r, j)| r * j).sum::<f64>() / wsum;
    let res = (e.ds() * r.iter().zip(&jac).map(|(r, j)| (r - l) * (r - l) * j).sum::<f64>()).sqrt();
    Ok((res, l))
}

/// L²(∂F) norm of the Euler–Lagrange deviation of a completed step.
pub fn el_residual(e: &ClosedCurve, res: &StepResult, cfg: &StepConfig) -> Result<f64> {
    Ok(el_residual_parts(e, &res.psi, cfg)?.0)
}

/// Value and ψ-gradient of the discrete objective at `psi` (no constraint
/// elimination), for derivative checks.
pub fn objective(e: &ClosedCurve, cfg: &StepConfig, psi: &[f64]) -> Result<(f64, Vec<f64>)> {
    e.check_field(psi)?;
    let obj = Objective { e, a: &cfg.anisotropy, h: cfg.h, beta: cfg.beta, bulk: bulk_term(e, cfg, &vec![0.0; e.n()])?, w: e.ds() };
    let ev = obj.eval(psi).ok_or_else(|| Error::Domain("heights outside the β box".into()))?;
    Ok((ev.value, ev.grad))
}
