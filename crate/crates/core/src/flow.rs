//! Discrete flat flow driver, sharp-interface reference solver and
//! trajectory diagnostics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::anisotropy::Anisotropy;
use crate::curve::{extract_graph, hausdorff, ClosedCurve, HeightField};
use crate::elasticity::{self, BulkEnergyModel};
use crate::error::{Error, Result};
use crate::spectral;
use crate::step::{self, StepConfig, StepResult};

/// Why a trajectory stopped before its horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltKind {
    GraphBreakdown,
    ConstraintSaturation,
    StepFailure,
    NonConvergence,
    Instability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halt {
    pub kind: HaltKind,
    /// Index of the step that could not be completed.
    pub step: usize,
    pub reason: String,
}

impl Halt {
    fn from_error(step: usize, e: Error) -> Self {
        let kind = match e {
            Error::GraphBreakdown(_) | Error::OutOfTube { .. } | Error::Domain(_) => HaltKind::GraphBreakdown,
            Error::NonConvergence { .. } => HaltKind::NonConvergence,
            _ => HaltKind::StepFailure,
        };
        Halt { kind, step, reason: e.to_string() }
    }
}

/// One diagnostics record (one JSONL line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub k: usize,
    pub t: f64,
    pub d: f64,
    pub d_over_h: f64,
    #[serde(rename = "P_phi")]
    pub p_phi: f64,
    #[serde(rename = "E_elastic")]
    pub e_elastic: f64,
    /// P_φ + 𝓔 + d²/(2h) of the step (P_φ + 𝓔 for the initial record).
    #[serde(rename = "F_total")]
    pub f_total: f64,
    pub area: f64,
    pub length: f64,
    pub psi_linf: f64,
    pub psi_l2: f64,
    pub margin: f64,
    pub iter_quantity: f64,
    pub kappa_phi_h2: f64,
    pub kappa_phi_d3_l2: f64,
    pub ubc_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub halt: Option<Halt>,
}

impl Diagnostics {
    /// P_φ + 𝓔 of the curve at this record.
    pub fn free_energy(&self) -> f64 {
        self.p_phi + self.e_elastic
    }
}

/// A (possibly strided) trajectory.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    /// Time step (h for flat flow, dt for the reference).
    pub step: f64,
    /// Snapshot times and curves.
    pub times: Vec<f64>,
    pub curves: Vec<ClosedCurve>,
    /// One record per step, starting with k = 0.
    pub diagnostics: Vec<Diagnostics>,
    pub halt: Option<Halt>,
    /// First time the curve left the β tube around the initial curve.
    pub tube_exit_time: Option<f64>,
}

impl FlowTrajectory {
    pub fn completed(&self) -> bool {
        self.halt.is_none()
    }

    pub fn last_curve(&self) -> &ClosedCurve {
        self.curves.last().expect("trajectory has an initial snapshot")
    }

    /// Snapshot closest in time to `t`.
    pub fn at_time(&self, t: f64) -> (f64, &ClosedCurve) {
        let i = (0..self.times.len())
            .min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs()))
            .expect("non-empty trajectory");
        (self.times[i], &self.curves[i])
    }
}

/// (Σ_{j≤k} ‖∂^j_s f‖²_{L²})^{1/2} on `e`.
pub fn sobolev_norms(e: &ClosedCurve, f: &[f64], k: u32) -> Result<f64> {
    if k > 4 {
        return Err(Error::Domain(format!("Sobolev order {k} exceeds 4")));
    }
    e.check_field(f)?;
    let mut s = 0.0;
    for j in 0..=k {
        let d = spectral::derivative(f, e.length(), j);
        s += e.integrate(&d.iter().map(|v| v * v).collect::<Vec<_>>());
    }
    Ok(s.sqrt())
}

/// max|κ − κ̄|/κ̄ with κ̄ the mean curvature.
pub fn circularity_error(e: &ClosedCurve) -> f64 {
    let mean = 2.0 * PI / e.length();
    e.curvature().iter().map(|k| (k - mean).abs()).fold(0.0, f64::max) / mean
}

/// Fourier coefficient of cos(kθ) in the polar radius r(θ) about `center`
/// (star-shaped curves): (1/π)∮ r cos(kθ) dθ with dθ = (x dy − y dx)/r²,
/// integrated spectrally in arclength.
pub fn polar_mode_amplitude(e: &ClosedCurve, center: crate::Vec2, k: u32) -> f64 {
    let (l, nodes) = (e.length(), e.nodes());
    let x: Vec<f64> = nodes.iter().map(|p| p.x - center.x).collect();
    let y: Vec<f64> = nodes.iter().map(|p| p.y - center.y).collect();
    let (dx, dy) = (spectral::derivative(&x, l, 1), spectral::derivative(&y, l, 1));
    let f: Vec<f64> = (0..e.n())
        .map(|i| {
            let r2 = x[i] * x[i] + y[i] * y[i];
            (k as f64 * y[i].atan2(x[i])).cos() * (x[i] * dy[i] - y[i] * dx[i]) / r2.sqrt()
        })
        .collect();
    e.integrate(&f) / PI
}

fn curve_norms(e: &ClosedCurve, a: &Anisotropy) -> (f64, f64) {
    let kp = e.aniso_curvature(a);
    let h2 = sobolev_norms(e, &kp, 2).unwrap_or(f64::NAN);
    let d3 = spectral::derivative(&kp, e.length(), 3);
    let d3l2 = e.integrate(&d3.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
    (h2, d3l2)
}

fn initial_record(e: &ClosedCurve, a: &Anisotropy, elastic: f64) -> Diagnostics {
    let (h2, d3) = curve_norms(e, a);
    let p = e.aniso_perimeter(a);
    Diagnostics {
        k: 0,
        t: 0.0,
        d: 0.0,
        d_over_h: 0.0,
        p_phi: p,
        e_elastic: elastic,
        f_total: p + elastic,
        area: e.area(),
        length: e.length(),
        psi_linf: 0.0,
        psi_l2: 0.0,
        margin: 0.0,
        iter_quantity: 0.0,
        kappa_phi_h2: h2,
        kappa_phi_d3_l2: d3,
        ubc_radius: e.ubc_radius(),
        halt: None,
    }
}

fn step_record(k: usize, t: f64, h: f64, e: &ClosedCurve, r: &StepResult, a: &Anisotropy) -> Diagnostics {
    let (h2, d3) = curve_norms(&r.f, a);
    let psi = r.psi.values();
    Diagnostics {
        k,
        t,
        d: r.d,
        d_over_h: r.d / h,
        p_phi: r.energies.perimeter,
        e_elastic: r.energies.elastic,
        f_total: r.energies.total(),
        area: r.f.area(),
        length: r.f.length(),
        psi_linf: r.psi.sup_norm(),
        psi_l2: e.integrate(&psi.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt(),
        margin: r.constraint_margin,
        iter_quantity: r.iteration_quantity,
        kappa_phi_h2: h2,
        kappa_phi_d3_l2: d3,
        ubc_radius: r.f.ubc_radius(),
        halt: None,
    }
}

fn step_count(h: f64, t_final: f64) -> Result<usize> {
    if !(t_final >= 0.0) || !(h > 0.0) {
        return Err(Error::Validation("final time must be non-negative and the step positive".into()));
    }
    let k = (t_final / h).round();
    if k > 1e6 {
        return Err(Error::Validation(format!("T/h = {k} exceeds 10⁶")));
    }
    Ok(k as usize)
}

/// Iterates incremental steps, each a graph over the previous curve.
/// Halts (graph breakdown, constraint saturation, step failure) end the
/// trajectory early and are recorded in it.
pub fn run_flat_flow(e0: &ClosedCurve, cfg: &StepConfig, t_final: f64, stride: usize) -> Result<FlowTrajectory> {
    cfg.validate_for(e0)?;
    let steps = step_count(cfg.h, t_final)?;
    let stride = stride.max(1);
    let mut traj = FlowTrajectory {
        step: cfg.h,
        times: vec![0.0],
        curves: vec![e0.clone()],
        diagnostics: vec![initial_record(e0, &cfg.anisotropy, step::free_energy(e0, cfg)? - e0.aniso_perimeter(&cfg.anisotropy))],
        halt: None,
        tube_exit_time: None,
    };
    let mut e = e0.clone();
    for k in 1..=steps {
        let t = k as f64 * cfg.h;
        let result = cfg.validate_for(&e).and_then(|_| step::step(&e, cfg));
        let r = match result {
            Ok(r) => r,
            Err(err) => {
                let halt = Halt::from_error(k, err);
                if let Some(last) = traj.diagnostics.last_mut() {
                    last.halt = Some(halt.clone());
                }
                traj.halt = Some(halt);
                break;
            }
        };
        let mut rec = step_record(k, t, cfg.h, &e, &r, &cfg.anisotropy);
        if traj.tube_exit_time.is_none() {
            let inside = extract_graph(e0, &r.f).map(|g| g.sup_norm() <= cfg.beta).unwrap_or(false);
            if !inside {
                traj.tube_exit_time = Some(t);
            }
        }
        let saturated = r.box_active;
        e = r.f;
        if k % stride == 0 || k == steps || saturated {
            traj.times.push(t);
            traj.curves.push(e.clone());
        }
        if saturated {
            let halt = Halt {
                kind: HaltKind::ConstraintSaturation,
                step: k,
                reason: format!("‖ψ‖∞ reached β = {}", cfg.beta),
            };
            rec.halt = Some(halt.clone());
            traj.diagnostics.push(rec);
            traj.halt = Some(halt);
            break;
        }
        traj.diagnostics.push(rec);
    }
    Ok(traj)
}

/// Default reference step c·(L/n)²/max g with c = 0.5.
pub fn default_reference_dt(e: &ClosedCurve, a: &Anisotropy) -> f64 {
    let gmax = e.normals().iter().map(|nu| a.mobility(*nu)).fold(0.0, f64::max);
    0.5 * e.ds() * e.ds() / gmax
}

/// Semi-implicit spectral solver for V = ∂²_s(κ^φ − Q): each step solves
/// (1/dt + ḡk⁴)ψ̂ = [∂²_s(κ^φ − Q)]^ on the current curve with ḡ = max g,
/// moves the nodes by ψν, resamples and restores the initial area.
pub fn run_pde_reference(
    e0: &ClosedCurve,
    a: &Anisotropy,
    model: &BulkEnergyModel,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<FlowTrajectory> {
    let steps = step_count(dt, t_final)?;
    let stride = stride.max(1);
    let area0 = e0.area();
    let elastic0 = elasticity::energy(model, e0)?;
    let mut traj = FlowTrajectory {
        step: dt,
        times: vec![0.0],
        curves: vec![e0.clone()],
        diagnostics: vec![initial_record(e0, a, elastic0)],
        halt: None,
        tube_exit_time: None,
    };
    let mut e = e0.clone();
    for k in 1..=steps {
        let t = k as f64 * dt;
        match reference_step(&e, a, model, dt, area0) {
            Ok((next, psi)) => {
                let mut rec = initial_record(&next, a, 0.0);
                rec.k = k;
                rec.t = t;
                rec.e_elastic = if model.is_none() { 0.0 } else { elasticity::energy(model, &next).unwrap_or(f64::NAN) };
                rec.f_total = rec.p_phi + rec.e_elastic;
                rec.psi_linf = psi.iter().fold(0.0, |m, v| m.max(v.abs()));
                rec.psi_l2 = e.integrate(&psi.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
                rec.d_over_h = rec.psi_linf / dt;
                e = next;
                if k % stride == 0 || k == steps {
                    traj.times.push(t);
                    traj.curves.push(e.clone());
                }
                traj.diagnostics.push(rec);
            }
            Err(err) => {
                let mut halt = Halt::from_error(k, err);
                if halt.kind != HaltKind::GraphBreakdown {
                    halt.kind = HaltKind::Instability;
                }
                traj.halt = Some(halt);
                break;
            }
        }
    }
    Ok(traj)
}

fn reference_step(
    e: &ClosedCurve,
    a: &Anisotropy,
    model: &BulkEnergyModel,
    dt: f64,
    area0: f64,
) -> Result<(ClosedCurve, Vec<f64>)> {
    let len = e.length();
    let n = e.n();
    let gbar = e.normals().iter().map(|nu| a.mobility(*nu)).fold(0.0, f64::max);
    let q = elasticity::boundary_q(model, e)?;
    let mu: Vec<f64> = e.aniso_curvature(a).iter().zip(&q).map(|(k, q)| k - q).collect();
    let rhs = spectral::derivative(&mu, len, 2);
    let kn = (n / 2) as f64 * 2.0 * PI / len;
    let psi = spectral::apply_multiplier(
        &rhs,
        len,
        |k| (1.0 / (1.0 / dt + gbar * k.powi(4))).into(),
        Some(1.0 / (1.0 / dt + gbar * kn.powi(4))),
    );
    let sup = psi.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if !sup.is_finite() || sup > 0.25 * e.sigma() {
        return Err(Error::StepFailure(format!("normal displacement {sup:.3e} per step exceeds the stable range")));
    }
    let hf = HeightField::new(e.clone(), psi.clone())?;
    let mut next = hf.lift()?;
    for _ in 0..3 {
        let gap = next.area() - area0;
        if gap.abs() <= 1e-14 * area0 {
            break;
        }
        let l = next.length();
        let c = -2.0 * gap / (l + (l * l - 4.0 * PI * gap).max(0.0).sqrt());
        let pts: Vec<_> = next.nodes().iter().zip(next.normals()).map(|(x, nu)| x + nu * c).collect();
        next = ClosedCurve::from_points(&pts, n)?;
    }
    Ok((next, psi))
}

/// One matched pair of snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub t_a: f64,
    pub t_b: f64,
    pub hausdorff: f64,
    /// ‖ψ_a − ψ_b‖_{L²} when both are graphs over the first curve of `a`.
    pub l2_height: Option<f64>,
}

/// Matches each snapshot of `a` with the nearest-in-time snapshot of `b`.
pub fn compare(a: &FlowTrajectory, b: &FlowTrajectory) -> Vec<ComparisonRow> {
    let base = &a.curves[0];
    a.times
        .iter()
        .zip(&a.curves)
        .map(|(&t, ca)| {
            let (tb, cb) = b.at_time(t);
            let l2_height = match (extract_graph(base, ca), extract_graph(base, cb)) {
                (Ok(ga), Ok(gb)) => {
                    let d: Vec<f64> = ga.values().iter().zip(gb.values()).map(|(x, y)| (x - y) * (x - y)).collect();
                    Some(base.integrate(&d).sqrt())
                }
                _ => None,
            };
            ComparisonRow { t_a: t, t_b: tb, hausdorff: hausdorff(ca, cb), l2_height }
        })
        .collect()
}

/// Outcome of the empirical iteration inequality I_k ≤ (1 + Mh) I_{k−1}.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationCheck {
    pub m: f64,
    pub violations: Vec<usize>,
}

/// Calibrates M on steps 2..=`calibration` and checks every later step.
pub fn iteration_inequality(diags: &[Diagnostics], h: f64, calibration: usize) -> IterationCheck {
    let q: Vec<(usize, f64)> = diags.iter().filter(|d| d.k >= 1).map(|d| (d.k, d.iter_quantity)).collect();
    let ratio = |i: usize| (q[i].1 / q[i - 1].1 - 1.0) / h;
    let mut m: f64 = 0.0;
    for i in 1..q.len() {
        if q[i].0 <= calibration {
            m = m.max(ratio(i));
        }
    }
    let violations = (1..q.len())
        .filter(|&i| q[i].0 > calibration && q[i].1 > (1.0 + m * h) * q[i - 1].1 * (1.0 + 1e-12))
        .map(|i| q[i].0)
        .collect();
    IterationCheck { m, violations }
}

/// Records whose monitored bounds (d/h, ‖κ^φ‖_{H²}, h^{1/4}‖∂³κ^φ‖) exceed
/// twice their first-decile reference value; returns (k, quantity name).
pub fn bound_excursions(diags: &[Diagnostics], h: f64) -> Vec<(usize, &'static str)> {
    let steps: Vec<&Diagnostics> = diags.iter().filter(|d| d.k >= 1).collect();
    if steps.is_empty() {
        return Vec::new();
    }
    let decile = (steps.len() / 10).max(1);
    let quantities: [(&'static str, fn(&Diagnostics, f64) -> f64); 3] = [
        ("d_over_h", |d, _| d.d_over_h),
        ("kappa_phi_h2", |d, _| d.kappa_phi_h2),
        ("kappa_phi_d3_l2", |d, h| h.powf(0.25) * d.kappa_phi_d3_l2),
    ];
    let mut out = Vec::new();
    for (name, f) in quantities {
        let reference = steps[..decile].iter().map(|d| f(d, h)).fold(0.0, f64::max);
        for d in &steps[decile..] {
            if f(d, h) > 2.0 * reference {
                out.push((d.k, name));
            }
        }
    }
    out
}

/// Largest violation of Σ d²/(2h) ≤ 𝓖(E₀) − 𝓖(E_K) (positive means violated).
pub fn telescoped_dissipation_gap(diags: &[Diagnostics], h: f64) -> f64 {
    let (first, last) = match (diags.first(), diags.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return 0.0,
    };
    let sum: f64 = diags.iter().filter(|d| d.k >= 1).map(|d| d.d * d.d / (2.0 * h)).sum();
    sum - (first.free_energy() - last.free_energy())
}

/// Largest per-step increase of 𝓖 along the trajectory, relative to 𝓖.
pub fn max_energy_increase(diags: &[Diagnostics]) -> f64 {
    diags
        .windows(2)
        .map(|w| (w[1].free_energy() - w[0].free_energy()) / w[0].free_energy().abs().max(1e-300))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest cumulative relative area drift along the trajectory.
pub fn max_area_drift(diags: &[Diagnostics]) -> f64 {
    let a0 = diags.first().map(|d| d.area).unwrap_or(1.0);
    diags.iter().map(|d| ((d.area - a0) / a0).abs()).fold(0.0, f64::max)
}
