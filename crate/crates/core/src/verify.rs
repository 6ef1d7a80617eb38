//! Property suite behind `flatflow2d verify`: the identities and oracles
//! the scheme rests on, each reported as a named pass/fail line.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::anisotropy::Anisotropy;
use crate::curve::{hausdorff, ClosedCurve, HeightField};
use crate::elasticity::{self, DirichletData, Domain, FemModel, HookeTensor};
use crate::error::Result;
use crate::fields::{DivergenceFreeField, VectorField};
use crate::flow::run_flat_flow;
use crate::hminus;
use crate::step::StepConfig;
use crate::{Mat2, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Property {
    pub name: &'static str,
    pub passed: bool,
    /// Worst measured error (or ratio) against `threshold`.
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Property {
    fn below(name: &'static str, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Property { name, passed: measured < threshold, measured, threshold, detail: detail.into() }
    }

    fn above(name: &'static str, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Property { name, passed: measured >= threshold, measured, threshold, detail: detail.into() }
    }

    fn failed(name: &'static str, err: crate::Error) -> Self {
        Property { name, passed: false, measured: f64::NAN, threshold: f64::NAN, detail: err.to_string() }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: measured {:.3e} vs {:.3e} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold,
            self.detail
        )
    }
}

/// The three built-in families with moderate parameters.
pub fn sample_anisotropies() -> Vec<(&'static str, Anisotropy)> {
    vec![
        ("euclidean", Anisotropy::Euclidean),
        ("elliptic", Anisotropy::elliptic(Mat2::new(1.5, 0.2, 0.2, 1.0)).expect("positive definite")),
        ("fourier", Anisotropy::fourier(vec![(0.02, 4), (0.01, 3)]).expect("convex")),
    ]
}

/// Star-shaped curve r(θ) = 1 + Σ_{k=2}^{5} (a_k cos kθ + b_k sin kθ) with
/// Σ|a_k|+|b_k| ≤ 0.2.
pub fn random_smooth_curve(rng: &mut ChaCha8Rng, n: usize) -> Result<ClosedCurve> {
    let coef: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(-0.025..0.025), rng.random_range(-0.025..0.025))).collect();
    ClosedCurve::polar(
        |t| 1.0 + coef.iter().enumerate().map(|(j, (a, b))| {
            let k = (j + 2) as f64;
            a * (k * t).cos() + b * (k * t).sin()
        }).sum::<f64>(),
        n,
    )
}

fn anisotropy_identities(rng: &mut ChaCha8Rng) -> Property {
    let mut worst: f64 = 0.0;
    for (_, a) in sample_anisotropies() {
        for _ in 0..64 {
            let t = rng.random_range(0.0..2.0 * PI);
            let s = rng.random_range(0.2..3.0);
            let nu = Vec2::new(t.cos(), t.sin());
            let v = nu * s;
            let (grad, hess) = (a.gradient(v), a.hessian(v));
            worst = worst
                .max((grad.dot(&v) - a.value(v)).abs())
                .max((hess * v).norm())
                .max((a.dual_norm(a.gradient(nu)) - 1.0).abs())
                .max((a.value(v) - s * a.value(nu)).abs());
        }
    }
    Property::below("anisotropy_identities", worst, 1e-10, "Euler, D²φ(v)v = 0, φ°(∇φ(ν)) = 1, homogeneity")
}

fn wulff_stationarity() -> Property {
    let mut worst: f64 = 0.0;
    for (_, a) in sample_anisotropies() {
        match a.wulff_boundary(512) {
            Ok(w) => {
                let k = w.aniso_curvature(&a);
                let m = k.iter().sum::<f64>() / k.len() as f64;
                let sd = (k.iter().map(|x| (x - m).powi(2)).sum::<f64>() / k.len() as f64).sqrt();
                worst = worst.max(sd);
            }
            Err(e) => return Property::failed("wulff_constant_curvature", e),
        }
    }
    Property::below("wulff_constant_curvature", worst, 1e-6, "std of κ^φ on the Wulff boundary, n = 512")
}

fn gauss_bonnet(rng: &mut ChaCha8Rng) -> Property {
    let curves = match (ClosedCurve::circle(1.0, 512), ClosedCurve::ellipse(2.0, 1.0, 512), random_smooth_curve(rng, 512)) {
        (Ok(a), Ok(b), Ok(c)) => [a, b, c],
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return Property::failed("gauss_bonnet", e),
    };
    let mut worst: f64 = 0.0;
    for (name, a) in sample_anisotropies() {
        let vals: Vec<f64> = curves.iter().map(|c| c.gauss_bonnet(&a)).collect();
        let spread = vals.iter().fold(0.0f64, |m, v| m.max((v - vals[0]).abs()));
        worst = worst.max(spread);
        if name == "euclidean" {
            worst = worst.max(1e3 * vals.iter().fold(0.0f64, |m, v| m.max((v - 2.0 * PI).abs())));
        }
    }
    Property::below("gauss_bonnet", worst, 1e-6, "spread across circle, ellipse, random curve (euclidean: 2π to 1e-9)")
}

fn hminus_modes() -> Property {
    let e = match ClosedCurve::circle(1.0, 256) {
        Ok(e) => e,
        Err(err) => return Property::failed("hminus_cosine_modes", err),
    };
    let mut worst: f64 = 0.0;
    for k in 1..=16u32 {
        let xi: Vec<f64> = (0..256).map(|i| (k as f64 * e.arclength(i)).cos()).collect();
        match hminus::dist(&e, &xi) {
            Ok(d) => worst = worst.max((d.d - PI.sqrt() / k as f64).abs()),
            Err(err) => return Property::failed("hminus_cosine_modes", err),
        }
    }
    Property::below("hminus_cosine_modes", worst, 1e-10, "d(cos kθ) = √π/k on the unit circle, k ≤ 16")
}

fn hminus_first_variation(rng: &mut ChaCha8Rng) -> Property {
    let name = "hminus_first_variation";
    let run = |rng: &mut ChaCha8Rng| -> Result<f64> {
        let e = ClosedCurve::circle(1.0, 128)?;
        let psi: Vec<f64> = (0..128).map(|i| {
            let t = e.arclength(i);
            0.05 * (2.0 * t).cos() + 0.02 * (3.0 * t).sin()
        }).collect();
        let f = HeightField::new(e.clone(), psi)?.lift()?;
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let terms = vec![
                (2, 1, rng.random_range(-1.0..1.0)),
                (1, 2, rng.random_range(-1.0..1.0)),
                (3, 0, rng.random_range(-1.0..1.0)),
                (1, 1, rng.random_range(-1.0..1.0)),
            ];
            let (a, n) = hminus::first_variation_check(&e, &f, &DivergenceFreeField::from_stream(terms))?;
            worst = worst.max((a - n).abs() / a.abs().max(1e-12));
        }
        Ok(worst)
    };
    match run(rng) {
        Ok(w) => Property::below(name, w, 1e-3, "relative gap to central differences, 10 random fields"),
        Err(e) => Property::failed(name, e),
    }
}

fn expansion_decay(rng: &mut ChaCha8Rng) -> Property {
    let name = "curvature_expansion_quadratic_decay";
    let run = |rng: &mut ChaCha8Rng| -> Result<f64> {
        let bases = [ClosedCurve::circle(1.0, 256)?, ClosedCurve::ellipse(1.4, 0.8, 256)?, random_smooth_curve(rng, 256)?];
        let mut worst = f64::INFINITY;
        for e in &bases {
            for (_, a) in sample_anisotropies() {
                for _ in 0..5 {
                    let k = rng.random_range(2..8) as f64;
                    let ph = rng.random_range(0.0..2.0 * PI);
                    let l = e.length();
                    let psi: Vec<f64> = (0..e.n()).map(|i| 0.01 * (2.0 * PI * k * e.arclength(i) / l + ph).cos()).collect();
                    let sup = |p: &[f64]| -> Result<f64> {
                        let r = HeightField::new(e.clone(), p.to_vec())?.curvature_expansion(&a)?.remainder_quadratic();
                        Ok(r.iter().fold(0.0f64, |m, v| m.max(v.abs())))
                    };
                    let half: Vec<f64> = psi.iter().map(|v| v / 2.0).collect();
                    worst = worst.min(sup(&psi)? / sup(&half)?);
                }
            }
        }
        Ok(worst)
    };
    match run(rng) {
        Ok(w) => Property::above(name, w, 3.5, "min halving ratio of the quadratic remainder"),
        Err(e) => Property::failed(name, e),
    }
}

fn pushforward(rng: &mut ChaCha8Rng) -> Property {
    let name = "tangential_gradient_pushforward";
    let run = |rng: &mut ChaCha8Rng| -> Result<f64> {
        let e = random_smooth_curve(rng, 256)?;
        let psi: Vec<f64> = (0..256).map(|i| 0.03 * (3.0 * 2.0 * PI * e.arclength(i) / e.length()).sin()).collect();
        let hf = HeightField::new(e, psi)?;
        let f = hf.lift()?;
        let g: Vec<f64> = f.nodes().iter().map(|p| (2.0 * p.x).sin() + p.y * p.y).collect();
        let (l, r) = hf.pushforward_gradient_check(&g)?;
        Ok((l - r).abs() / l)
    };
    match run(rng) {
        Ok(w) => Property::below(name, w, 1e-8, "∫_F|∂g|² against its pull-back to E"),
        Err(e) => Property::failed(name, e),
    }
}

fn disk(r: f64) -> Domain {
    Domain::Disk { center: Vec2::zeros(), radius: r }
}

fn elastic_affine() -> Property {
    let name = "elasticity_affine_exact";
    let run = || -> Result<f64> {
        let a = Mat2::new(0.02, 0.005, 0.005, -0.01);
        let c = HookeTensor::isotropic(1.0, 1.0)?;
        let model = FemModel {
            tensor: c.clone(),
            omega: disk(2.0),
            w0: DirichletData::Affine { matrix: a, shift: Vec2::zeros() },
            mesh_size: 0.1,
        };
        let s = elasticity::solve_equilibrium(&model, None)?;
        Ok((s.energy - elasticity::quadratic_form(&c, a) * s.mesh.area()).abs())
    };
    match run() {
        Ok(w) => Property::below(name, w, 1e-10, "P1 reproduces affine data"),
        Err(e) => Property::failed(name, e),
    }
}

fn lame_model(h: f64) -> Result<FemModel> {
    Ok(FemModel {
        tensor: HookeTensor::isotropic(1.0, 1.0)?,
        omega: disk(2.0),
        w0: DirichletData::Radial { delta: 0.01, center: Vec2::zeros() },
        mesh_size: h,
    })
}

/// Boundary Q of the thick cylinder a = 0.5 < r < b = 2 with radial
/// displacement δ on the outer wall and a traction-free void.
pub fn lame_q(lambda: f64, mu: f64, a: f64, b: f64, delta: f64) -> f64 {
    let k = (lambda + mu) * a * a / mu;
    let alpha = delta / (b + k / b);
    let beta = k * alpha;
    let (err, ett) = (alpha - beta / (a * a), alpha + beta / (a * a));
    0.5 * (2.0 * mu * (err * err + ett * ett) + lambda * (err + ett).powi(2))
}

fn lame_error(h: f64) -> Result<f64> {
    let f = ClosedCurve::circle(0.5, 128)?;
    let q = lame_q(1.0, 1.0, 0.5, 2.0, 0.01);
    let s = elasticity::solve_equilibrium(&lame_model(h)?, Some(&f))?;
    Ok(s.boundary_q.iter().map(|v| (v - q).abs()).fold(0.0, f64::max) / q)
}

fn elastic_lame() -> Vec<Property> {
    match (lame_error(0.02), lame_error(0.01)) {
        (Ok(c), Ok(f)) => vec![
            Property::below("elasticity_lame_trace", c, 0.02, "relative boundary-Q error at mesh size 0.02"),
            Property::above("elasticity_lame_refinement", c / f, 1.7, "error ratio 0.02 → 0.01"),
        ],
        (Err(e), _) | (_, Err(e)) => vec![Property::failed("elasticity_lame_trace", e)],
    }
}

fn shape_derivative() -> Property {
    let name = "elasticity_shape_derivative";
    let run = || -> Result<f64> {
        let f = ClosedCurve::circle(0.5, 128)?;
        let (a, n) = elasticity::shape_derivative_check(&lame_model(0.02)?, &f, &VectorField::radial(Vec2::zeros(), 1.0, 1.5))?;
        Ok((a - n).abs() / n.abs())
    };
    match run() {
        Ok(w) => Property::below(name, w, 0.05, "radial field on the thick cylinder"),
        Err(e) => Property::failed(name, e),
    }
}

fn stationarity() -> Property {
    let name = "flat_flow_circle_stationary";
    let run = || -> Result<f64> {
        let e = ClosedCurve::circle(1.0, 128)?;
        let tr = run_flat_flow(&e, &StepConfig::new(1e-3, 0.1, Anisotropy::Euclidean), 0.02, 20)?;
        if let Some(h) = tr.halt {
            return Err(crate::Error::StepFailure(h.reason));
        }
        Ok(tr.curves.iter().map(|c| hausdorff(c, &e)).fold(0.0, f64::max))
    };
    match run() {
        Ok(w) => Property::below(name, w, 1e-6, "Hausdorff drift over 20 steps"),
        Err(e) => Property::failed(name, e),
    }
}

/// Runs every property with the given seed.
pub fn run_suite(seed: u64) -> Vec<Property> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![
        anisotropy_identities(&mut rng),
        wulff_stationarity(),
        gauss_bonnet(&mut rng),
        hminus_modes(),
        hminus_first_variation(&mut rng),
        expansion_decay(&mut rng),
        pushforward(&mut rng),
        elastic_affine(),
    ];
    out.extend(elastic_lame());
    out.push(shape_derivative());
    out.push(stationarity());
    out
}
