use flatflow2d::elasticity::*;
use flatflow2d::fields::VectorField;
use flatflow2d::{ClosedCurve, Mat2, Vec2};

fn disk(r: f64) -> Domain {
    Domain::Disk { center: Vec2::zeros(), radius: r }
}

fn lame_q(l: f64, m: f64, a: f64, b: f64, d: f64) -> f64 {
    let k = (l + m) * a * a / m;
    let alpha = d / (b + k / b);
    let beta = k * alpha;
    let (err, ett) = (alpha - beta / (a * a), alpha + beta / (a * a));
    0.5 * (2.0 * m * (err * err + ett * ett) + l * (err + ett).powi(2))
}

fn lame_model(h: f64) -> FemModel {
    FemModel {
        tensor: HookeTensor::isotropic(1.0, 1.0).unwrap(),
        omega: disk(2.0),
        w0: DirichletData::Radial { delta: 0.01, center: Vec2::zeros() },
        mesh_size: h,
    }
}

fn lame_error(h: f64) -> f64 {
    let f = ClosedCurve::circle(0.5, 128).unwrap();
    let q = lame_q(1.0, 1.0, 0.5, 2.0, 0.01);
    let s = solve_equilibrium(&lame_model(h), Some(&f)).unwrap();
    assert!(s.residual < 1e-8);
    s.boundary_q.iter().map(|v| (v - q).abs()).fold(0.0, f64::max) / q
}

#[test]
fn affine_data_is_reproduced() {
    let a = Mat2::new(0.02, 0.005, 0.005, -0.01);
    let c = HookeTensor::isotropic(1.0, 1.0).unwrap();
    for omega in [disk(2.0), Domain::Rectangle { min: Vec2::new(-1.0, -0.5), max: Vec2::new(1.5, 1.0) }] {
        let model = FemModel {
            tensor: c.clone(),
            omega: omega.clone(),
            w0: DirichletData::Affine { matrix: a, shift: Vec2::new(0.1, -0.2) },
            mesh_size: 0.1,
        };
        let s = solve_equilibrium(&model, None).unwrap();
        for (p, u) in s.mesh.vertices.iter().zip(&s.displacement) {
            assert!((u - (a * p + Vec2::new(0.1, -0.2))).norm() < 1e-12);
        }
        let exact = quadratic_form(&c, a) * s.mesh.area();
        assert!((s.energy - exact).abs() < 1e-10 * exact.max(1.0), "{} {}", s.energy, exact);
        // the polygonal disk differs from |Ω| by O(h²) only
        assert!((s.energy - quadratic_form(&c, a) * omega.area()).abs() < 1e-2 * exact);
    }
}

#[test]
fn affine_energy_with_void() {
    let a = Mat2::new(0.05, 0.0, 0.0, 0.0);
    let c = HookeTensor::isotropic(1.0, 1.0).unwrap();
    let f = ClosedCurve::circle(0.5, 128).unwrap();
    let model = FemModel { tensor: c.clone(), omega: disk(2.0), w0: DirichletData::Affine { matrix: a, shift: Vec2::zeros() }, mesh_size: 0.05 };
    let s = solve_equilibrium(&model, Some(&f)).unwrap();
    // a void relaxes the energy below the uniform-strain value
    assert!(s.energy < quadratic_form(&c, a) * s.mesh.area());
    assert!(s.energy > 0.0 && s.max_gradient < 1.0);
}

#[test]
fn rigid_motion_has_no_energy() {
    let f = ClosedCurve::ellipse(0.6, 0.4, 64).unwrap();
    let model = FemModel {
        tensor: HookeTensor::isotropic(2.0, 0.5).unwrap(),
        omega: disk(2.0),
        w0: DirichletData::Affine { matrix: Mat2::new(0.0, -0.03, 0.03, 0.0), shift: Vec2::new(0.2, 0.1) },
        mesh_size: 0.1,
    };
    let s = solve_equilibrium(&model, Some(&f)).unwrap();
    assert!(s.energy.abs() < 1e-10);
    assert!(s.boundary_q.iter().all(|q| q.abs() < 1e-10));
}

#[test]
fn lame_boundary_trace_converges() {
    let e2 = lame_error(0.02);
    let e1 = lame_error(0.01);
    assert!(e2 < 0.02, "{e2}");
    assert!(e2 / e1 >= 1.7, "{e2} {e1}");
}

#[test]
fn shape_derivative_radial_lame() {
    let f = ClosedCurve::circle(0.5, 128).unwrap();
    let x = VectorField::radial(Vec2::zeros(), 1.0, 1.5);
    let (a, n) = shape_derivative_check(&lame_model(0.02), &f, &x).unwrap();
    assert!((a - n).abs() < 5e-2 * n.abs(), "{a} {n}");
}

#[test]
fn shape_derivative_translation_affine() {
    let f = ClosedCurve::from_points(
        &ClosedCurve::ellipse(0.6, 0.35, 128).unwrap().nodes().iter().map(|p| p + Vec2::new(0.3, -0.2)).collect::<Vec<_>>(),
        128,
    )
    .unwrap();
    let model = FemModel {
        tensor: HookeTensor::isotropic(1.0, 1.0).unwrap(),
        omega: disk(2.0),
        w0: DirichletData::Affine { matrix: Mat2::new(0.05, 0.01, 0.01, -0.02), shift: Vec2::zeros() },
        mesh_size: 0.02,
    };
    let x = VectorField::localized_translation(Vec2::new(1.0, 0.5), Vec2::new(0.3, -0.2), 0.9, 1.4);
    let (a, n) = shape_derivative_check(&model, &f, &x).unwrap();
    assert!((a - n).abs() < 5e-2 * n.abs(), "{a} {n}");
    let (a0, n0) = shape_derivative_check(&model, &f, &VectorField::zero()).unwrap();
    assert!(a0 == 0.0 && n0 == 0.0);
}

#[test]
fn solutions_are_deterministic() {
    let f = ClosedCurve::ellipse(0.6, 0.4, 64).unwrap();
    let m = lame_model(0.05);
    let (a, b) = (solve_equilibrium(&m, Some(&f)).unwrap(), solve_equilibrium(&m, Some(&f)).unwrap());
    assert_eq!(a.energy.to_bits(), b.energy.to_bits());
    assert_eq!(a.boundary_q, b.boundary_q);
}

#[test]
fn nested_disks_monotone_up_to_boundary_term() {
    let m = lame_model(0.04);
    let (f, g) = (ClosedCurve::circle(0.5, 128).unwrap(), ClosedCurve::circle(0.55, 128).unwrap());
    let (sf, sg) = (solve_equilibrium(&m, Some(&f)).unwrap(), solve_equilibrium(&m, Some(&g)).unwrap());
    let c = sf.boundary_q.iter().chain(&sg.boundary_q).fold(0.0f64, |a, b| a.max(*b));
    assert!(sf.energy <= sg.energy + c * (g.area() - f.area()));
}

#[test]
fn clearance_is_enforced() {
    let f = ClosedCurve::circle(1.95, 128).unwrap();
    assert!(matches!(solve_equilibrium(&lame_model(0.05), Some(&f)), Err(flatflow2d::Error::Mesh(_))));
}
