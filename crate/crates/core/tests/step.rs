use flatflow2d::elasticity::{BulkEnergyModel, DirichletData, Domain, FemModel, HookeTensor, Polynomial};
use flatflow2d::step::*;
use flatflow2d::{Anisotropy, ClosedCurve, Error, Mat2, Vec2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ellipse() -> ClosedCurve {
    ClosedCurve::ellipse(1.2, 1.0 / 1.2, 256).unwrap()
}

fn kappa_phi_l2(e: &ClosedCurve, a: &Anisotropy) -> f64 {
    let k = e.aniso_curvature(a);
    e.integrate(&k.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt()
}

fn analytic_x() -> BulkEnergyModel {
    BulkEnergyModel::Analytic {
        q: Polynomial::new(vec![(1, 0, 1.0)]),
        omega: Domain::Disk { center: Vec2::zeros(), radius: 3.0 },
    }
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let e = ClosedCurve::ellipse(1.3, 0.8, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let anis = [
        Anisotropy::Euclidean,
        Anisotropy::elliptic(Mat2::new(1.5, 0.2, 0.2, 1.0)).unwrap(),
        Anisotropy::fourier(vec![(0.02, 3)]).unwrap(),
    ];
    for (m, a) in anis.iter().enumerate() {
        let cfg = StepConfig::new(1e-2, 0.2, a.clone()).with_bulk(if m == 0 { analytic_x() } else { BulkEnergyModel::None });
        let psi: Vec<f64> = (0..64).map(|i| 0.03 * (2.0 * i as f64 * 0.098).sin() + 0.01 * (i as f64 * 0.3).cos()).collect();
        let (_, g) = objective(&e, &cfg, &psi).unwrap();
        for _ in 0..20 {
            let dir: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t = 1e-6;
            let shift = |s: f64| psi.iter().zip(&dir).map(|(p, d)| p + s * t * d).collect::<Vec<_>>();
            let fd = (objective(&e, &cfg, &shift(1.0)).unwrap().0 - objective(&e, &cfg, &shift(-1.0)).unwrap().0) / (2.0 * t);
            let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            assert!((fd - an).abs() < 1e-5 * an.abs().max(1e-3), "{fd} {an}");
        }
    }
}

#[test]
fn circle_and_wulff_are_stationary() {
    let e = ClosedCurve::circle(1.0, 256).unwrap();
    for backend in [Backend::Minimize, Backend::ElFixedPoint] {
        let cfg = StepConfig::new(1e-3, 0.1, Anisotropy::Euclidean).with_backend(backend);
        let r = step(&e, &cfg).unwrap();
        assert!(r.psi.sup_norm() < 1e-7);
        assert!(r.el_residual_norm < 1e-7);
        assert!((r.lagrange_l - 1.0).abs() < 1e-7);
    }
    for a in [Anisotropy::elliptic(Mat2::new(1.5, 0.2, 0.2, 1.0)).unwrap(), Anisotropy::fourier(vec![(0.02, 4)]).unwrap()] {
        let w = a.wulff_boundary(256).unwrap();
        let r = minimize_step(&w, &StepConfig::new(1e-3, 0.05, a.clone())).unwrap();
        assert!(r.psi.sup_norm() < 1e-7, "{}", r.psi.sup_norm());
        assert!(r.el_residual_norm < 1e-6, "{}", r.el_residual_norm);
    }
}

#[test]
fn ellipse_step_dissipates_and_backends_agree() {
    let e = ellipse();
    for a in [Anisotropy::Euclidean, Anisotropy::elliptic(Mat2::new(1.5, 0.2, 0.2, 1.0)).unwrap()] {
        let cfg = StepConfig::new(1e-3, 0.1, a.clone());
        let g0 = free_energy(&e, &cfg).unwrap();
        let r = minimize_step(&e, &cfg).unwrap();
        assert!(r.energies.total() <= g0 + 1e-10 * g0);
        assert!(r.energies.dissipation > 0.0);
        assert!(((r.f.area() - e.area()) / e.area()).abs() < 1e-8);
        assert!(r.constraint_margin <= 0.5 && !r.box_active);
        assert!(r.el_residual_norm < 1e-4 * kappa_phi_l2(&e, &a));
        let residual = el_residual(&e, &r, &cfg).unwrap();
        assert_eq!(residual, r.el_residual_norm);
        let f = el_fixed_point_step(&e, &cfg.clone().with_backend(Backend::ElFixedPoint)).unwrap();
        let gap = f.psi.values().iter().zip(r.psi.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-5, "{gap}");
        // ∫ξ = 0 after the constraint projection
        let xi = flatflow2d::hminus::xi_graph(&r.psi);
        assert!(xi.integral().abs() < 1e-14);
    }
}

#[test]
fn residual_tracks_optimizer_tolerance() {
    let e = ellipse();
    let mut last = f64::INFINITY;
    for tol in [1e-3, 1e-5, 1e-7, 1e-9] {
        let mut cfg = StepConfig::new(1e-3, 0.1, Anisotropy::Euclidean);
        cfg.tol = tol;
        let r = minimize_step(&e, &cfg).unwrap();
        assert!(r.el_residual_norm <= tol * e.length().sqrt() * 1.01, "{tol} {}", r.el_residual_norm);
        assert!(r.el_residual_norm <= last);
        last = r.el_residual_norm;
    }
}

#[test]
fn analytic_bulk_moves_the_curve() {
    let e = ClosedCurve::circle(1.0, 128).unwrap();
    for backend in [Backend::Minimize, Backend::ElFixedPoint] {
        let cfg = StepConfig::new(1e-3, 0.1, Anisotropy::Euclidean).with_bulk(analytic_x()).with_backend(backend);
        let g0 = free_energy(&e, &cfg).unwrap();
        let r = step(&e, &cfg).unwrap();
        assert!(r.psi.sup_norm() > 1e-5);
        assert!(r.el_residual_norm < 1e-6, "{}", r.el_residual_norm);
        assert!(r.energies.total() <= g0 + 1e-10 * g0.abs());
        // the void drifts towards larger q = x, lowering ∫_{Ω∖F} q
        assert!(r.f.centroid().x > 0.0);
    }
}

#[test]
fn fem_bulk_step() {
    let e = ClosedCurve::ellipse(0.8, 0.5, 128).unwrap();
    let bulk = BulkEnergyModel::Fem(FemModel {
        tensor: HookeTensor::isotropic(1.0, 1.0).unwrap(),
        omega: Domain::Disk { center: Vec2::zeros(), radius: 3.0 },
        w0: DirichletData::Affine { matrix: Mat2::new(0.05, 0.0, 0.0, 0.0), shift: Vec2::zeros() },
        mesh_size: 0.08,
    });
    let cfg = StepConfig::new(2e-3, 0.1, Anisotropy::Euclidean).with_bulk(bulk);
    let g0 = free_energy(&e, &cfg).unwrap();
    let r = minimize_step(&e, &cfg).unwrap();
    assert!(r.energies.elastic > 0.0 && r.elastic_max_gradient > 0.0);
    assert!(r.energies.total() <= g0 + 1e-8 * g0);
    assert!(((r.f.area() - e.area()) / e.area()).abs() < 1e-8);
}

#[test]
fn invalid_configurations_are_rejected() {
    let e = ellipse();
    assert!(matches!(minimize_step(&e, &StepConfig::new(1e-3, 0.5, Anisotropy::Euclidean)), Err(Error::Validation(_))));
    assert!(matches!(minimize_step(&e, &StepConfig::new(-1.0, 0.1, Anisotropy::Euclidean)), Err(Error::Validation(_))));
    assert!(matches!(minimize_step(&e, &StepConfig::new(1e-3, 0.0, Anisotropy::Euclidean)), Err(Error::Validation(_))));
}

#[test]
fn binding_box_is_reported() {
    // a long step from an elongated ellipse wants to move further than β
    let e = ClosedCurve::ellipse(1.5, 1.0 / 1.5, 128).unwrap();
    let cfg = StepConfig::new(0.05, 0.02, Anisotropy::Euclidean);
    let r = minimize_step(&e, &cfg).unwrap();
    assert!(r.box_active && r.constraint_margin > 0.5 && r.constraint_margin <= 1.0 + 1e-9);
}
