use super::*;
use crate::geometry::fundamental_forms;
use crate::taylor::Taylor;

fn generic_profile() -> AnalyticProfile {
    AnalyticProfile::new(5, 2, |u| {
        vec![
            (u.sin() * 0.3) + 1.0,
            u + u.cos() * 0.1,
            (u * 2.0).sin() * 0.2,
        ]
    })
}

#[test]
fn sampled_cylinder_values() {
    let r0 = 1.5;
    let a = AnalyticProfile::cylinder(5, 2, r0)
        .sample(0.0, 4.0, 41, [EndCondition::Periodic; 2])
        .unwrap();
    let ff = ansatz_forms(&a, 1.05).unwrap();
    assert!((ff.norm_h() - 4.0 / r0).abs() < 1e-12);
    assert!((ff.norm_a2 - 4.0 / (r0 * r0)).abs() < 1e-12);
    assert!(ff.weingarten_minus_norm.unwrap() < 1e-12);
    assert!(ff.grad_a_norm.unwrap() < 1e-12);
}

#[test]
fn hemisphere_ratio_is_one_over_n() {
    let sph = AnalyticProfile::sphere(5, 1, 2.0);
    for &u in &[0.3, 0.9, 1.5707963, 2.2] {
        let ff = sph.forms(u, &Default::default()).unwrap();
        assert!((ff.ratio().unwrap() - 0.2).abs() < 1e-12);
        assert!((ff.norm_h() - 2.5).abs() < 1e-12);
    }
    // sampled graph r = sqrt(R² - z²) on the upper half
    let a = sph
        .sample(0.0, std::f64::consts::PI, 201, [EndCondition::Capped; 2])
        .unwrap();
    for k in [0, 3, 50, 100, 170, 200] {
        let ff = ansatz_forms_at(&a, k, &Default::default()).unwrap();
        assert!(
            (ff.ratio().unwrap() - 0.2).abs() < 1e-6,
            "node {k}: {:?}",
            ff.ratio()
        );
    }
}

#[test]
fn pole_forms_of_sphere() {
    let sph = AnalyticProfile::sphere(5, 2, 1.0);
    let jet = sph.jet(0.0, true);
    let opts = crate::geometry::FormOptions {
        hessian: true,
        ..Default::default()
    };
    let ff = forms_from_profile(5, &jet, &opts).unwrap();
    assert!((ff.norm_h() - 5.0).abs() < 1e-12);
    assert!((ff.norm_a2 - 5.0).abs() < 1e-12);
    assert!(ff.grad_a_norm.unwrap() < 1e-12);
    assert!(ff.hess_a_norm.unwrap() < 1e-10);
}

#[test]
fn deflected_cylinder_has_small_w_minus() {
    let delta = 1e-3;
    let prof = deflected_cylinder(5, 2, 1.0, delta);
    for &u in &[0.2, 1.0, 2.5] {
        let ff = prof.forms(u, &Default::default()).unwrap();
        let wm = ff.weingarten_minus_norm.unwrap();
        assert!(wm > 0.0 && wm <= 2.0 * delta, "{wm}");
        let patch = ansatz_chart(&prof, u, 1e-2, 5);
        let fc = fundamental_forms(&patch, &patch.center_node()).unwrap();
        assert!((fc.weingarten_minus_norm.unwrap() - wm).abs() < 1e-6);
    }
}

#[test]
fn chart_and_ansatz_backends_agree() {
    let profiles = [
        AnalyticProfile::cylinder(5, 2, 0.8),
        AnalyticProfile::sphere(5, 2, 1.3),
        deflected_cylinder(5, 3, 1.0, 0.1),
        generic_profile(),
    ];
    for prof in &profiles {
        let u = 0.7;
        let exact = prof.forms(u, &Default::default()).unwrap();
        let patch = ansatz_chart(prof, u, 1e-2, 7);
        let fd = fundamental_forms(&patch, &patch.center_node()).unwrap();
        assert!((exact.norm_h() - fd.norm_h()).abs() < 1e-6, "{prof:?}");
        assert!((exact.norm_a2 - fd.norm_a2).abs() < 1e-6);
        assert!((exact.mean_curv.clone() - &fd.mean_curv).norm() < 1e-6);
        assert!(
            (exact.weingarten_minus_norm.unwrap() - fd.weingarten_minus_norm.unwrap()).abs() < 1e-6
        );
        assert!((exact.grad_a_norm.unwrap() - fd.grad_a_norm.unwrap()).abs() < 1e-5);
        assert!((exact.grad_h_norm.unwrap() - fd.grad_h_norm.unwrap()).abs() < 1e-5);
    }
}

#[test]
fn closed_form_reduction_matches_jets() {
    let prof = generic_profile();
    for &u in &[0.1, 0.8, 2.0, 4.0] {
        let jet = prof.jet(u, false);
        let pc = profile_curvature(&jet, 5);
        let ff = prof.forms(u, &Default::default()).unwrap();
        assert!((pc.norm_h2 - ff.norm_h2).abs() < 1e-12 * (1.0 + ff.norm_h2));
        assert!((pc.norm_a2 - ff.norm_a2).abs() < 1e-12 * (1.0 + ff.norm_a2));
        let lifted = lift(5, &pc.h);
        for (a, b) in lifted.iter().zip(ff.mean_curv.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let (ga, gh) = profile_gradient_norms(&jet, 5);
        assert!(
            (ga - ff.grad_a_norm.unwrap()).abs() < 1e-10,
            "{ga} {:?}",
            ff.grad_a_norm
        );
        assert!((gh - ff.grad_h_norm.unwrap()).abs() < 1e-10);
    }
}

#[test]
fn codazzi_form_of_mu_derivative() {
    // ∇⊥_s μ = (ρ_s / ρ)(κ - μ) for the ansatz
    let prof = generic_profile();
    let u = 1.1;
    let jet = prof.jet(u, false);
    let pc = profile_curvature(&jet, 5);
    let h = 1e-5;
    let mu = |x: f64| profile_curvature(&prof.jet(x, false), 5).mu;
    let (mp, mm) = (mu(u + h), mu(u - h));
    let dmu: Vec<f64> = mp
        .iter()
        .zip(&mm)
        .map(|(a, b)| (a - b) / (2.0 * h * pc.speed))
        .collect();
    let dt = dmu.iter().zip(&pc.tangent).map(|(a, b)| a * b).sum::<f64>();
    let q: Vec<f64> = dmu
        .iter()
        .zip(&pc.tangent)
        .map(|(a, t)| a - dt * t)
        .collect();
    let rho_s = jet.p[1][0] / pc.speed;
    for c in 0..3 {
        let expect = rho_s / jet.p[0][0] * (pc.kappa[c] - pc.mu[c]);
        assert!((q[c] - expect).abs() < 1e-7, "{c}: {} {expect}", q[c]);
    }
}

#[test]
fn profile_differences_converge_at_fourth_order() {
    let prof = generic_profile();
    let u = 1.3;
    let exact = prof.forms(u, &Default::default()).unwrap().norm_h();
    let mut errs = Vec::new();
    for &h in &[0.1, 0.05] {
        let count = 21;
        let u0 = u - 10.0 * h;
        let a = prof
            .sample(u0, u0 + 20.0 * h, count, [EndCondition::Open; 2])
            .unwrap();
        let ff = ansatz_forms_at(&a, 10, &Default::default()).unwrap();
        errs.push((ff.norm_h() - exact).abs());
    }
    let order = (errs[0] / errs[1]).log2();
    assert!(order >= 3.5, "observed order {order} from {errs:?}");
}

#[test]
fn degenerate_radius_is_reported() {
    let prof = AnalyticProfile::new(5, 1, |u| vec![u * 0.0 + 1e-14, u]);
    assert!(matches!(
        prof.forms(0.0, &Default::default()),
        Err(ModelError::DegenerateProfile { .. })
    ));
}

#[test]
fn sphere_area_matches_closed_form() {
    let r = 1.7;
    let a = AnalyticProfile::sphere(5, 1, r)
        .sample(0.0, std::f64::consts::PI, 2001, [EndCondition::Capped; 2])
        .unwrap();
    let exact = sphere_area(5) * r.powi(5);
    assert!((a.area() - exact).abs() / exact < 1e-5);
    assert!((sphere_area(1) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
    assert!((sphere_area(4) - 8.0 * std::f64::consts::PI.powi(2) / 3.0).abs() < 1e-12);
}

#[test]
fn dumbbell_center_is_nearly_cylindrical() {
    let d = dumbbell(5, 2, 0.5, 2.0, 20.0, 0.0).unwrap();
    let k = d.len() / 2;
    let ff = ansatz_forms_at(&d, k, &Default::default()).unwrap();
    let ratio = ff.ratio().unwrap();
    assert!((ratio - 0.25).abs() <= 0.05, "{ratio}");
    for k in 0..d.len() {
        let ff = ansatz_forms_at(&d, k, &Default::default()).unwrap();
        assert!(ff.weingarten_minus_norm.unwrap() < 1e-12);
    }
}

#[test]
fn dumbbell_deflection_is_genuine_codimension() {
    let d = dumbbell(5, 2, 0.5, 2.0, 20.0, 1e-3).unwrap();
    let ff = ansatz_forms_at(&d, d.len() / 2, &Default::default()).unwrap();
    assert!(ff.weingarten_minus_norm.unwrap() > 0.0);
}

#[test]
fn periodic_ghosts_wrap() {
    let a = AnalyticProfile::cylinder(3, 1, 1.0)
        .sample(0.0, 2.0, 11, [EndCondition::Periodic; 2])
        .unwrap();
    let g = a.ext(-2);
    assert!((g[1] - (-0.4)).abs() < 1e-14);
    let g = a.ext(12);
    assert!((g[1] - 2.4).abs() < 1e-14);
}

#[test]
fn taylor_jet_of_sphere_is_exact() {
    let s = AnalyticProfile::sphere(3, 1, 2.0).series(0.4);
    assert!((s[0].derivative(3) - (-2.0 * 0.4f64.cos())).abs() < 1e-14);
    let _ = Taylor::constant(0.0);
}
