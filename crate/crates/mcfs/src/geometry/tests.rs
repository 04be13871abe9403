use super::chart::fundamental_forms_along;
use super::*;
use crate::taylor::Taylor;
use proptest::prelude::*;

fn sphere_s2_r4(x: &[f64]) -> Vec<f64> {
    let (t, p) = (x[0], x[1]);
    vec![t.cos() * p.cos(), t.cos() * p.sin(), t.sin(), 0.0]
}

/// Round `S^{n-1}` of radius `r` times a line, sitting in `R^{n+m}`.
fn cylinder(n: usize, m: usize, r: f64) -> impl Fn(&[f64]) -> Vec<f64> {
    move |x: &[f64]| {
        let y = &x[1..];
        let s: f64 = y.iter().map(|v| v * v).sum();
        let mut p = vec![0.0; n + m];
        for (k, v) in y.iter().enumerate() {
            p[k] = r * v;
        }
        p[n - 1] = r * (1.0 - s).sqrt();
        p[n] = x[0];
        p
    }
}

fn round_sphere(n: usize, m: usize, r: f64) -> impl Fn(&[f64]) -> Vec<f64> {
    move |x: &[f64]| {
        let s: f64 = x.iter().map(|v| v * v).sum();
        let mut p = vec![0.0; n + m];
        for (k, v) in x.iter().enumerate() {
            p[k] = r * v;
        }
        p[n] = r * (1.0 - s).sqrt();
        p
    }
}

fn patch(
    n: usize,
    m: usize,
    h: f64,
    grid: usize,
    center: &[f64],
    f: impl Fn(&[f64]) -> Vec<f64>,
) -> ChartPatch {
    ChartPatch::sample(n, m, &vec![grid; n], &vec![h; n], center, f).unwrap()
}

#[test]
fn unit_two_sphere_in_r4() {
    let p = patch(2, 2, 1e-2, 7, &[0.3, 0.2], sphere_s2_r4);
    let ff = fundamental_forms(&p, &p.center_node()).unwrap();
    assert!((ff.norm_h() - 2.0).abs() < 1e-7);
    assert!((ff.norm_a2 - 2.0).abs() < 1e-7);
    assert!(ff.weingarten_minus_norm.unwrap() < 1e-6);
}

#[test]
fn cylinder_n5_in_r7() {
    let r0 = 1.7;
    let p = patch(5, 2, 1e-2, 5, &[0.0; 5], cylinder(5, 2, r0));
    let ff = fundamental_forms(&p, &p.center_node()).unwrap();
    assert!((ff.norm_h() - 4.0 / r0).abs() < 1e-6);
    assert!((ff.ratio().unwrap() - 0.25).abs() < 1e-7);
    let ev = ff.weingarten_nu_eigenvalues().unwrap();
    assert!(ev[0].abs() < 1e-6);
    for e in &ev[1..] {
        assert!((e - 1.0 / r0).abs() < 1e-6);
    }
}

#[test]
fn flat_patch() {
    let p = patch(3, 1, 1e-2, 7, &[0.1, 0.2, 0.3], |x| {
        vec![x[0], x[1], x[2], 0.0]
    });
    let ff = fundamental_forms(&p, &p.center_node()).unwrap();
    assert!(ff.norm_h() < 1e-10);
    assert!(ff.norm_a2 < 1e-18);
    assert!(ff.principal_normal.is_none());
    assert!((ff.metric.clone() - nalgebra::DMatrix::identity(3, 3)).norm() < 1e-12);
}

#[test]
fn rank_deficient_and_degenerate() {
    let p = patch(2, 1, 1e-2, 5, &[0.0, 0.0], |x| vec![x[0], x[0], 0.0]);
    assert!(matches!(
        fundamental_forms(&p, &[2, 2]),
        Err(GeometryError::RankDeficient(1, 2))
    ));
    let p = patch(2, 1, 1e-2, 5, &[0.0, 0.0], |x| {
        vec![1e-8 * x[0], 1e-8 * x[1], 0.0]
    });
    assert!(matches!(
        fundamental_forms(&p, &[2, 2]),
        Err(GeometryError::DegenerateMetric(_))
    ));
}

#[test]
fn parallel_second_form_on_models() {
    let cyl = patch(5, 2, 1e-2, 7, &[0.0; 5], cylinder(5, 2, 1.0));
    let (ga, gh, _) = derivative_norms(&cyl, &cyl.center_node()).unwrap();
    assert!(ga < 1e-8 && gh < 1e-8, "cylinder {ga} {gh}");
    let sph = patch(3, 2, 1e-2, 7, &[0.0, 0.0, 0.0], round_sphere(3, 2, 1.0));
    let (ga, gh, hess) = derivative_norms(&sph, &sph.center_node()).unwrap();
    assert!(ga < 1e-8 && gh < 1e-8, "sphere {ga} {gh}");
    assert!(hess < 1e-5, "sphere hessian {hess}");
}

#[test]
fn kato_vanishes_on_models() {
    let cyl = patch(5, 2, 1e-2, 7, &[0.0; 5], cylinder(5, 2, 1.0));
    let ff = fundamental_forms(&cyl, &cyl.center_node()).unwrap();
    assert!(kato_check(&ff).unwrap().abs() < 1e-8);
    let sph = patch(4, 1, 1e-2, 7, &[0.0; 4], round_sphere(4, 1, 2.0));
    let ff = fundamental_forms(&sph, &sph.center_node()).unwrap();
    assert!(kato_check(&ff).unwrap().abs() < 1e-8);
}

/// Planar curve derivatives `(κ_s, κ_ss)` for the graph of `ε sin x`.
fn graph_curvature_derivs(eps: f64, x0: f64) -> (f64, f64) {
    let x = Taylor::variable(x0);
    let f = x.sin() * eps;
    let fp = f.differentiate();
    let fpp = fp.differentiate();
    let w = (fp * fp + 1.0).sqrt();
    let kappa = fpp / (w * w * w);
    let ks = kappa.differentiate() / w;
    let kss = ks.differentiate() / w;
    (ks.value(), kss.value())
}

#[test]
fn graph_patch_gradient_matches_curve_oracle() {
    let eps = 1e-2;
    let x0 = 0.4;
    let f = move |x: &[f64]| vec![x[0], x[1], x[2], eps * x[0].sin(), 0.0];
    let coarse = patch(3, 2, 1e-2, 7, &[x0, 0.0, 0.0], f);
    let fine = patch(3, 2, 5e-3, 7, &[x0, 0.0, 0.0], f);
    let (ga, gh, hess) = derivative_norms(&coarse, &coarse.center_node()).unwrap();
    let (ga_f, _, _) = derivative_norms(&fine, &fine.center_node()).unwrap();
    assert!((ga - ga_f).abs() <= 0.1 * ga_f, "Richardson {ga} {ga_f}");
    let (ks, kss) = graph_curvature_derivs(eps, x0);
    assert!(
        (ga - ks.abs()).abs() < 1e-7 * (1.0 + ks.abs()),
        "{ga} vs {ks}"
    );
    assert!((gh - ks.abs()).abs() < 1e-7 * (1.0 + ks.abs()));
    assert!((hess - kss.abs()).abs() < 1e-5, "{hess} vs {kss}");
}

#[test]
fn torsion_vanishes_in_a_subspace() {
    let p = patch(3, 2, 1e-2, 7, &[0.1, 0.0, -0.1], round_sphere(3, 2, 1.0));
    let ff = fundamental_forms(&p, &p.center_node()).unwrap();
    assert!(ff.torsion.unwrap().norm() < 1e-6);
}

#[test]
fn torsion_of_twisted_tube() {
    // a generic surface in R^4, the normal plane turns as s moves
    let p = patch(2, 2, 1e-2, 7, &[0.3, 0.2], |x| {
        let (s, t) = (x[0], x[1]);
        vec![s.cos() + 0.2 * t * t, s.sin(), t, 0.3 * s * s]
    });
    let ff = fundamental_forms(&p, &p.center_node()).unwrap();
    let t = ff.torsion.unwrap();
    assert!(t.antisymmetry_defect() == 0.0);
    assert!(t.norm() > 1e-3);
}

#[test]
fn frame_is_carried_continuously() {
    let p = patch(2, 3, 2e-2, 9, &[0.0, 0.0], |x| {
        vec![
            x[0],
            x[1],
            0.5 * x[0] * x[0],
            0.3 * x[0] * x[1],
            0.1 * x[1] * x[1],
        ]
    });
    let nodes: Vec<Vec<usize>> = (2..7).map(|i| vec![i, 4]).collect();
    let forms = fundamental_forms_along(&p, &nodes, &FormOptions::default());
    for w in forms.windows(2) {
        let (a, b) = (w[0].as_ref().unwrap(), w[1].as_ref().unwrap());
        for k in 0..3 {
            assert!(a.frame.vectors[k].dot(&b.frame.vectors[k]) > 0.99);
        }
    }
}

fn quadratic_patch(coef: &[f64], n: usize, m: usize) -> ChartPatch {
    let c = coef.to_vec();
    patch(n, m, 1e-2, 7, &vec![0.0; n], move |x| {
        let mut p = vec![0.0; n + m];
        p[..n].copy_from_slice(x);
        let mut k = 0;
        for a in 0..m {
            for i in 0..n {
                for j in i..n {
                    p[n + a] += c[k % c.len()] * x[i] * x[j];
                    k += 1;
                }
                p[n + a] += 0.2 * c[(k + i) % c.len()] * x[i].powi(3);
            }
        }
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pointwise_identities(coef in proptest::collection::vec(-1.0f64..1.0, 12), m in 1usize..4) {
        let p = quadratic_patch(&coef, 3, m);
        let ff = fundamental_forms(&p, &p.center_node()).unwrap();
        // trace identity
        let mut tr = nalgebra::DVector::zeros(3 + m);
        for i in 0..3 {
            for j in 0..3 {
                tr += ff.h(i, j) * ff.metric_inv[(i, j)];
            }
        }
        prop_assert!((tr - &ff.mean_curv).norm() <= 1e-12 * (1.0 + ff.norm_h()));
        if let Some(res) = ff.split_residual() {
            prop_assert!(res.abs() <= 1e-12 * (1.0 + ff.norm_a2));
        }
        for (a, u) in ff.frame.vectors.iter().enumerate() {
            for (b, v) in ff.frame.vectors.iter().enumerate() {
                let e = if a == b { 1.0 } else { 0.0 };
                prop_assert!((u.dot(v) - e).abs() < 1e-10);
            }
            for t in &ff.tangent {
                prop_assert!(u.dot(t).abs() < 1e-10 * t.norm());
            }
        }
        if let Some(t) = &ff.torsion {
            prop_assert!(t.antisymmetry_defect() == 0.0);
        }
        prop_assert!(ff.metric.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn kato_on_perturbed_cylinders(seed in proptest::collection::vec(-1.0f64..1.0, 6)) {
        let s = seed.clone();
        let base = cylinder(5, 2, 1.0);
        let p = patch(5, 2, 2e-2, 7, &[0.0; 5], move |x| {
            let mut q = base(x);
            let bump = 1e-3 * (s[0] * (2.0 * x[0]).sin() + s[1] * x[1] * x[0] + s[2] * x[2].powi(2));
            q[5] += 1e-3 * s[3] * (x[0] + x[3]).cos();
            q[6] += 1e-3 * (s[4] * x[0].sin() + s[5] * x[4] * x[1]);
            for v in q.iter_mut().take(5) {
                *v *= 1.0 + bump;
            }
            q
        });
        let ff = fundamental_forms(&p, &p.center_node()).unwrap();
        prop_assert!(kato_check(&ff).unwrap() >= -1e-9);
    }
}
