use super::*;
use crate::models::{dumbbell, AnalyticProfile};

fn cylinder(nodes: usize) -> FlowState {
    let a = AnalyticProfile::cylinder(5, 2, 1.0)
        .sample(0.0, 2.0, nodes, [EndCondition::Periodic; 2])
        .unwrap();
    FlowState::new(a)
}

fn sphere(nodes: usize) -> FlowState {
    let a = AnalyticProfile::sphere(5, 2, 1.0)
        .sample(0.0, std::f64::consts::PI, nodes, [EndCondition::Capped; 2])
        .unwrap();
    FlowState::new(a)
}

/// Largest relative deviation from `sqrt(1 - rate t)` until the radius
/// reaches one half; the radius is the farthest distance from the center.
fn radius_law_error(mut s: FlowState, rate: f64, radius: impl Fn(&FlowState) -> f64) -> f64 {
    let params = FlowParams::default();
    let mut worst = 0.0f64;
    loop {
        let (next, _) = step(&s, f64::INFINITY, &params).unwrap();
        s = next;
        let exact = (1.0 - rate * s.t).sqrt();
        if exact < 0.5 {
            return worst;
        }
        worst = worst.max((radius(&s) - exact).abs() / exact);
    }
}

#[test]
fn cylinder_follows_radius_law() {
    let err = radius_law_error(cylinder(256), 8.0, |s| s.geometry.radius[100]);
    assert!(err <= 1e-3, "{err}");
}

#[test]
fn sphere_follows_radius_law() {
    let err = radius_law_error(sphere(256), 10.0, |s| {
        let zc = 0.5 * (s.geometry.z_nodes[0] + s.geometry.z_nodes[s.geometry.len() - 1]);
        let k = s.geometry.len() / 2;
        (s.geometry.radius[k].powi(2) + (s.geometry.z_nodes[k] - zc).powi(2)).sqrt()
    });
    assert!(err <= 1e-3, "{err}");
}

#[test]
fn zero_step_is_identity() {
    let s = sphere(64);
    let (next, dt) = step(&s, 0.0, &FlowParams::default()).unwrap();
    assert_eq!(dt, 0.0);
    assert_eq!(next.geometry, s.geometry);
    assert_eq!(next.t, s.t);
}

#[test]
fn area_decreases_every_step() {
    let mut s = FlowState::new(dumbbell(5, 2, 0.5, 2.0, 20.0, 1e-3).unwrap());
    let params = FlowParams::default();
    let mut area = s.geometry.area();
    for _ in 0..50 {
        s = step(&s, f64::INFINITY, &params).unwrap().0;
        let next = s.geometry.area();
        assert!(next < area);
        area = next;
    }
}

#[test]
fn cylinder_evolution_residuals() {
    let s0 = cylinder(256);
    let (s1, _) = step(&s0, f64::INFINITY, &FlowParams::default()).unwrap();
    for r in evolution_residuals(&s0, &s1, &[0, 50, 128]) {
        let h4 = s1.curv[r.node].norm_h2.powi(2);
        assert!(r.h2.abs() <= 1e-3 * h4, "{r:?}");
        assert!(r.a2.abs() <= 1e-3 * h4, "{r:?}");
    }
    // closed form: |H|² = (n-1)² / (r₀² - 2(n-1)t)
    let exact = 16.0 / (1.0 - 8.0 * s1.t);
    assert!((s1.curv[10].norm_h2 - exact).abs() / exact < 1e-6);
}

#[test]
fn flat_plane_terms_vanish() {
    // a very wide cylinder approximates a flat plane
    let a = AnalyticProfile::cylinder(5, 1, 1e6)
        .sample(0.0, 2.0, 32, [EndCondition::Periodic; 2])
        .unwrap();
    let s0 = FlowState::new(a);
    let (s1, _) = step(&s0, 1e-3, &FlowParams::default()).unwrap();
    for r in evolution_residuals(&s0, &s1, &[3]) {
        assert!(r.h2_scale < 1e-9 && r.a2_scale < 1e-9);
    }
}

#[test]
fn dumbbell_neck_residual_is_small() {
    let s0 = FlowState::new(dumbbell(5, 2, 0.5, 2.0, 20.0, 1e-3).unwrap());
    let (s1, _) = step(&s0, f64::INFINITY, &FlowParams::default()).unwrap();
    let center = s0.geometry.len() / 2;
    for r in evolution_residuals(&s0, &s1, &[center]) {
        assert!(r.h2.abs() <= 0.05 * r.h2_scale, "{r:?}");
        assert!(r.a2.abs() <= 0.05 * r.a2_scale, "{r:?}");
    }
}

#[test]
fn dumbbell_reaches_threshold() {
    let s = FlowState::new(dumbbell(5, 2, 0.5, 2.0, 20.0, 1e-3).unwrap());
    let th = ThresholdSet {
        h1: 4.0,
        h2: 10.0,
        h3: 40.0,
        omega1: 4.0,
        omega2: 2.5,
        omega3: 4.0,
    };
    let out = run_until_threshold(s, &th, &FlowParams::default(), &mut |_, _| Ok(true)).unwrap();
    let ThresholdOutcome::Reached(s) = out else {
        panic!("stopped early")
    };
    let h = s.max_h();
    assert!((40.0..=40.0 * 1.02).contains(&h), "{h}");
    let neck = s.geometry.radius[s.argmax_h()];
    assert!((neck - 0.1).abs() < 0.01, "{neck}");
    // idempotent at the threshold
    let again =
        run_until_threshold(s.clone(), &th, &FlowParams::default(), &mut |_, _| Ok(true)).unwrap();
    let ThresholdOutcome::Reached(again) = again else {
        panic!()
    };
    assert_eq!(again.step_count, s.step_count);
}

#[test]
fn shrinking_sphere_blows_up_without_surgery() {
    let th = ThresholdSet {
        h1: 1e6,
        h2: 1e7,
        h3: 1e8,
        omega1: 1.0,
        omega2: 10.0,
        omega3: 10.0,
    };
    let params = FlowParams {
        dt_floor: 1e-9,
        ..Default::default()
    };
    let err = run_until_threshold(sphere(32), &th, &params, &mut |_, _| Ok(true)).err();
    assert!(matches!(err, Some(FlowError::BlowUp { .. })), "{err:?}");
}

#[test]
fn regrid_keeps_the_curve() {
    let s = FlowState::new(dumbbell(5, 2, 0.5, 2.0, 20.0, 0.0).unwrap());
    let params = FlowParams {
        regrid_resolution: 0.02,
        ..Default::default()
    };
    let b = regrid(&s.geometry, &s.curv, &params).unwrap();
    assert_eq!(b.len(), s.geometry.len());
    assert_eq!(b.point(0), s.geometry.point(0));
    // new nodes lie on the old profile: compare with the closed curve r²(z)
    let before = FlowState::new(b);
    for k in [50, 200, 256, 300] {
        let r = before.geometry.radius[k];
        let z = before.geometry.z_nodes[k];
        let j = s.geometry.z_nodes.partition_point(|&x| x < z);
        let t =
            (z - s.geometry.z_nodes[j - 1]) / (s.geometry.z_nodes[j] - s.geometry.z_nodes[j - 1]);
        let lin = s.geometry.radius[j - 1] * (1.0 - t) + s.geometry.radius[j] * t;
        assert!((r - lin).abs() < 1e-4, "{k}: {r} {lin}");
    }
    // more nodes where the curvature is larger
    let neck = s.geometry.len() / 2;
    let spacing = |a: &SymmetricAnsatz| a.z_nodes[neck + 1] - a.z_nodes[neck];
    assert!(spacing(&before.geometry) < 0.8 * spacing(&s.geometry));
}

#[test]
fn thresholds_validate() {
    assert!(ThresholdSet::from_omegas(1.0, 10.0, 2.5, 4.0).is_ok());
    let t = ThresholdSet::from_omegas(2.0, 10.0, 2.5, 4.0).unwrap();
    assert_eq!((t.h1, t.h2, t.h3), (5.0, 12.5, 50.0));
    assert!(ThresholdSet::from_omegas(1.0, 10.0, 0.5, 4.0).is_err());
    assert!(ThresholdSet::from_omegas(1.0, -1.0, 2.0, 4.0).is_err());
}

#[test]
fn surgery_record_contract() {
    let th = ThresholdSet {
        h1: 10.0,
        h2: 25.0,
        h3: 100.0,
        omega1: 10.0,
        omega2: 2.5,
        omega3: 4.0,
    };
    let gap = SurgeryTimeRecord::min_spacing(5, 25.0);
    let rec = SurgeryTimeRecord {
        times: vec![
            SurgeryTime {
                t: 0.1,
                pre_max_h: 100.5,
                post_max_h: 20.0,
                discarded: vec![1],
            },
            SurgeryTime {
                t: 0.1 + 2.0 * gap,
                pre_max_h: 101.0,
                post_max_h: 24.0,
                discarded: vec![],
            },
        ],
    };
    assert!(rec.check(5, &th, 0.02).is_empty());
    let mut bad = rec.clone();
    bad.times[1].t = 0.1 + 0.5 * gap;
    bad.times[1].post_max_h = 30.0;
    assert_eq!(bad.check(5, &th, 0.02).len(), 2);
}

#[test]
fn metrics_csv_has_header_and_rows() {
    let s = cylinder(32);
    let k = PinchingConstants::new(5);
    let mut w = MetricsWriter::new(Vec::new()).unwrap();
    w.push(&s.metrics(0.0, &k)).unwrap();
    let text = String::from_utf8(w.into_inner()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], StepMetrics::HEADER);
    assert_eq!(lines[1].split(',').count(), 7);
    let m = s.metrics(0.0, &k);
    assert!((m.max_h - 4.0).abs() < 1e-9);
    assert!((m.min_q + 4.0 / 15.0).abs() < 1e-9);
}
