use super::*;
use crate::flow::{step, FlowParams, FlowState};
use crate::models::{deflected_cylinder, dumbbell, AnalyticProfile};
use proptest::prelude::*;

fn cylinder(r: f64, nodes: usize) -> SymmetricAnsatz {
    AnalyticProfile::cylinder(5, 2, r)
        .sample(0.0, 2.0, nodes, [EndCondition::Periodic; 2])
        .unwrap()
}

fn sphere(nodes: usize) -> SymmetricAnsatz {
    AnalyticProfile::sphere(5, 2, 1.0)
        .sample(0.0, PI, nodes, [EndCondition::Capped; 2])
        .unwrap()
}

fn all_nodes(a: &SymmetricAnsatz) -> Vec<usize> {
    (0..a.len()).filter(|&k| !a.is_pole(k)).collect()
}

#[test]
fn mean_radius_of_cylinder_and_deflection() {
    let a = cylinder(2.0, 33);
    for z in [0.0, 0.3, 1.0, 1.77, 2.0] {
        assert_eq!(mean_radius(&a, z), Some(2.0));
    }
    assert_eq!(mean_radius(&a, 2.5), None);
    let d = deflected_cylinder(5, 2, 1.5, 0.1)
        .sample(0.0, 6.0, 64, [EndCondition::Periodic; 2])
        .unwrap();
    for k in [3, 17, 40] {
        assert_eq!(mean_radius(&d, d.z_nodes[k]), Some(1.5));
    }
}

#[test]
fn quadrature_recovers_round_section() {
    for n in [3, 5] {
        let area = section_area(n, 12, &|w| {
            w.iter().map(|x| 2.0 * x).chain([7.0, 0.0]).collect()
        });
        assert!(
            (mean_radius_from_area(area, n) - 2.0).abs() < 1e-9,
            "{n}: {area}"
        );
    }
}

#[test]
fn ellipsoidal_section_is_rotation_invariant() {
    let n = 5;
    let axes = [1.0, 1.2, 0.9, 1.1, 1.05];
    let aligned = |w: &[f64]| -> Vec<f64> {
        let mut p: Vec<f64> = w.iter().zip(axes).map(|(x, a)| x * a).collect();
        p.extend([0.0, 0.0, 0.0]);
        p
    };
    // rotation mixing the section with the w direction and the sphere factor
    let q = nalgebra::DMatrix::<f64>::from_fn(8, 8, |i, j| {
        ((i * 3 + j * 5) % 7) as f64 - 3.0 + if i == j { 4.0 } else { 0.0 }
    });
    let q = q.qr().q();
    let rotated = |w: &[f64]| -> Vec<f64> {
        let p = nalgebra::DVector::from_vec(aligned(w));
        (&q * p).iter().copied().collect()
    };
    let r1 = mean_radius_from_area(section_area(n, 12, &aligned), n);
    let r2 = mean_radius_from_area(section_area(n, 12, &rotated), n);
    assert!((r1 - r2).abs() < 1e-6, "{r1} {r2}");
    let fine = mean_radius_from_area(section_area(n, 16, &aligned), n);
    assert!((r1 - fine).abs() < 1e-6, "{r1} {fine}");
}

#[test]
fn exact_cylinder_is_cylindrical() {
    let a = cylinder(1.0, 64);
    for k in 0..=2 {
        let s = neck_samples(&a, &all_nodes(&a)[..63], k).unwrap();
        let q = cylindricity_test(&a, &s, 1e-8, k).unwrap();
        assert!(q.epsilon <= 1e-8, "{k}: {}", q.epsilon);
        assert!((dotv(&q.axis, &q.axis).sqrt() - 1.0).abs() < 1e-12);
        assert!((q.axis[5] - 1.0).abs() < 1e-12);
        assert!(q.interval.0 < q.interval.1);
    }
}

#[test]
fn sphere_is_not_cylindrical() {
    let a = sphere(64);
    let s = neck_samples(&a, &all_nodes(&a), 2).unwrap();
    match cylindricity_test(&a, &s, 0.5, 2) {
        Err(NeckError::NotCylindrical { achieved, .. }) => assert!(achieved > 0.5),
        other => panic!("{other:?}"),
    }
}

#[test]
fn deflected_cylinder_epsilon_scales_with_delta() {
    let delta = 1e-3;
    let a = deflected_cylinder(5, 2, 1.0, delta)
        .sample(0.0, 2.0 * PI, 256, [EndCondition::Periodic; 2])
        .unwrap();
    let window = window_nodes(&a, 64, 0.5);
    for k in 0..=2 {
        let q = cylindricity_test(&a, &neck_samples(&a, &window, k).unwrap(), 1.0, k).unwrap();
        assert!(
            (0.5 * delta..=2.0 * delta).contains(&q.epsilon),
            "{k}: {}",
            q.epsilon
        );
    }
    let eh = hypersurface_test(&neck_samples(&a, &window, 0).unwrap());
    assert!((0.5 * delta..=2.0 * delta).contains(&eh), "{eh}");
}

#[test]
fn hypersurface_models_have_no_minus_part() {
    for a in [cylinder(1.0, 64), sphere(64)] {
        let s = neck_samples(&a, &all_nodes(&a), 0).unwrap();
        assert!(hypersurface_test(&s) <= 1e-10);
    }
}

fn shrinking_history(nodes: usize, steps: usize) -> FlowHistory {
    let mut s = FlowState::new(cylinder(1.0, nodes));
    let mut h = FlowHistory::new(f64::INFINITY);
    h.push(s.t, &s.geometry);
    for _ in 0..steps {
        s = step(&s, f64::INFINITY, &FlowParams::default()).unwrap().0;
        h.push(s.t, &s.geometry);
    }
    h
}

fn nbhd(node: usize) -> ParabolicNbhd {
    ParabolicNbhd {
        node,
        time: 0.0,
        radius: 0.2,
        lookback: 0.01,
        normalized: true,
    }
}

#[test]
fn shrinking_cylinder_is_detected() {
    let h = shrinking_history(128, 60);
    let th = DetectThresholds {
        h0: 4.0,
        eta0: 0.01,
    };
    match neck_detect(&h, 40, &th, &nbhd(40), &[], 0, 2).unwrap() {
        Detection::Detected(q) => {
            assert!(q.epsilon <= 1e-6, "{}", q.epsilon);
            let dev = q.history_deviation.unwrap();
            assert!(dev <= 1e-3, "{dev}");
            assert!(dev <= q.epsilon + 5e-4);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn footprint_in_lookback_contaminates() {
    let h = shrinking_history(128, 20);
    let (t, a) = h.latest().unwrap();
    let th = DetectThresholds {
        h0: 1.0,
        eta0: 0.01,
    };
    let z = a.z_nodes[40];
    let fp = SurgeryFootprint {
        time: t - 1e-4,
        z_interval: (z + 0.1, z + 0.5),
        component: 0,
    };
    let got = neck_detect(&h, 40, &th, &nbhd(40), std::slice::from_ref(&fp), 0, 2).unwrap();
    assert_eq!(got, Detection::SurgeryContaminated);
    // another component, or outside the box
    assert!(matches!(
        neck_detect(&h, 40, &th, &nbhd(40), std::slice::from_ref(&fp), 1, 2).unwrap(),
        Detection::Detected(_)
    ));
    let far = SurgeryFootprint {
        z_interval: (z + 0.2, z + 0.5),
        ..fp
    };
    assert!(matches!(
        neck_detect(&h, 40, &th, &nbhd(40), &[far], 0, 2).unwrap(),
        Detection::Detected(_)
    ));
}

#[test]
fn sphere_never_triggers() {
    let a = sphere(96);
    let mut h = FlowHistory::new(1.0);
    h.push(0.0, &a);
    let th = DetectThresholds {
        h0: 0.0,
        eta0: 0.04,
    };
    for (_, d) in detect_all(&h, &th, &nbhd(0), &[], 0, 0).unwrap() {
        assert_eq!(d, Detection::NoTrigger);
    }
}

#[test]
fn neck_event_is_one_json_line() {
    let e = NeckEvent {
        time: 0.5,
        interval: (1.0, 2.0),
        epsilon: 1e-3,
        axis: vec![0.0, 1.0],
        norm_h: 40.0,
        ratio: 0.25,
    };
    let line = e.json_line();
    assert!(!line.contains('\n'));
    let back: NeckEvent = serde_json::from_str(&line).unwrap();
    assert_eq!(back, e);
}

#[test]
fn sphere_scan_certifies_compactness() {
    let a = sphere(96);
    let got = find_cylindrical_point(&a, 48, 0.04, 0.1, 0.1).unwrap();
    assert!(
        matches!(got, ScanResult::CompactCertificate { .. }),
        "{got:?}"
    );
    let low = find_cylindrical_point(&a, 48, 0.04, 1.0, 10.0);
    assert!(matches!(
        low,
        Err(NeckError::PreconditionCurvatureTooLow { .. })
    ));
}

#[test]
fn dumbbell_scan_finds_the_neck() {
    let a = dumbbell(5, 2, 0.5, 2.0, 20.0, 0.0).unwrap();
    let s = FlowState::new(a.clone());
    let samples: Vec<_> = (0..a.len()).map(|k| s.curv[k].clone()).collect();
    let eta0 = 0.02;
    let thr = 0.25 - eta0;
    let center = a.len() / 2;
    // walk out from the neck to the first low-ratio node
    let p = (center..a.len())
        .find(|&k| samples[k].norm_a2 / samples[k].norm_h2 < thr)
        .unwrap();
    // c# from the data over |H| ≥ H#
    let h_sharp = 0.5;
    let c_sharp = sample_c_sharp(&a, h_sharp);
    let hp = samples[p].norm_h2.sqrt();
    match find_cylindrical_point(&a, p, eta0, c_sharp, h_sharp).unwrap() {
        ScanResult::CylindricalPoint {
            index,
            distance,
            path,
        } => {
            assert!(distance <= alpha0(eta0) / hp);
            assert!(samples[index].norm_a2 / samples[index].norm_h2 >= thr);
            assert!(index < p && index >= center - 1);
            assert!(scan_respects_harnack(&path, hp, c_sharp));
        }
        other => panic!("{other:?}"),
    }
}

fn sample_c_sharp(a: &SymmetricAnsatz, h_sharp: f64) -> f64 {
    let s = crate::pinching::sample_nodes(a, false).unwrap();
    s.iter()
        .filter(|x| x.norm_h2.sqrt() >= h_sharp)
        .filter_map(|x| x.grad_h.map(|g| g / x.norm_h2))
        .fold(0.0, f64::max)
}

#[test]
fn cylinder_trajectory_is_unit_speed() {
    let a = cylinder(1.0, 128);
    let mut omega = vec![0.0; 7];
    omega[5] = 1.0;
    let tr = trace_axis_trajectory(&a, 0, &omega, 1.5).unwrap();
    assert!(tr.len() > 10);
    for x in &tr {
        assert!((x.s - x.y).abs() < 1e-10, "{x:?}");
        assert!(x.nu_omega.abs() < 1e-12);
    }
}

#[test]
fn hemisphere_normal_turns_toward_the_axis() {
    let a = sphere(257);
    let mut omega = vec![0.0; 7];
    omega[5] = 1.0;
    // node 0 is at z = 1, so follow -ω from the equator toward it... use the
    // far pole instead: z decreases with u, so the +ω direction is node 0.
    let back = {
        let mut b = a.clone();
        b.z_nodes.reverse();
        b.radius.reverse();
        b.offsets.reverse();
        b
    };
    let start = 128;
    let tr = trace_axis_trajectory(&back, start, &omega, 10.0).unwrap();
    assert!(tr[0].nu_omega.abs() < 1e-3);
    assert!(tr.last().unwrap().nu_omega > 0.99, "{:?}", tr.last());
    for w in tr.windows(2) {
        assert!(w[1].nu_omega > w[0].nu_omega);
    }
}

#[test]
fn dumbbell_band_rate_is_positive() {
    let a = dumbbell(5, 2, 0.5, 2.0, 20.0, 1e-3).unwrap();
    let center = a.len() / 2;
    let mut omega = vec![0.0; 7];
    omega[5] = 1.0;
    let tr = trace_axis_trajectory(&a, center, &omega, 50.0).unwrap();
    let k = crate::pinching::PinchingConstants::new(5);
    let mut band = 0;
    for w in tr.windows(2) {
        let x = &w[0];
        let st = FlowState::new(a.clone());
        let node = a
            .arclength()
            .partition_point(|&s| s <= x.s)
            .saturating_sub(1);
        let c = &st.curv[node];
        let spherical = crate::pinching::classify_values(c.norm_a2, c.norm_h2, &k)
            == Ok(crate::pinching::PinchingClass::SphericallyPinched);
        if spherical && x.nu_omega >= 0.0 && x.r > 0.05 {
            band += 1;
            assert!(x.rate() > 0.0, "{x:?}");
            // the split rate matches the change of ⟨ν⁺, ω⟩ between samples
            let fd = (w[1].nu_omega - x.nu_omega) / (w[1].y - x.y);
            assert!(
                (fd - 0.5 * (x.rate() + w[1].rate())).abs() < 0.05 * x.rate().abs() + 1e-3,
                "{fd} {x:?}"
            );
        }
    }
    assert!(band > 10, "{band}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]
    #[test]
    fn footprint_predicate_is_interval_overlap(
        ft in 0.0..2.0f64, fz0 in -3.0..3.0f64, fl in 0.0..2.0f64, comp in 0usize..2,
        t0 in 0.0..2.0f64, tl in 0.0..1.0f64, z0 in -3.0..3.0f64, zl in 0.0..2.0f64,
    ) {
        let fp = SurgeryFootprint { time: ft, z_interval: (fz0, fz0 + fl), component: comp };
        let got = contaminated(std::slice::from_ref(&fp), 0, (t0, t0 + tl), (z0, z0 + zl));
        let time_in = ft >= t0 && ft <= t0 + tl;
        let z_in = !(fz0 + fl < z0 || z0 + zl < fz0);
        prop_assert_eq!(got, comp == 0 && time_in && z_in);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn detection_is_monotone(eta in 0.0..0.1f64, deta in 0.0..0.1f64, h0 in 0.0..5.0f64, dh in 0.0..5.0f64, node in 200usize..312) {
        let a = dumbbell(5, 2, 0.5, 2.0, 20.0, 0.0).unwrap();
        let mut h = FlowHistory::new(1.0);
        h.push(0.0, &a);
        let strict = DetectThresholds { h0: h0 + dh, eta0: eta };
        let loose = DetectThresholds { h0, eta0: eta + deta };
        let d1 = neck_detect(&h, node, &strict, &nbhd(node), &[], 0, 0).unwrap();
        let d2 = neck_detect(&h, node, &loose, &nbhd(node), &[], 0, 0).unwrap();
        if matches!(d1, Detection::Detected(_)) {
            prop_assert!(matches!(d2, Detection::Detected(_)));
        }
    }
}
