//! Verification suites run by `mcfs verify <suite>`. Each check reports the
//! statement it tests and a margin that is nonnegative when it passes.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{step, FlowParams, FlowState};
use crate::geometry::{fundamental_forms, kato_check, ChartPatch};
use crate::models::{
    ansatz_forms_at, deflected_cylinder, dumbbell, AnalyticProfile, EndCondition, SymmetricAnsatz,
};
use crate::neck::{alpha0, find_cylindrical_point, scan_respects_harnack, ScanResult};
use crate::pinching::{harnack_lower_bound, random_pinched_tensor, reaction_terms, sample_nodes};
use crate::surgery::{
    blend_bounds, deform_neck, fit_slope, validate_blend_params, BendProfile, SurgeryParams,
};
use crate::taylor::Taylor;

pub const SUITES: [&str; 7] = [
    "geometry-convergence",
    "kato",
    "reaction-sign",
    "blend",
    "deformation-expansion",
    "exact-flows",
    "harnack",
];

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite {0:?} (known: {list})", list = SUITES.join(", "))]
    UnknownSuite(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// The inequality or identity under test.
    pub statement: String,
    pub margin: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, statement: &str, margin: f64, detail: String) -> Self {
        Check {
            name: name.into(),
            statement: statement.into(),
            margin,
            passed: margin >= 0.0,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.passed { "ok  " } else { "FAIL" };
            writeln!(
                out,
                "{tag} {:<34} margin {:>12.4e}  [{}]  {}",
                c.name, c.margin, c.statement, c.detail
            )
            .unwrap();
        }
        let verdict = if self.passed() { "passed" } else { "FAILED" };
        writeln!(
            out,
            "suite {} {verdict} ({} checks)",
            self.suite,
            self.checks.len()
        )
        .unwrap();
        out
    }
}

/// Run a suite. `seed` drives the randomized sweeps and `samples` scales
/// their size.
pub fn run_suite(name: &str, seed: u64, samples: usize) -> Result<SuiteReport, VerifyError> {
    let checks = match name {
        "geometry-convergence" => geometry_convergence(),
        "kato" => vec![kato_sweep(seed, samples)],
        "reaction-sign" => vec![reaction_sign_sweep(seed, samples)],
        "blend" => blend_checks(),
        "deformation-expansion" => deformation_expansion(),
        "exact-flows" => exact_flows(),
        "harnack" => harnack_checks(),
        other => return Err(VerifyError::UnknownSuite(other.to_string())),
    };
    Ok(SuiteReport {
        suite: name.to_string(),
        checks,
    })
}

fn generic_profile() -> AnalyticProfile {
    AnalyticProfile::new(5, 2, |u| {
        vec![
            (u.sin() * 0.3) + 1.0,
            u + u.cos() * 0.1,
            (u * 2.0).sin() * 0.2,
        ]
    })
}

fn observed_order(errs: &[f64]) -> f64 {
    errs.windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .fold(f64::INFINITY, f64::min)
}

fn geometry_convergence() -> Vec<Check> {
    let mut checks = Vec::new();
    // profile stencils against the Taylor-exact forms
    let prof = generic_profile();
    let u = 1.3;
    let exact = prof
        .forms(u, &Default::default())
        .map(|f| (f.norm_h(), f.norm_a2));
    let mut errs = Vec::new();
    for &h in &[0.1, 0.05, 0.025] {
        let u0 = u - 10.0 * h;
        let got = prof
            .sample(u0, u0 + 20.0 * h, 21, [EndCondition::Open; 2])
            .and_then(|a| ansatz_forms_at(&a, 10, &Default::default()));
        match (&exact, got) {
            (Ok((eh, ea)), Ok(ff)) => {
                errs.push((ff.norm_h() - eh).abs().max((ff.norm_a2 - ea).abs()))
            }
            _ => errs.push(f64::NAN),
        }
    }
    let order = observed_order(&errs);
    checks.push(Check::new(
        "profile stencil order",
        "|H|, |A|² error = O(h⁴)",
        if order.is_nan() { -1.0 } else { order - 3.5 },
        format!("order {order:.3}, errors {errs:?}"),
    ));
    // chart patches of the round sphere in R^{n+2}: |H| = n/r
    let mut errs = Vec::new();
    for &h in &[0.08, 0.04, 0.02] {
        let got = ChartPatch::sample(3, 2, &[7, 7, 7], &[h; 3], &[0.1, -0.2, 0.15], |x| {
            let s: f64 = x.iter().map(|v| v * v).sum();
            vec![x[0], x[1], x[2], (1.0 - s).sqrt(), 0.0]
        })
        .and_then(|p| fundamental_forms(&p, &p.center_node()));
        errs.push(got.map_or(f64::NAN, |ff| {
            (ff.norm_h() - 3.0).abs() + (ff.norm_a2 - 3.0).abs()
        }));
    }
    let order = observed_order(&errs);
    checks.push(Check::new(
        "chart stencil order",
        "|H| = n/r on the round sphere, error = O(h⁴)",
        if order.is_nan() { -1.0 } else { order - 3.5 },
        format!("order {order:.3}, errors {errs:?}"),
    ));
    // analytic cylinder values
    let cyl = AnalyticProfile::cylinder(5, 2, 1.0).forms(0.3, &Default::default());
    let dev = cyl.map_or(f64::INFINITY, |f| {
        (f.norm_h() - 4.0).abs() + (f.norm_a2 - 4.0).abs()
    });
    checks.push(Check::new(
        "unit cylinder forms",
        "|H| = 4, |A|² = 4",
        1e-12 - dev,
        format!("deviation {dev:.3e}"),
    ));
    checks
}

/// Random polynomial immersion of a 5-ball: graph of quadratic plus cubic
/// terms, sampled on a 7-point grid.
fn random_patch(rng: &mut impl Rng, m: usize) -> ChartPatch {
    let n = 5;
    let quad: Vec<f64> = (0..m * n * n)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let cubic: Vec<f64> = (0..m * n * n * n)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let h = rng.random_range(0.01..0.03);
    ChartPatch::sample(n, m, &[7; 5], &[h; 5], &[0.0; 5], move |x| {
        let mut p = vec![0.0; n + m];
        p[..n].copy_from_slice(x);
        for a in 0..m {
            let mut v = 0.0;
            for i in 0..n {
                for j in 0..n {
                    v += quad[(a * n + i) * n + j] * x[i] * x[j];
                    for k in 0..n {
                        v += 0.5 * cubic[((a * n + i) * n + j) * n + k] * x[i] * x[j] * x[k];
                    }
                }
            }
            p[n + a] = v;
        }
        p
    })
    .expect("valid patch")
}

/// `|∇A|² - 3/(n+2)|∇H|²` over `count` random patches.
pub fn kato_sweep(seed: u64, count: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut evaluated = 0;
    for _ in 0..count {
        let m = rng.random_range(1..=3);
        let p = random_patch(&mut rng, m);
        if let Some(k) = fundamental_forms(&p, &p.center_node())
            .ok()
            .and_then(|ff| kato_check(&ff))
        {
            worst = worst.min(k);
            evaluated += 1;
        }
    }
    let margin = if evaluated == count {
        worst + 1e-9
    } else {
        -1.0
    };
    Check::new(
        "Kato on random patches",
        "|∇A|² ≥ 3/(n+2)|∇H|²",
        margin,
        format!("{evaluated}/{count} patches, min residual {worst:.3e}, tolerance -1e-9"),
    )
}

/// Largest `R₁ - cR₂` over `count` random pinched tensors, `n = 5`.
pub fn reaction_sign_sweep(seed: u64, count: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = 4.0 / 15.0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let m = rng.random_range(1..=3);
        let h = random_pinched_tensor(&mut rng, 5, m, c);
        worst = worst.max(reaction_terms(&h, c).difference);
    }
    Check::new(
        "reaction sign on pinched tensors",
        "|A|² ≤ c|H|² ⇒ R₁ - cR₂ ≤ 0",
        1e-12 - worst,
        format!("{count} tensors, c = 4/15, max R1 - cR2 = {worst:.3e}"),
    )
}

fn blend_checks() -> Vec<Check> {
    let r = blend_bounds(120.0, 10.0, 100_000);
    let upper = [
        1.0 - r.max_f,
        5.0 - r.max_f2_times_b2,
        5.0 - r.max_f1_sq_ratio,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    let mut checks = vec![
        Check::new(
            "blend upper bounds (B, Λ) = (120, 10)",
            "f ≤ 1, B²|f''| ≤ 5, B²|f'|² ≤ 5f",
            upper,
            format!(
                "max f {:.4}, max B²f'' {:.4}, max B²f'²/f {:.4}",
                r.max_f, r.max_f2_times_b2, r.max_f1_sq_ratio
            ),
        ),
        Check::new(
            "blend derivative identity",
            "f' = Bf/(z-Λ)²",
            1e-12 - r.derivative_identity_defect,
            format!("defect {:.3e}", r.derivative_identity_defect),
        ),
    ];
    let quartic = r.lower_bound_quartic == Some(true);
    checks.push(Check::new(
        "blend lower bound, quartic denominator",
        "f'' ≥ B²f/(2(z-Λ)⁴)",
        if quartic { 0.0 } else { -1.0 },
        format!("holds: {:?}", r.lower_bound_quartic),
    ));
    // the squared denominator is reported, not asserted
    checks.push(Check::new(
        "blend lower bound, squared denominator",
        "f'' ≥ B²f/(2(z-Λ)²) (reported)",
        0.0,
        format!("holds: {:?}", r.lower_bound_printed),
    ));
    let found = validate_blend_params(10.0, 1e-2, 4000);
    let (margin, detail) = match &found {
        Ok(p) => (
            p.margins.iter().copied().fold(f64::INFINITY, f64::min),
            format!("smallest B = {:.1}", p.b),
        ),
        Err(p) => (
            p.margins.iter().copied().fold(f64::INFINITY, f64::min),
            format!("no B up to {:.3e}", p.b),
        ),
    };
    checks.push(Check::new(
        "blend parameters for δ = 1e-2",
        "f ≤ δf'', |f'|(1+|f'|) ≤ δf'', |f''| ≤ δ",
        margin,
        detail,
    ));
    checks
}

fn grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..=k)
        .map(|i| lo + (hi - lo) * i as f64 / k as f64)
        .collect()
}

/// Largest truncation residuals of the deformed `|A|²` and `|H|²`
/// expansions at each `τ`, on a neck with deflection `1e-3`.
pub fn deformation_residuals(
    taus: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), crate::surgery::SurgeryError> {
    let neck = deflected_cylinder(5, 2, 1.0, 1e-3);
    let bend = BendProfile::custom(1.0, |x: Taylor| {
        (x.scale(0.5).sin().scale(0.5)).add_scalar(1.0)
    });
    let (mut a2, mut h2) = (Vec::new(), Vec::new());
    for &tau in taus {
        let (_, audit) = deform_neck(
            &neck,
            1e-3,
            &SurgeryParams::default(),
            &bend,
            tau,
            &grid(0.3, 5.9, 12),
        )?;
        a2.push(audit.max(|r| r.thm_iv));
        h2.push(audit.max(|r| r.thm_v));
    }
    Ok((a2, h2))
}

fn deformation_expansion() -> Vec<Check> {
    let taus = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
    match deformation_residuals(&taus) {
        Ok((a2, h2)) => [
            ("|A|² truncation slope in τ", a2),
            ("|H|² truncation slope in τ", h2),
        ]
        .into_iter()
        .map(|(name, res)| {
            let s = fit_slope(&taus, &res);
            Check::new(
                name,
                "residual = O(τ²)",
                0.1 - (s - 2.0).abs(),
                format!("slope {s:.4}"),
            )
        })
        .collect(),
        Err(e) => vec![Check::new(
            "deformation",
            "residual = O(τ²)",
            -1.0,
            e.to_string(),
        )],
    }
}

/// Largest relative deviation of a radius from `√(1 - rate t)` until the
/// exact radius reaches one half.
pub fn radius_law_error(
    mut s: FlowState,
    rate: f64,
    radius: impl Fn(&FlowState) -> f64,
) -> Result<f64, crate::flow::FlowError> {
    let params = FlowParams::default();
    let mut worst = 0.0f64;
    loop {
        let (next, _) = step(&s, f64::INFINITY, &params)?;
        s = next;
        let exact = (1.0 - rate * s.t).sqrt();
        if exact < 0.5 {
            return Ok(worst);
        }
        worst = worst.max((radius(&s) - exact).abs() / exact);
    }
}

/// Unit shrinking cylinder, `n = 5`, periodic over length 2.
pub fn cylinder_law_error(nodes: usize) -> Result<f64, crate::flow::FlowError> {
    let a = AnalyticProfile::cylinder(5, 2, 1.0).sample(
        0.0,
        2.0,
        nodes,
        [EndCondition::Periodic; 2],
    )?;
    radius_law_error(FlowState::new(a), 8.0, |s| s.geometry.radius[nodes / 2])
}

/// Unit shrinking sphere, `n = 5`; the radius is measured at the equator.
pub fn sphere_law_error(nodes: usize) -> Result<f64, crate::flow::FlowError> {
    let a = AnalyticProfile::sphere(5, 2, 1.0).sample(0.0, PI, nodes, [EndCondition::Capped; 2])?;
    radius_law_error(FlowState::new(a), 10.0, |s| {
        let g = &s.geometry;
        let zc = 0.5 * (g.z_nodes[0] + g.z_nodes[g.len() - 1]);
        let k = g.len() / 2;
        (g.radius[k].powi(2) + (g.z_nodes[k] - zc).powi(2)).sqrt()
    })
}

fn exact_flows() -> Vec<Check> {
    let mut checks = Vec::new();
    for (name, stmt, err) in [
        (
            "shrinking cylinder radius",
            "r(t) = √(1 - 2(n-1)t)",
            cylinder_law_error(256),
        ),
        (
            "shrinking sphere radius",
            "r(t) = √(1 - 2nt)",
            sphere_law_error(256),
        ),
    ] {
        checks.push(match err {
            Ok(e) => Check::new(
                name,
                stmt,
                1e-3 - e,
                format!("max relative error {e:.3e} until r = 1/2"),
            ),
            Err(e) => Check::new(name, stmt, -1.0, e.to_string()),
        });
    }
    checks
}

fn harnack_checks() -> Vec<Check> {
    let mut checks = Vec::new();
    // the bound itself: equality at d = 0, decreasing in d
    let hp = 7.0;
    let at0 = (harnack_lower_bound(hp, 0.0, 0.3) - hp).abs();
    let ds = grid(0.0, 5.0, 50);
    let rise = ds
        .windows(2)
        .map(|w| harnack_lower_bound(hp, w[1], 0.3) - harnack_lower_bound(hp, w[0], 0.3))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::new(
        "Harnack bound shape",
        "|H(p)|/(1 + c# d |H(p)|) equals |H(p)| at d = 0 and decreases",
        (1e-12 - at0).min(-rise),
        format!("defect at 0 {at0:.2e}, largest increment {rise:.2e}"),
    ));
    // the cylindrical-point scan on the dumbbell stays above the bound
    let scan = dumbbell(5, 2, 0.5, 2.0, 20.0, 0.0)
        .map_err(|e| e.to_string())
        .and_then(|a| scan_dumbbell(&a));
    checks.push(match scan {
        Ok((ok, d, radius, c_sharp)) => Check::new(
            "scan path obeys Harnack",
            "|H(q)| ≥ |H(p)|/(1 + c# d(p,q) |H(p)|)",
            if ok { radius - d } else { -1.0 },
            format!(
                "cylindrical point at distance {d:.4} inside radius {radius:.4}, c# = {c_sharp:.3}"
            ),
        ),
        Err(e) => Check::new(
            "scan path obeys Harnack",
            "|H(q)| ≥ |H(p)|/(1 + c# d |H(p)|)",
            -1.0,
            e,
        ),
    });
    checks
}

/// Scan from the first low-ratio node next to the neck with `c#` fitted on
/// the datum. Returns (Harnack holds along the path, distance, ball radius, c#).
fn scan_dumbbell(a: &SymmetricAnsatz) -> Result<(bool, f64, f64, f64), String> {
    let samples = sample_nodes(a, false).map_err(|e| e.to_string())?;
    let (eta0, h_sharp) = (0.02, 0.5);
    let c_sharp = samples
        .iter()
        .filter(|x| x.norm_h2.sqrt() >= h_sharp)
        .filter_map(|x| x.grad_h.map(|g| g / x.norm_h2))
        .fold(0.0, f64::max);
    let center = a.len() / 2;
    let p = (center..a.len())
        .find(|&k| samples[k].ratio() < 0.25 - eta0)
        .ok_or("no low-ratio node")?;
    let hp = samples[p].norm_h2.sqrt();
    match find_cylindrical_point(a, p, eta0, c_sharp, h_sharp).map_err(|e| e.to_string())? {
        ScanResult::CylindricalPoint { distance, path, .. } => Ok((
            scan_respects_harnack(&path, hp, c_sharp),
            distance,
            alpha0(eta0) / hp,
            c_sharp,
        )),
        other => Err(format!("unexpected scan result {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite() {
        assert!(matches!(
            run_suite("nope", 1, 10),
            Err(VerifyError::UnknownSuite(_))
        ));
    }

    #[test]
    fn quick_suites_pass() {
        for name in ["geometry-convergence", "blend", "harnack"] {
            let r = run_suite(name, 1, 50).unwrap();
            assert!(r.passed(), "{}", r.render());
        }
        let r = run_suite("kato", 3, 50).unwrap();
        assert!(r.passed(), "{}", r.render());
        let r = run_suite("reaction-sign", 3, 500).unwrap();
        assert!(r.passed(), "{}", r.render());
    }
}
