//! Pinching functionals, class membership, reaction terms and the
//! a-priori-estimate monitors evaluated along trajectories.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FormOptions, FundamentalForms};
use crate::models::{ansatz_forms_at, EndCondition, ModelError, SymmetricAnsatz};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PinchingError {
    #[error("mean curvature vanishes, pinching class is undefined")]
    ZeroMeanCurvature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinchingConstants {
    pub n: usize,
    pub c_quadratic: f64,
    pub c_cylindrical: f64,
    pub c_spherical: f64,
    pub epsilon_cyl: f64,
    pub a_offset: f64,
    /// Strict margin for spherical pinching, relative to `|H|²`.
    pub spherical_tol: f64,
}

impl PinchingConstants {
    pub fn new(n: usize) -> Self {
        let nf = n as f64;
        let c_quadratic = 4.0 / (3.0 * nf);
        let c_cylindrical = if n > 2 {
            c_quadratic.min(1.0 / (nf - 2.0))
        } else {
            c_quadratic
        };
        PinchingConstants {
            n,
            c_quadratic,
            c_cylindrical,
            c_spherical: 1.0 / (nf - 1.0),
            epsilon_cyl: 0.0,
            a_offset: 0.0,
            spherical_tol: 1e-9,
        }
    }
}

/// `Q = |A|² + a - c|H|²`.
pub fn q_value(norm_a2: f64, norm_h2: f64, c: f64, a: f64) -> f64 {
    norm_a2 + a - c * norm_h2
}

pub fn pinching_q(ff: &FundamentalForms, c: f64, a: f64) -> f64 {
    q_value(ff.norm_a2, ff.norm_h2, c, a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PinchingClass {
    SphericallyPinched,
    CylindricallyPinched,
    Unpinched,
}

pub fn classify_values(
    norm_a2: f64,
    norm_h2: f64,
    k: &PinchingConstants,
) -> Result<PinchingClass, PinchingError> {
    if !(norm_h2 > 0.0) {
        return Err(PinchingError::ZeroMeanCurvature);
    }
    if norm_a2 - k.c_spherical * norm_h2 < -k.spherical_tol * norm_h2 {
        Ok(PinchingClass::SphericallyPinched)
    } else if norm_a2 - k.c_cylindrical * norm_h2 <= -k.epsilon_cyl * norm_h2 {
        Ok(PinchingClass::CylindricallyPinched)
    } else {
        Ok(PinchingClass::Unpinched)
    }
}

pub fn classify_pinching(
    ff: &FundamentalForms,
    k: &PinchingConstants,
) -> Result<PinchingClass, PinchingError> {
    classify_values(ff.norm_a2, ff.norm_h2, k)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReactionTerms {
    pub r1: f64,
    pub r2: f64,
    pub difference: f64,
}

/// Reaction terms from `h[α][(i, j)]` in orthonormal tangent and normal frames.
pub fn reaction_terms(h: &[DMatrix<f64>], c: f64) -> ReactionTerms {
    let m = h.len();
    let n = if m > 0 { h[0].nrows() } else { 0 };
    let mut r1 = 0.0;
    for a in 0..m {
        for b in 0..m {
            let s: f64 = h[a].component_mul(&h[b]).sum();
            r1 += s * s;
        }
    }
    // normal curvature [h_α, h_β]
    for a in 0..m {
        for b in 0..m {
            let comm = &h[a] * &h[b] - &h[b] * &h[a];
            r1 += comm.norm_squared();
        }
    }
    let hv: Vec<f64> = h.iter().map(|x| x.trace()).collect();
    let mut r2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..m).map(|a| hv[a] * h[a][(i, j)]).sum();
            r2 += s * s;
        }
    }
    ReactionTerms {
        r1,
        r2,
        difference: r1 - c * r2,
    }
}

pub fn reaction_terms_of(ff: &FundamentalForms, c: f64) -> ReactionTerms {
    reaction_terms(&ff.frame_components(), c)
}

/// Random symmetric `h` with `|A|² ≤ c|H|²`, boundary included.
pub fn random_pinched_tensor(rng: &mut impl Rng, n: usize, m: usize, c: f64) -> Vec<DMatrix<f64>> {
    let hvec: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h2: f64 = hvec.iter().map(|x| x * x).sum();
    let mut trf: Vec<DMatrix<f64>> = (0..m)
        .map(|_| {
            let x = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let s = (&x + x.transpose()) * 0.5;
            let t = s.trace() / n as f64;
            s - DMatrix::identity(n, n) * t
        })
        .collect();
    let norm: f64 = trf.iter().map(|x| x.norm_squared()).sum();
    let u: f64 = if rng.random_bool(0.1) {
        1.0
    } else {
        rng.random_range(0.0..1.0)
    };
    let scale = (u * (c - 1.0 / n as f64) * h2 / norm).sqrt();
    for (a, x) in trf.iter_mut().enumerate() {
        *x *= scale;
        *x += DMatrix::identity(n, n) * (hvec[a] / n as f64);
    }
    trf
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgeryClassSpec {
    pub r: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

/// Pointwise data of one profile node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSample {
    pub index: usize,
    pub s: f64,
    pub z: f64,
    pub r: f64,
    pub norm_a2: f64,
    pub norm_h2: f64,
    pub grad_a: Option<f64>,
    pub grad_h: Option<f64>,
    pub hess_a: Option<f64>,
    pub w_minus: Option<f64>,
    pub k_min: f64,
}

impl NodeSample {
    pub fn ratio(&self) -> f64 {
        self.norm_a2 / self.norm_h2
    }
}

/// Evaluate every node of a profile. The duplicate end node of a periodic
/// profile is skipped.
pub fn sample_nodes(a: &SymmetricAnsatz, hessian: bool) -> Result<Vec<NodeSample>, ModelError> {
    let opts = FormOptions {
        torsion: false,
        derivatives: true,
        hessian,
        ..Default::default()
    };
    let s = a.arclength();
    let count = if a.ends[0] == EndCondition::Periodic {
        a.len() - 1
    } else {
        a.len()
    };
    (0..count)
        .map(|k| {
            let ff = ansatz_forms_at(a, k, &opts)?;
            Ok(NodeSample {
                index: k,
                s: s[k],
                z: a.z_nodes[k],
                r: a.radius[k],
                norm_a2: ff.norm_a2,
                norm_h2: ff.norm_h2,
                grad_a: ff.grad_a_norm,
                grad_h: ff.grad_h_norm,
                hess_a: ff.hess_a_norm,
                w_minus: ff.weingarten_minus_norm,
                k_min: ff.curvature_operator_min(),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCondition {
    pub margin: f64,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// `min (1/(n-2) - α₀ - |A|²/|H|²)`.
    pub pinching: ClassCondition,
    /// `min |H| R - α₁`.
    pub mean_curvature: ClassCondition,
    /// `α₂ - |M| / Rⁿ`.
    pub area: ClassCondition,
}

impl ClassReport {
    pub fn holds(&self) -> bool {
        self.pinching.holds && self.mean_curvature.holds && self.area.holds
    }
}

pub fn class_membership_samples(
    samples: &[NodeSample],
    area: f64,
    n: usize,
    spec: &SurgeryClassSpec,
) -> ClassReport {
    let cn = 1.0 / (n as f64 - 2.0);
    let m1 = samples
        .iter()
        .map(|s| cn - spec.alpha0 - s.ratio())
        .fold(f64::INFINITY, f64::min);
    let m2 = samples
        .iter()
        .map(|s| s.norm_h2.sqrt() * spec.r - spec.alpha1)
        .fold(f64::INFINITY, f64::min);
    let m3 = spec.alpha2 - area / spec.r.powi(n as i32);
    let cond = |m: f64| ClassCondition {
        margin: m,
        holds: m >= 0.0,
    };
    ClassReport {
        pinching: cond(m1),
        mean_curvature: cond(m2),
        area: cond(m3),
    }
}

pub fn class_membership(
    a: &SymmetricAnsatz,
    spec: &SurgeryClassSpec,
) -> Result<ClassReport, ModelError> {
    let samples = sample_nodes(a, false)?;
    Ok(class_membership_samples(&samples, a.area(), a.dim_n, spec))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorConstants {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    pub c_sharp: f64,
    pub h_sharp: f64,
    pub d_sharp: f64,
    pub theta: f64,
    pub naff_c: f64,
    pub naff_sigma: f64,
    /// Scale `R` entering the `R⁻⁴` terms.
    pub r: f64,
}

impl MonitorConstants {
    pub fn from_c_sharp(n: usize, c_sharp: f64) -> (f64, f64) {
        let nm1 = n as f64 - 1.0;
        let d = 1.0 / (8.0 * nm1 * nm1 * c_sharp);
        let theta = 1.0 + (2.0 + std::f64::consts::PI) * nm1 * c_sharp;
        (d, theta)
    }

    /// Fit the constants to the initial datum: each is twice the supremum of
    /// its ratio, with small floors so that none vanishes.
    pub fn calibrate(samples: &[NodeSample], n: usize, r: f64, sigma: f64) -> Self {
        let sup = |f: &dyn Fn(&NodeSample) -> Option<f64>| {
            samples.iter().filter_map(f).fold(0.0f64, f64::max)
        };
        let r4 = r.powi(4);
        let gamma1 = (2.0 * sup(&|s| s.grad_a.map(|g| g * g / (s.norm_a2 * s.norm_a2)))).max(1e-6);
        let gamma2 = (2.0 * r4 * sup(&|s| s.grad_a.map(|g| g * g))).max(1e-6);
        let gamma3 = (2.0 * sup(&|s| s.hess_a.map(|g| g * g / s.norm_a2.powi(3)))).max(1e-6);
        let gamma4 = (2.0 * r4 * sup(&|s| s.hess_a.map(|g| g * g))).max(1e-6);
        let c_sharp = (2.0 * sup(&|s| s.grad_h.map(|g| g / s.norm_h2))).max(1e-3);
        let h_sharp = 2.0 * sup(&|s| Some(s.norm_h2.sqrt()));
        let naff_c = (2.0
            * sup(&|s| {
                s.w_minus
                    .map(|w| w * w / s.norm_h2.sqrt().powf(2.0 - sigma))
            }))
        .max(1e-12);
        let (d_sharp, theta) = MonitorConstants::from_c_sharp(n, c_sharp);
        MonitorConstants {
            gamma1,
            gamma2,
            gamma3,
            gamma4,
            c_sharp,
            h_sharp,
            d_sharp,
            theta,
            naff_c,
            naff_sigma: sigma,
            r,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonitorKind {
    Gradient,
    SecondDerivative,
    PointwiseGradient,
    Naff,
    Chen,
}

impl MonitorKind {
    pub const ALL: [MonitorKind; 5] = [
        MonitorKind::Gradient,
        MonitorKind::SecondDerivative,
        MonitorKind::PointwiseGradient,
        MonitorKind::Naff,
        MonitorKind::Chen,
    ];

    /// Naff's constant is not constructive, so its monitor only warns.
    pub fn fatal(self) -> bool {
        !matches!(self, MonitorKind::Naff)
    }

    pub fn name(self) -> &'static str {
        match self {
            MonitorKind::Gradient => "gradient",
            MonitorKind::SecondDerivative => "second_derivative",
            MonitorKind::PointwiseGradient => "pointwise_gradient",
            MonitorKind::Naff => "naff",
            MonitorKind::Chen => "chen",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub z: f64,
    pub bound: MonitorKind,
    pub lhs: f64,
    pub rhs: f64,
}

/// Worst relative margin `(rhs - lhs) / max(|rhs|, tiny)` of each monitor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub violations: Vec<Violation>,
    pub worst: Vec<(MonitorKind, f64)>,
}

impl MonitorSummary {
    pub fn fatal(&self) -> Vec<&Violation> {
        self.violations.iter().filter(|v| v.bound.fatal()).collect()
    }

    pub fn worst_margin(&self, kind: MonitorKind) -> Option<f64> {
        self.worst.iter().find(|(k, _)| *k == kind).map(|(_, m)| *m)
    }
}

pub fn monitor_sweep(samples: &[NodeSample], n: usize, mc: &MonitorConstants) -> MonitorSummary {
    let r4inv = mc.r.powi(-4);
    let nm1 = n as f64 - 1.0;
    let mut out = MonitorSummary::default();
    let mut worst = [f64::INFINITY; 5];
    let mut check =
        |s: &NodeSample, kind: MonitorKind, slot: usize, lhs: f64, rhs: f64, tol: f64| {
            let margin = (rhs - lhs) / rhs.abs().max(1e-300);
            worst[slot] = worst[slot].min(margin);
            if lhs > rhs + tol {
                out.violations.push(Violation {
                    index: s.index,
                    z: s.z,
                    bound: kind,
                    lhs,
                    rhs,
                });
            }
        };
    for s in samples {
        let a2 = s.norm_a2;
        let h = s.norm_h2.sqrt();
        if let Some(g) = s.grad_a {
            check(
                s,
                MonitorKind::Gradient,
                0,
                g * g,
                mc.gamma1 * a2 * a2 + mc.gamma2 * r4inv,
                0.0,
            );
        }
        if let Some(g) = s.hess_a {
            check(
                s,
                MonitorKind::SecondDerivative,
                1,
                g * g,
                mc.gamma3 * a2.powi(3) + mc.gamma4 * r4inv,
                0.0,
            );
        }
        if let Some(g) = s.grad_h {
            if h >= mc.h_sharp {
                check(
                    s,
                    MonitorKind::PointwiseGradient,
                    2,
                    g,
                    mc.c_sharp * s.norm_h2,
                    0.0,
                );
            }
        }
        if let Some(w) = s.w_minus {
            check(
                s,
                MonitorKind::Naff,
                3,
                w * w,
                mc.naff_c * h.powf(2.0 - mc.naff_sigma),
                0.0,
            );
        }
        // K_min ≥ ½(|H|²/(n-1) - |A|²), written as lhs ≤ rhs
        let chen = 0.5 * (s.norm_h2 / nm1 - a2);
        check(s, MonitorKind::Chen, 4, chen, s.k_min, 1e-9 * (1.0 + a2));
    }
    out.worst = MonitorKind::ALL
        .iter()
        .zip(worst)
        .filter(|(_, w)| w.is_finite())
        .map(|(k, w)| (*k, w))
        .collect();
    out
}

/// `|H(p₀)| / (1 + c# d |H(p₀)|)`.
pub fn harnack_lower_bound(h_p0: f64, d: f64, c_sharp: f64) -> f64 {
    h_p0 / (1.0 + c_sharp * d * h_p0)
}

/// Smallest `c - |A|²/|H|²` over the samples.
pub fn min_margin(samples: &[NodeSample], c: f64) -> f64 {
    samples
        .iter()
        .map(|s| c - s.ratio())
        .fold(f64::INFINITY, f64::min)
}
