//! Standard surgery on a neck: bend inward by `τu ν̂`, blend into the bent
//! best cylinder, close with an axially symmetric cap. Also the blend
//! function bounds and the deformation audits.

mod cap;
mod deform;
mod operator;

pub use cap::{build_cap, Cap};
pub use deform::{
    calibrate_tau, cor_curv_audit, deform_neck, deformed_profile, fit_slope,
    principal_normal_series, CorCurvAudit, CorCurvItem, DeformationAudit, DeformationResidual,
};
pub use operator::{
    best_cylinder, standard_surgery, surgery_site_selection, BestCylinder, Side, Site,
    SurgeryAudit, SurgeryOutcome,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::ModelError;
use crate::taylor::Taylor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurgeryError {
    #[error("z = {z} outside the blend domain ({lo}, {hi}]")]
    OutOfDomain { z: f64, lo: f64, hi: f64 },
    #[error("bend too large: tau (|u| + |u'|) = {lhs} exceeds r = {r} at x = {x}")]
    SmallnessViolated { x: f64, lhs: f64, r: f64 },
    #[error("region is not a neck: epsilon {epsilon} exceeds {epsilon0}")]
    NotANeck { epsilon: f64, epsilon0: f64 },
    #[error("neck too short: need {need} on each side, have {have}")]
    NeckTooShort { need: f64, have: f64 },
    #[error("no suitable surgery site: {0}")]
    NoSuitableSite(String),
    #[error("surgery audit failed: {0:?}")]
    AuditFailed(Vec<String>),
    #[error("bad surgery parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurgeryParams {
    pub lambda: f64,
    pub tau: f64,
    pub b: f64,
    pub epsilon0: f64,
    pub k0: usize,
    /// Length of the cap's curvature ramp, in units of `r₀`.
    pub cap_ramp: f64,
    /// Fail on a negative corollary margin instead of recording it.
    pub strict_audit: bool,
}

impl Default for SurgeryParams {
    fn default() -> Self {
        SurgeryParams {
            lambda: 10.0,
            tau: 0.1,
            b: 120.0,
            epsilon0: 0.1,
            k0: 2,
            cap_ramp: 0.5,
            strict_audit: true,
        }
    }
}

impl SurgeryParams {
    pub fn validate(&self) -> Result<(), SurgeryError> {
        if !(self.lambda > 0.0) {
            return Err(SurgeryError::BadParams(format!(
                "Lambda = {} must be positive",
                self.lambda
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(SurgeryError::BadParams(format!(
                "tau = {} must lie in (0, 1)",
                self.tau
            )));
        }
        if !(self.b > 10.0 * self.lambda) {
            return Err(SurgeryError::BadParams(format!(
                "B = {} must exceed 10 Lambda = {}",
                self.b,
                10.0 * self.lambda
            )));
        }
        if !(self.cap_ramp > 0.0) {
            return Err(SurgeryError::BadParams("cap ramp must be positive".into()));
        }
        Ok(())
    }
}

/// `(f, f', f'')` for `f(z) = exp(-B/(z - Λ))` on `(Λ, 4Λ]`.
pub fn blend_function(z: f64, b: f64, lambda: f64) -> Result<(f64, f64, f64), SurgeryError> {
    if !(z > lambda && z <= 4.0 * lambda) {
        return Err(SurgeryError::OutOfDomain {
            z,
            lo: lambda,
            hi: 4.0 * lambda,
        });
    }
    Ok(blend_unchecked(z, b, lambda))
}

/// Same as [`blend_function`], extended by zero for `z ≤ Λ` and past `4Λ`.
pub fn blend_unchecked(z: f64, b: f64, lambda: f64) -> (f64, f64, f64) {
    let x = z - lambda;
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let f = (-b / x).exp();
    let f1 = b / (x * x) * f;
    let f2 = f * (b * b / x.powi(4) - 2.0 * b / x.powi(3));
    (f, f1, f2)
}

fn sample_points(lambda: f64, count: usize) -> impl Iterator<Item = f64> {
    (1..=count).map(move |k| lambda + 3.0 * lambda * k as f64 / count as f64)
}

/// Dense check of the first group of blend bounds. The lower bound on `f''`
/// is evaluated with `(z-Λ)²` as printed and with `(z-Λ)⁴` as derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendBoundsReport {
    pub b: f64,
    pub lambda: f64,
    pub max_f: f64,
    pub max_f2_times_b2: f64,
    /// Largest `|f'|² B² / f`.
    pub max_f1_sq_ratio: f64,
    pub derivative_identity_defect: f64,
    /// `None` when `B < 12Λ` and the lower bound is not claimed.
    pub lower_bound_printed: Option<bool>,
    pub lower_bound_quartic: Option<bool>,
}

impl BlendBoundsReport {
    pub fn upper_bounds_hold(&self) -> bool {
        self.max_f <= 1.0 && self.max_f2_times_b2 <= 5.0 && self.max_f1_sq_ratio <= 5.0
    }
}

pub fn blend_bounds(b: f64, lambda: f64, samples: usize) -> BlendBoundsReport {
    let mut r = BlendBoundsReport {
        b,
        lambda,
        max_f: 0.0,
        max_f2_times_b2: f64::NEG_INFINITY,
        max_f1_sq_ratio: 0.0,
        derivative_identity_defect: 0.0,
        lower_bound_printed: None,
        lower_bound_quartic: None,
    };
    let claimed = b >= 12.0 * lambda;
    let (mut printed, mut quartic) = (true, true);
    for z in sample_points(lambda, samples) {
        let (f, f1, f2) = blend_unchecked(z, b, lambda);
        let x = z - lambda;
        r.max_f = r.max_f.max(f);
        r.max_f2_times_b2 = r.max_f2_times_b2.max(f2 * b * b);
        if f > 0.0 {
            r.max_f1_sq_ratio = r.max_f1_sq_ratio.max(f1 * f1 * b * b / f);
            r.derivative_identity_defect = r
                .derivative_identity_defect
                .max((f1 - b / (x * x) * f).abs() / f1.abs().max(1e-300));
            printed &= f2 >= b * b / (2.0 * x * x) * f;
            quartic &= f2 >= b * b / (2.0 * x.powi(4)) * f;
        }
    }
    if claimed {
        r.lower_bound_printed = Some(printed);
        r.lower_bound_quartic = Some(quartic);
    }
    r
}

/// Margins of `f ≤ δf''`, `|f'|(1+|f'|) ≤ δf''`, `|f''| ≤ δ` on `(Λ, 4Λ]`;
/// each margin is the smallest `rhs - lhs` over the samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendParamsReport {
    pub b: f64,
    pub lambda: f64,
    pub delta: f64,
    pub margins: [f64; 3],
}

impl BlendParamsReport {
    pub fn passes(&self) -> bool {
        self.margins.iter().all(|&m| m >= 0.0)
    }
}

pub fn blend_params_report(b: f64, lambda: f64, delta: f64, samples: usize) -> BlendParamsReport {
    let mut margins = [f64::INFINITY; 3];
    for z in sample_points(lambda, samples) {
        let (f, f1, f2) = blend_unchecked(z, b, lambda);
        margins[0] = margins[0].min(delta * f2 - f);
        margins[1] = margins[1].min(delta * f2 - f1.abs() * (1.0 + f1.abs()));
        margins[2] = margins[2].min(delta - f2.abs());
    }
    BlendParamsReport {
        b,
        lambda,
        delta,
        margins,
    }
}

/// Geometric candidates `10Λ · 1.05^k` up to `10⁷Λ`.
pub fn blend_candidates(lambda: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut b = 10.0 * lambda * 1.05;
    while b < 1e7 * lambda {
        out.push(b);
        b *= 1.05;
    }
    out
}

/// Smallest candidate `B` passing all three conditions, or the report of
/// the last candidate tried.
pub fn validate_blend_params(
    lambda: f64,
    delta: f64,
    samples: usize,
) -> Result<BlendParamsReport, BlendParamsReport> {
    let mut last = None;
    for b in blend_candidates(lambda) {
        let r = blend_params_report(b, lambda, delta, samples);
        if r.passes() {
            return Ok(r);
        }
        last = Some(r);
    }
    Err(last.expect("candidate grid is not empty"))
}

fn smootherstep(t: f64) -> (f64, f64, f64) {
    let t = t.clamp(0.0, 1.0);
    (
        t * t * t * (t * (6.0 * t - 15.0) + 10.0),
        30.0 * t * t * (t - 1.0) * (t - 1.0),
        60.0 * t * (2.0 * t * t - 3.0 * t + 1.0),
    )
}

/// Transition `φ(ζ)`: 1 on `[0, 2Λ]`, 0 on `[3Λ, 4Λ]`, quintic between.
/// Returns `(φ, φ', φ'')`.
pub fn transition(zeta: f64, lambda: f64) -> (f64, f64, f64) {
    if zeta <= 2.0 * lambda {
        return (1.0, 0.0, 0.0);
    }
    if zeta >= 3.0 * lambda {
        return (0.0, 0.0, 0.0);
    }
    let (s, s1, s2) = smootherstep((zeta - 2.0 * lambda) / lambda);
    (1.0 - s, -s1 / lambda, -s2 / (lambda * lambda))
}

/// Closed-form bounds on `(|φ|, |φ'|, |φ''|)`.
pub fn transition_bounds(lambda: f64) -> [f64; 3] {
    [1.0, 1.875 / lambda, 10.0 / 3f64.sqrt() / (lambda * lambda)]
}

type BendFn = dyn Fn(Taylor) -> Taylor + Send + Sync;

/// Bending amplitude `u(x)` as a function of the neck coordinate.
#[derive(Clone)]
pub struct BendProfile {
    pub r0: f64,
    /// `Some((B, Λ))` for the standard `u = r₀ exp(-B/(x/r₀ - Λ))`.
    pub standard: Option<(f64, f64)>,
    f: Arc<BendFn>,
}

impl std::fmt::Debug for BendProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "BendProfile(r0={}, standard={:?})",
            self.r0, self.standard
        )
    }
}

impl BendProfile {
    pub fn standard(r0: f64, b: f64, lambda: f64) -> Self {
        BendProfile {
            r0,
            standard: Some((b, lambda)),
            f: Arc::new(move |x: Taylor| {
                let zeta = x.scale(1.0 / r0);
                if zeta.value() <= lambda {
                    Taylor::constant(0.0)
                } else {
                    (Taylor::constant(-b) / zeta.add_scalar(-lambda))
                        .exp()
                        .scale(r0)
                }
            }),
        }
    }

    pub fn custom(r0: f64, f: impl Fn(Taylor) -> Taylor + Send + Sync + 'static) -> Self {
        BendProfile {
            r0,
            standard: None,
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: Taylor) -> Taylor {
        (self.f)(x)
    }

    /// `(u, u', u'')` at `x`.
    pub fn values(&self, x: f64) -> (f64, f64, f64) {
        let t = self.eval(Taylor::variable(x));
        (t.derivative(0), t.derivative(1), t.derivative(2))
    }

    /// Smallness `τ(|u| + |u'|) ≤ r` at `x`, returned as `(lhs, holds)`.
    pub fn smallness(&self, x: f64, tau: f64, r: f64) -> (f64, bool) {
        let (u, u1, _) = self.values(x);
        let lhs = tau * (u.abs() + u1.abs());
        (lhs, lhs <= r)
    }
}
