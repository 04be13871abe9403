//! Explicit time stepping of the profile by the mean curvature vector.
//!
//! Nodes move in the meridian space by the reduced mean curvature vector,
//! which is normal to the profile curve, so the node parameterization is a
//! normal parameterization between regrids.

mod regrid;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{
    profile_curvature, profile_gradient_norms, EndCondition, ModelError, ProfileCurvature,
    SymmetricAnsatz,
};
use crate::pinching::PinchingConstants;

pub use regrid::{needs_regrid, regrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(
        "time step {dt:.3e} fell below the floor at t = {t}: curvature blew up without surgery"
    )]
    BlowUp { t: f64, dt: f64 },
    #[error("invalid thresholds: {0}")]
    BadThresholds(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("aborted by observer: {0}")]
    Aborted(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    pub c_cfl: f64,
    pub c_curv: f64,
    pub dt_floor: f64,
    /// Regrid when the monitor-weighted spacing varies by more than this factor.
    pub regrid_ratio: f64,
    /// Target `Δs·|A|` of the regrid monitor.
    pub regrid_resolution: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            c_cfl: 0.1,
            c_curv: 0.1,
            dt_floor: 1e-12,
            regrid_ratio: 3.0,
            regrid_resolution: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowEvent {
    pub t: f64,
    pub step: usize,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub geometry: SymmetricAnsatz,
    /// Reduced curvature per node, recomputed after every accepted step.
    pub curv: Vec<ProfileCurvature>,
    pub step_count: usize,
    pub events: Vec<FlowEvent>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn curvatures(a: &SymmetricAnsatz) -> Vec<ProfileCurvature> {
    (0..a.len())
        .map(|k| profile_curvature(&a.profile_jet(k), a.dim_n))
        .collect()
}

impl FlowState {
    pub fn new(geometry: SymmetricAnsatz) -> Self {
        let curv = curvatures(&geometry);
        FlowState {
            t: 0.0,
            geometry,
            curv,
            step_count: 0,
            events: Vec::new(),
        }
    }

    /// Nodes carrying distinct points; the duplicate periodic end is excluded.
    pub fn live_nodes(&self) -> usize {
        if self.geometry.ends[0] == EndCondition::Periodic {
            self.geometry.len() - 1
        } else {
            self.geometry.len()
        }
    }

    pub fn max_h(&self) -> f64 {
        self.curv[..self.live_nodes()]
            .iter()
            .map(|c| c.norm_h2)
            .fold(0.0, f64::max)
            .sqrt()
    }

    pub fn min_h(&self) -> f64 {
        self.curv[..self.live_nodes()]
            .iter()
            .map(|c| c.norm_h2)
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    pub fn max_a2(&self) -> f64 {
        self.curv[..self.live_nodes()]
            .iter()
            .map(|c| c.norm_a2)
            .fold(0.0, f64::max)
    }

    pub fn argmax_h(&self) -> usize {
        let mut best = 0;
        for k in 0..self.live_nodes() {
            if self.curv[k].norm_h2 > self.curv[best].norm_h2 {
                best = k;
            }
        }
        best
    }

    /// Smallest radius away from poles.
    pub fn min_radius(&self) -> f64 {
        (0..self.geometry.len())
            .filter(|&k| !self.geometry.is_pole(k))
            .map(|k| self.geometry.radius[k])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_spacing(&self) -> f64 {
        let p = self.geometry.points();
        p.windows(2)
            .map(|w| crate::models::dist(&w[0], &w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn metrics(&self, dt: f64, k: &PinchingConstants) -> StepMetrics {
        let live = &self.curv[..self.live_nodes()];
        StepMetrics {
            t: self.t,
            dt,
            max_h: self.max_h(),
            max_a2: self.max_a2(),
            min_r: self.min_radius(),
            min_q: live
                .iter()
                .map(|c| c.norm_a2 + k.a_offset - k.c_cylindrical * c.norm_h2)
                .fold(f64::INFINITY, f64::min),
            area: self.geometry.area(),
        }
    }

    fn log(&mut self, message: String) {
        self.events.push(FlowEvent {
            t: self.t,
            step: self.step_count,
            message,
        });
    }
}

/// Time step allowed by the parabolic and curvature restrictions.
pub fn stable_dt(state: &FlowState, params: &FlowParams) -> f64 {
    let h = state.min_spacing();
    (params.c_cfl * h * h).min(params.c_curv / state.max_a2().max(1e-300))
}

/// One explicit step of size `min(dt_max, c_cfl Δs², c_curv / max|A|²)`.
pub fn step(
    state: &FlowState,
    dt_max: f64,
    params: &FlowParams,
) -> Result<(FlowState, f64), FlowError> {
    if dt_max <= 0.0 {
        return Ok((state.clone(), 0.0));
    }
    let dt = dt_max.min(stable_dt(state, params));
    if !(dt >= params.dt_floor) {
        return Err(FlowError::BlowUp { t: state.t, dt });
    }
    let a = &state.geometry;
    let len = a.len();
    let periodic = a.ends[0] == EndCondition::Periodic;
    let mut pts = a.points();
    for k in 0..len {
        if periodic && k == len - 1 {
            continue;
        }
        let v = &state.curv[k].h;
        for (c, x) in pts[k].iter_mut().enumerate() {
            if c == 0 && a.is_pole(k) {
                continue;
            }
            *x += dt * v[c];
        }
    }
    if periodic {
        let l = a.period().expect("periodic");
        let mut last = pts[0].clone();
        last[1] += l;
        pts[len - 1] = last;
    }
    let geometry = SymmetricAnsatz::from_points(a.dim_n, a.codim_m, &pts, a.ends)?;
    let mut next = FlowState {
        t: state.t + dt,
        curv: curvatures(&geometry),
        geometry,
        step_count: state.step_count + 1,
        events: state.events.clone(),
    };
    if needs_regrid(&next.geometry, &next.curv, params) {
        next.geometry = regrid(&next.geometry, &next.curv, params)?;
        next.curv = curvatures(&next.geometry);
        next.log("regrid".into());
    }
    Ok((next, dt))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub t: f64,
    pub dt: f64,
    pub max_h: f64,
    pub max_a2: f64,
    pub min_r: f64,
    pub min_q: f64,
    pub area: f64,
}

impl StepMetrics {
    pub const HEADER: &'static str = "t,dt,max_h,max_a2,min_r,min_q,area";

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.t, self.dt, self.max_h, self.max_a2, self.min_r, self.min_q, self.area
        )
    }
}

/// Append-only metrics CSV.
pub struct MetricsWriter<W: Write> {
    out: W,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{}", StepMetrics::HEADER)?;
        Ok(MetricsWriter { out })
    }

    pub fn push(&mut self, m: &StepMetrics) -> std::io::Result<()> {
        writeln!(self.out, "{}", m.csv_row())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
}

impl ThresholdSet {
    /// `H₁ = ω₁/R`, `H₂ = ω₂H₁`, `H₃ = ω₃H₂`.
    pub fn from_omegas(r: f64, omega1: f64, omega2: f64, omega3: f64) -> Result<Self, FlowError> {
        let h1 = omega1 / r;
        let t = ThresholdSet {
            h1,
            h2: omega2 * h1,
            h3: omega3 * omega2 * h1,
            omega1,
            omega2,
            omega3,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.h1 > 0.0 && self.h1 < self.h2 && self.h2 < self.h3) {
            return Err(FlowError::BadThresholds(format!(
                "need 0 < H1 < H2 < H3, got {} {} {}",
                self.h1, self.h2, self.h3
            )));
        }
        Ok(())
    }
}

pub enum ThresholdOutcome {
    Reached(FlowState),
    /// The observer asked to stop before the threshold.
    Stopped(FlowState),
}

/// Per-step callback: return `Ok(false)` to stop, an error to abort.
pub type Observer<'a> = dyn FnMut(&FlowState, f64) -> Result<bool, FlowError> + 'a;

/// Fraction of `|H|` growth allowed per step near the threshold.
const APPROACH_GROWTH: f64 = 0.005;

/// Run until `max|H| ≥ H₃`. Near the threshold the step is limited so that
/// `|H|` grows by at most half a percent per step.
pub fn run_until_threshold(
    mut state: FlowState,
    thresholds: &ThresholdSet,
    params: &FlowParams,
    observer: &mut Observer<'_>,
) -> Result<ThresholdOutcome, FlowError> {
    thresholds.validate()?;
    loop {
        let hmax = state.max_h();
        if hmax >= thresholds.h3 {
            return Ok(ThresholdOutcome::Reached(state));
        }
        let mut dt_max = f64::INFINITY;
        if hmax >= 0.5 * thresholds.h3 {
            dt_max = APPROACH_GROWTH / state.max_a2();
        }
        let (next, dt) = step(&state, dt_max, params)?;
        state = next;
        if !observer(&state, dt)? {
            return Ok(ThresholdOutcome::Stopped(state));
        }
    }
}

/// Evolution residuals at one probe node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResidual {
    pub node: usize,
    /// `∂t|H|² - (Δ|H|² - 2|∇H|² + 2R₂)`.
    pub h2: f64,
    /// `∂t|A|² - (Δ|A|² - 2|∇A|² + 2R₁)`.
    pub a2: f64,
    /// Largest magnitude among the terms of each equation.
    pub h2_scale: f64,
    pub a2_scale: f64,
}

/// Right-hand sides `(Δf, |∇·|², R)` for `f = |H|²` and `f = |A|²` at a node.
struct EvolutionTerms {
    lap_h2: f64,
    grad_h2: f64,
    r2: f64,
    lap_a2: f64,
    grad_a2: f64,
    r1: f64,
}

/// Laplace-Beltrami of a rotationally symmetric function on the ansatz,
/// `f_ss + (n-1)(ρ_s/ρ) f_s`, and `n f_ss` at a pole.
pub fn symmetric_laplacian(a: &SymmetricAnsatz, f: &[f64], k: usize) -> f64 {
    let len = a.len() as isize;
    let ext = |j: isize| -> f64 {
        if j >= 0 && j < len {
            return f[j as usize];
        }
        let left = j < 0;
        let end = if left { a.ends[0] } else { a.ends[1] };
        match end {
            EndCondition::Periodic => {
                if left {
                    f[(j + len - 1) as usize]
                } else {
                    f[(j - (len - 1)) as usize]
                }
            }
            _ => {
                if left {
                    f[(-j) as usize]
                } else {
                    f[(2 * (len - 1) - j) as usize]
                }
            }
        }
    };
    let ki = k as isize;
    let fv: Vec<f64> = (-2..=2).map(|j| ext(ki + j)).collect();
    let fu = (fv[0] - 8.0 * fv[1] + 8.0 * fv[3] - fv[4]) / 12.0;
    let fuu = (-fv[0] + 16.0 * fv[1] - 30.0 * fv[2] + 16.0 * fv[3] - fv[4]) / 12.0;
    let jet = a.profile_jet(k);
    let s2 = dot(&jet.p[1], &jet.p[1]);
    let speed = s2.sqrt();
    let speed_u = dot(&jet.p[1], &jet.p[2]) / speed;
    let fs = fu / speed;
    let fss = (fuu - fs * speed_u) / s2;
    let n = a.dim_n as f64;
    if a.is_pole(k) {
        n * fss
    } else {
        let rho_s = jet.p[1][0] / speed;
        fss + (n - 1.0) * rho_s / jet.p[0][0] * fs
    }
}

fn evolution_terms(a: &SymmetricAnsatz, curv: &[ProfileCurvature], k: usize) -> EvolutionTerms {
    let n = a.dim_n;
    let nm1 = (n - 1) as f64;
    let h2: Vec<f64> = curv.iter().map(|c| c.norm_h2).collect();
    let a2: Vec<f64> = curv.iter().map(|c| c.norm_a2).collect();
    let c = &curv[k];
    let (ga, gh) = if a.is_pole(k) {
        (0.0, 0.0)
    } else {
        profile_gradient_norms(&a.profile_jet(k), n)
    };
    let hk = dot(&c.h, &c.kappa);
    let hm = dot(&c.h, &c.mu);
    let kk = dot(&c.kappa, &c.kappa);
    let mm = dot(&c.mu, &c.mu);
    let km = dot(&c.kappa, &c.mu);
    EvolutionTerms {
        lap_h2: symmetric_laplacian(a, &h2, k),
        grad_h2: gh * gh,
        r2: hk * hk + nm1 * hm * hm,
        lap_a2: symmetric_laplacian(a, &a2, k),
        grad_a2: ga * ga,
        r1: kk * kk + 2.0 * nm1 * km * km + nm1 * nm1 * mm * mm,
    }
}

/// Residuals of the evolution equations of `|H|²` and `|A|²` between two
/// consecutive states without a regrid in between. The right-hand side is
/// averaged over both states.
pub fn evolution_residuals(
    before: &FlowState,
    after: &FlowState,
    probes: &[usize],
) -> Vec<EvolutionResidual> {
    let dt = after.t - before.t;
    probes
        .iter()
        .map(|&k| {
            let e0 = evolution_terms(&before.geometry, &before.curv, k);
            let e1 = evolution_terms(&after.geometry, &after.curv, k);
            let avg = |f: &dyn Fn(&EvolutionTerms) -> f64| 0.5 * (f(&e0) + f(&e1));
            let dh = (after.curv[k].norm_h2 - before.curv[k].norm_h2) / dt;
            let da = (after.curv[k].norm_a2 - before.curv[k].norm_a2) / dt;
            let (lh, gh, r2) = (avg(&|e| e.lap_h2), avg(&|e| e.grad_h2), avg(&|e| e.r2));
            let (la, ga, r1) = (avg(&|e| e.lap_a2), avg(&|e| e.grad_a2), avg(&|e| e.r1));
            EvolutionResidual {
                node: k,
                h2: dh - (lh - 2.0 * gh + 2.0 * r2),
                a2: da - (la - 2.0 * ga + 2.0 * r1),
                h2_scale: [dh, lh, 2.0 * gh, 2.0 * r2]
                    .iter()
                    .fold(0.0f64, |m, x| m.max(x.abs())),
                a2_scale: [da, la, 2.0 * ga, 2.0 * r1]
                    .iter()
                    .fold(0.0f64, |m, x| m.max(x.abs())),
            }
        })
        .collect()
}

/// One surgery time and its curvature contract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgeryTime {
    pub t: f64,
    pub pre_max_h: f64,
    pub post_max_h: f64,
    pub discarded: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SurgeryTimeRecord {
    pub times: Vec<SurgeryTime>,
}

impl SurgeryTimeRecord {
    /// Minimum waiting time `(99/100) / (2n H₂²)`.
    pub fn min_spacing(n: usize, h2: f64) -> f64 {
        0.99 / (2.0 * n as f64 * h2 * h2)
    }

    /// Violations of the recorded contract; `slack` is the relative step
    /// tolerance on the pre-surgery curvature.
    pub fn check(&self, n: usize, thresholds: &ThresholdSet, slack: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (i, s) in self.times.iter().enumerate() {
            if s.pre_max_h < thresholds.h3 || s.pre_max_h > thresholds.h3 * (1.0 + slack) {
                out.push(format!(
                    "T{}: pre max|H| {} is not H3 = {} within {slack}",
                    i + 1,
                    s.pre_max_h,
                    thresholds.h3
                ));
            }
            if s.post_max_h > thresholds.h2 {
                out.push(format!(
                    "T{}: post max|H| {} exceeds H2 = {}",
                    i + 1,
                    s.post_max_h,
                    thresholds.h2
                ));
            }
            if i > 0 {
                let gap = s.t - self.times[i - 1].t;
                if gap < Self::min_spacing(n, thresholds.h2) {
                    out.push(format!("T{}: waiting time {gap} below the bound", i + 1));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests;
