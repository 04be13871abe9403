//! Neck recognition on the symmetric ansatz: mean radius, cylindricity and
//! almost-hypersurface tests, the detection trigger with surgery-free
//! bookkeeping, the cylindrical-point scan and axis trajectories.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::FlowState;
use crate::geometry::FormOptions;
use crate::models::{
    ansatz_forms_at, dist, profile_curvature, sphere_area, EndCondition, ModelError,
    ProfileCurvature, SymmetricAnsatz,
};
use crate::pinching::harnack_lower_bound;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeckError {
    #[error("mean curvature vanishes at z = {z}")]
    ZeroMeanCurvature { z: f64 },
    #[error("window is not cylindrical: achieved epsilon {achieved} exceeds {tol}")]
    NotCylindrical { achieved: f64, tol: f64 },
    #[error("|H(p)| = {h} is below gamma0 H# = {required}")]
    PreconditionCurvatureTooLow { h: f64, required: f64 },
    #[error(
        "scan ball of radius {radius} ended without a cylindrical point or a closed component"
    )]
    ScanInconclusive { radius: f64 },
    #[error("axis is tangent-orthogonal at s = {s}")]
    TangencyLoss { s: f64 },
    #[error("empty window")]
    EmptyWindow,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeckQuality {
    pub epsilon: f64,
    pub k_order: usize,
    pub interval: (f64, f64),
    /// Unit axis in the ambient space.
    pub axis: Vec<f64>,
    /// `(z, r(z))` over the window.
    pub mean_radius: Vec<(f64, f64)>,
    /// Largest `|r(z,s) - ρ(r₀, s - t₀)| / r₀` over the lookback, when a
    /// history was available.
    pub history_deviation: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicNbhd {
    pub node: usize,
    pub time: f64,
    pub radius: f64,
    pub lookback: f64,
    /// Radius and lookback are in units of `r̂ = (n-1)/|H|` (squared for time).
    pub normalized: bool,
}

impl ParabolicNbhd {
    /// Absolute `(radius, lookback)` given `|H|` at the center.
    pub fn resolve(&self, n: usize, norm_h: f64) -> (f64, f64) {
        if self.normalized {
            let rhat = (n - 1) as f64 / norm_h;
            (self.radius * rhat, self.lookback * rhat * rhat)
        } else {
            (self.radius, self.lookback)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgeryFootprint {
    pub time: f64,
    pub z_interval: (f64, f64),
    pub component: usize,
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// True iff some footprint on `component` lies in the space-time box.
pub fn contaminated(
    footprints: &[SurgeryFootprint],
    component: usize,
    times: (f64, f64),
    zs: (f64, f64),
) -> bool {
    footprints.iter().any(|f| {
        f.component == component && overlaps((f.time, f.time), times) && overlaps(f.z_interval, zs)
    })
}

/// Cross-section radius at axial coordinate `z`: exact at nodes, linear
/// between them. Sections of the ansatz are round, so this is
/// `(|Σ_z| / σ_{n-1})^{1/(n-1)}` without quadrature.
pub fn mean_radius(a: &SymmetricAnsatz, z: f64) -> Option<f64> {
    let zs = &a.z_nodes;
    let len = zs.len();
    if !(z >= zs[0] && z <= zs[len - 1]) {
        return None;
    }
    let k = zs.partition_point(|&x| x < z);
    if k < len && zs[k] == z {
        return Some(a.radius[k]);
    }
    let t = (z - zs[k - 1]) / (zs[k] - zs[k - 1]);
    Some(a.radius[k - 1] * (1.0 - t) + a.radius[k] * t)
}

pub fn mean_radius_from_area(area: f64, n: usize) -> f64 {
    (area / sphere_area(n - 1)).powf(1.0 / (n - 1) as f64)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    (0..order)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=order {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn unit_from_angles(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len() + 1);
    let mut prod = 1.0;
    for &a in angles {
        out.push(prod * a.cos());
        prod *= a.sin();
    }
    out.push(prod);
    out
}

/// `(n-1)`-volume of the image of the unit sphere `S^{n-1} ⊂ Rⁿ` under
/// `section`, by Gauss-Legendre in the polar angles and the trapezoid rule
/// in the azimuth. Tangent vectors are central differences.
pub fn section_area(n: usize, order: usize, section: &dyn Fn(&[f64]) -> Vec<f64>) -> f64 {
    assert!(n >= 2);
    let polar = n - 2;
    let gl: Vec<(f64, f64)> = gauss_legendre(order)
        .into_iter()
        .map(|(x, w)| (0.5 * PI * (x + 1.0), 0.5 * PI * w))
        .collect();
    let az = 2 * order;
    let daz = 2.0 * PI / az as f64;
    let h = 1e-5;
    let mut idx = vec![0usize; polar + 1];
    let mut total = 0.0;
    loop {
        let mut angles: Vec<f64> = idx[..polar].iter().map(|&i| gl[i].0).collect();
        angles.push(idx[polar] as f64 * daz);
        let weight: f64 = idx[..polar].iter().map(|&i| gl[i].1).product::<f64>() * daz;
        let tangents: Vec<Vec<f64>> = (0..=polar)
            .map(|j| {
                let mut ap = angles.clone();
                let mut am = angles.clone();
                ap[j] += h;
                am[j] -= h;
                let (p, m) = (
                    section(&unit_from_angles(&ap)),
                    section(&unit_from_angles(&am)),
                );
                p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
            })
            .collect();
        let gram = nalgebra::DMatrix::from_fn(polar + 1, polar + 1, |i, j| {
            tangents[i]
                .iter()
                .zip(&tangents[j])
                .map(|(a, b)| a * b)
                .sum::<f64>()
        });
        total += weight * gram.determinant().max(0.0).sqrt();
        let mut j = 0;
        loop {
            idx[j] += 1;
            let lim = if j < polar { order } else { az };
            if idx[j] < lim {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j > polar {
                return total;
            }
        }
    }
}

/// Curvature data at one node, in the orthonormal frame
/// (axial direction first, then the sphere directions).
#[derive(Clone, Debug, PartialEq)]
pub struct NeckSample {
    pub index: usize,
    pub z: f64,
    pub r: f64,
    /// Eigenvalues of `W_ν` along the axis and along the sphere factor.
    pub w_nu: (f64, f64),
    pub w_minus: f64,
    pub norm_h: f64,
    pub grad_a: f64,
    pub hess_a: f64,
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Samples at the given nodes. Derivative norms come from the form jets;
/// `k_order` 0 skips them.
pub fn neck_samples(
    a: &SymmetricAnsatz,
    nodes: &[usize],
    k_order: usize,
) -> Result<Vec<NeckSample>, NeckError> {
    let n = a.dim_n;
    let opts = FormOptions {
        torsion: false,
        derivatives: k_order >= 1,
        hessian: k_order >= 2,
        ..Default::default()
    };
    nodes
        .iter()
        .map(|&k| {
            let pc = profile_curvature(&a.profile_jet(k), n);
            let norm_h = pc.norm_h2.sqrt();
            if !(norm_h > 0.0) {
                return Err(NeckError::ZeroMeanCurvature { z: a.z_nodes[k] });
            }
            let nu: Vec<f64> = pc.h.iter().map(|x| x / norm_h).collect();
            let w_nu = (dotv(&pc.kappa, &nu), dotv(&pc.mu, &nu));
            let perp = |v: &[f64], c: f64| -> f64 {
                v.iter().zip(&nu).map(|(x, e)| (x - c * e).powi(2)).sum()
            };
            let wm2 = perp(&pc.kappa, w_nu.0) + (n - 1) as f64 * perp(&pc.mu, w_nu.1);
            let (grad_a, hess_a) = if k_order >= 1 {
                let ff = ansatz_forms_at(a, k, &opts)?;
                (ff.grad_a_norm.unwrap_or(0.0), ff.hess_a_norm.unwrap_or(0.0))
            } else {
                (0.0, 0.0)
            };
            Ok(NeckSample {
                index: k,
                z: a.z_nodes[k],
                r: a.radius[k],
                w_nu,
                w_minus: wm2.sqrt(),
                norm_h,
                grad_a,
                hess_a,
            })
        })
        .collect()
}

/// Pointwise closeness to the cylinder of radius `r` after scaling by `r`.
fn sample_epsilon(s: &NeckSample, n: usize, k_order: usize) -> f64 {
    let r = s.r;
    let dw = (s.w_nu.0.powi(2) + (n - 1) as f64 * (s.w_nu.1 - 1.0 / r).powi(2)).sqrt();
    let mut eps = (r * dw).max(r * s.w_minus);
    if k_order >= 1 {
        eps = eps.max(r * r * s.grad_a);
    }
    if k_order >= 2 {
        eps = eps.max(r * r * r * s.hess_a);
    }
    eps
}

/// Achieved closeness of the window to a round cylinder. The axis is the
/// displacement between the first and last cross-section centers.
pub fn cylindricity_test(
    a: &SymmetricAnsatz,
    samples: &[NeckSample],
    tol: f64,
    k_order: usize,
) -> Result<NeckQuality, NeckError> {
    let (first, last) = match (samples.first(), samples.last()) {
        (Some(f), Some(l)) if samples.len() >= 2 => (f, l),
        _ => return Err(NeckError::EmptyWindow),
    };
    let n = a.dim_n;
    let epsilon = samples
        .iter()
        .map(|s| sample_epsilon(s, n, k_order))
        .fold(0.0, f64::max);
    if epsilon > tol {
        return Err(NeckError::NotCylindrical {
            achieved: epsilon,
            tol,
        });
    }
    let (p, q) = (a.point(first.index), a.point(last.index));
    let mut axis = vec![0.0; n + a.codim_m];
    for c in 1..p.len() {
        axis[n + c - 1] = q[c] - p[c];
    }
    let norm = dotv(&axis, &axis).sqrt();
    axis.iter_mut().for_each(|x| *x /= norm);
    Ok(NeckQuality {
        epsilon,
        k_order,
        interval: (first.z.min(last.z), first.z.max(last.z)),
        axis,
        mean_radius: samples.iter().map(|s| (s.z, s.r)).collect(),
        history_deviation: None,
    })
}

/// Largest `r |W_-|` over the samples.
pub fn hypersurface_test(samples: &[NeckSample]) -> f64 {
    samples.iter().map(|s| s.r * s.w_minus).fold(0.0, f64::max)
}

/// Recent flow states, trimmed to a time span.
#[derive(Clone, Debug, Default)]
pub struct FlowHistory {
    pub frames: VecDeque<(f64, SymmetricAnsatz)>,
    pub span: f64,
}

impl FlowHistory {
    pub fn new(span: f64) -> Self {
        FlowHistory {
            frames: VecDeque::new(),
            span,
        }
    }

    pub fn push(&mut self, t: f64, a: &SymmetricAnsatz) {
        self.frames.push_back((t, a.clone()));
        while self.frames.len() > 2 && self.frames[1].0 <= t - self.span {
            self.frames.pop_front();
        }
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    pub fn latest(&self) -> Option<&(f64, SymmetricAnsatz)> {
        self.frames.back()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectThresholds {
    pub h0: f64,
    pub eta0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Detection {
    Detected(NeckQuality),
    NoTrigger,
    SurgeryContaminated,
}

/// Nodes with `|z - z_c| ≤ radius`, poles excluded.
pub fn window_nodes(a: &SymmetricAnsatz, center: usize, radius: f64) -> Vec<usize> {
    let zc = a.z_nodes[center];
    let count = if a.ends[0] == EndCondition::Periodic {
        a.len() - 1
    } else {
        a.len()
    };
    (0..count)
        .filter(|&k| !a.is_pole(k) && (a.z_nodes[k] - zc).abs() <= radius)
        .collect()
}

/// The detection trigger at `node` of the latest history frame.
pub fn neck_detect(
    history: &FlowHistory,
    node: usize,
    th: &DetectThresholds,
    nbhd: &ParabolicNbhd,
    footprints: &[SurgeryFootprint],
    component: usize,
    k_order: usize,
) -> Result<Detection, NeckError> {
    let (t0, a) = history.latest().ok_or(NeckError::EmptyWindow)?;
    let n = a.dim_n;
    let pc = profile_curvature(&a.profile_jet(node), n);
    let h = pc.norm_h2.sqrt();
    if !(h > 0.0) {
        return Ok(Detection::NoTrigger);
    }
    let ratio = pc.norm_a2 / pc.norm_h2;
    if h < th.h0 || ratio < 1.0 / (n - 1) as f64 - th.eta0 {
        return Ok(Detection::NoTrigger);
    }
    let (radius, lookback) = nbhd.resolve(n, h);
    let zc = a.z_nodes[node];
    if contaminated(
        footprints,
        component,
        (t0 - lookback, *t0),
        (zc - radius, zc + radius),
    ) {
        return Ok(Detection::SurgeryContaminated);
    }
    let nodes = window_nodes(a, node, radius);
    let samples = neck_samples(a, &nodes, k_order)?;
    let mut q = cylindricity_test(a, &samples, f64::INFINITY, k_order)?;
    q.history_deviation =
        radius_history_deviation(history, a.radius[node], lookback, &q.mean_radius);
    Ok(Detection::Detected(q))
}

/// `ρ(r, s) = √(r² - 2(n-1)s)`.
pub fn shrink_rho(n: usize, r: f64, s: f64) -> f64 {
    (r * r - 2.0 * (n - 1) as f64 * s).max(0.0).sqrt()
}

fn radius_history_deviation(
    history: &FlowHistory,
    r0: f64,
    lookback: f64,
    window: &[(f64, f64)],
) -> Option<f64> {
    let (t0, latest) = history.latest()?;
    let n = latest.dim_n;
    let mut worst: Option<f64> = None;
    for (s, frame) in history.frames.iter().filter(|(s, _)| *s >= t0 - lookback) {
        let rho = shrink_rho(n, r0, s - t0);
        for &(z, _) in window {
            if let Some(r) = mean_radius(frame, z) {
                let d = (r - rho).abs() / r0;
                worst = Some(worst.map_or(d, |w: f64| w.max(d)));
            }
        }
    }
    worst
}

/// One line of the neck event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeckEvent {
    pub time: f64,
    pub interval: (f64, f64),
    pub epsilon: f64,
    pub axis: Vec<f64>,
    pub norm_h: f64,
    pub ratio: f64,
}

impl NeckEvent {
    pub fn json_line(&self) -> String {
        serde_json::to_string(self).expect("neck event serializes")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScanResult {
    /// The whole component lies in the ball and has low ratio everywhere.
    CompactCertificate { radius: f64 },
    CylindricalPoint {
        index: usize,
        distance: f64,
        path: Vec<ScanSample>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanSample {
    pub index: usize,
    pub distance: f64,
    pub norm_h: f64,
}

/// `α₀ = √2 π / √η₀`.
pub fn alpha0(eta0: f64) -> f64 {
    2f64.sqrt() * PI / eta0.sqrt()
}

/// Scan the intrinsic ball of radius `α₀/|H(p)|` for a point with ratio
/// `≥ 1/(n-1) - η₀`, nearest first. Distances run along the meridian,
/// which realizes the distance to each cross-section.
pub fn find_cylindrical_point(
    a: &SymmetricAnsatz,
    p: usize,
    eta0: f64,
    c_sharp: f64,
    h_sharp: f64,
) -> Result<ScanResult, NeckError> {
    let n = a.dim_n;
    let alpha = alpha0(eta0);
    let gamma0 = 1.0 + c_sharp * alpha;
    let curv: Vec<ProfileCurvature> = (0..a.len())
        .map(|k| profile_curvature(&a.profile_jet(k), n))
        .collect();
    let hp = curv[p].norm_h2.sqrt();
    if hp < gamma0 * h_sharp {
        return Err(NeckError::PreconditionCurvatureTooLow {
            h: hp,
            required: gamma0 * h_sharp,
        });
    }
    let radius = alpha / hp;
    let s = a.arclength();
    let periodic = a.ends[0] == EndCondition::Periodic;
    let count = if periodic { a.len() - 1 } else { a.len() };
    let total = s[a.len() - 1];
    let distance = |k: usize| {
        let d = (s[k] - s[p]).abs();
        if periodic {
            d.min(total - d)
        } else {
            d
        }
    };
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&i, &j| distance(i).total_cmp(&distance(j)));
    let threshold = 1.0 / (n - 1) as f64 - eta0;
    let mut path = Vec::new();
    for k in order {
        let d = distance(k);
        if d > radius {
            return Err(NeckError::ScanInconclusive { radius });
        }
        let c = &curv[k];
        path.push(ScanSample {
            index: k,
            distance: d,
            norm_h: c.norm_h2.sqrt(),
        });
        if c.norm_h2 > 0.0 && c.norm_a2 / c.norm_h2 >= threshold {
            return Ok(ScanResult::CylindricalPoint {
                index: k,
                distance: d,
                path,
            });
        }
    }
    Ok(ScanResult::CompactCertificate { radius })
}

/// True iff every scanned sample obeys `|H(q)| ≥ |H(p)| / (1 + c# d |H(p)|)`.
pub fn scan_respects_harnack(path: &[ScanSample], h_p: f64, c_sharp: f64) -> bool {
    path.iter()
        .all(|q| q.norm_h >= harnack_lower_bound(h_p, q.distance, c_sharp) * (1.0 - 1e-12))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub y: f64,
    pub s: f64,
    pub z: f64,
    pub r: f64,
    /// `⟨ν⁺, ω⟩` with `ν⁺ = -H/|H|`.
    pub nu_omega: f64,
    pub norm_h: f64,
    /// `h⁺₁₁ ⟨e₁, ω⟩ / ⟨e₁, ω⟩`: the second-form part of `d/dy ⟨ν⁺, ω⟩`.
    pub second_form_rate: f64,
    /// Normal-connection part `Σ_β T₁₊^β ⟨ν_β, ω⟩ / ⟨e₁, ω⟩`.
    pub torsion_rate: f64,
}

impl TrajectorySample {
    pub fn rate(&self) -> f64 {
        self.second_form_rate + self.torsion_rate
    }
}

struct Track {
    s: Vec<f64>,
    pts: Vec<Vec<f64>>,
    tangent: Vec<Vec<f64>>,
    nu: Vec<Vec<f64>>,
    dnu: Vec<Vec<f64>>,
    curv: Vec<ProfileCurvature>,
}

impl Track {
    fn new(a: &SymmetricAnsatz) -> Self {
        let n = a.dim_n;
        let curv: Vec<ProfileCurvature> = (0..a.len())
            .map(|k| profile_curvature(&a.profile_jet(k), n))
            .collect();
        let s = a.arclength();
        let nu: Vec<Vec<f64>> = curv
            .iter()
            .map(|c| {
                let h = c.norm_h2.sqrt();
                c.h.iter().map(|x| -x / h.max(1e-300)).collect()
            })
            .collect();
        let len = a.len();
        let dnu = (0..len)
            .map(|k| {
                let (i, j) = (k.saturating_sub(1), (k + 1).min(len - 1));
                nu[j]
                    .iter()
                    .zip(&nu[i])
                    .map(|(x, y)| (x - y) / (s[j] - s[i]))
                    .collect()
            })
            .collect();
        Track {
            s,
            pts: a.points(),
            tangent: curv.iter().map(|c| c.tangent.clone()).collect(),
            nu,
            dnu,
            curv,
        }
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let k = self
            .s
            .partition_point(|&x| x <= s)
            .clamp(1, self.s.len() - 1)
            - 1;
        (
            k,
            ((s - self.s[k]) / (self.s[k + 1] - self.s[k])).clamp(0.0, 1.0),
        )
    }

    fn lerp(v: &[Vec<f64>], k: usize, t: f64) -> Vec<f64> {
        v[k].iter()
            .zip(&v[k + 1])
            .map(|(a, b)| a * (1.0 - t) + b * t)
            .collect()
    }

    fn tangent_at(&self, s: f64) -> Vec<f64> {
        let (k, t) = self.locate(s);
        let v = Self::lerp(&self.tangent, k, t);
        let l = dotv(&v, &v).sqrt();
        v.iter().map(|x| x / l).collect()
    }
}

/// Follow `dγ/dy = ω^T/|ω^T|²` along the meridian from node `start` in the
/// direction of increasing `⟨ω, e₁⟩ y`. On the ansatz `ω^T = ⟨ω, e₁⟩e₁`, so
/// this is `ds/dy = 1/⟨ω, e₁⟩`. RK4 with `Δy = 0.1 r`; stops at the end of
/// the profile or at `y_max`.
pub fn trace_axis_trajectory(
    a: &SymmetricAnsatz,
    start: usize,
    omega: &[f64],
    y_max: f64,
) -> Result<Vec<TrajectorySample>, NeckError> {
    let n = a.dim_n;
    let tr = Track::new(a);
    // meridian components of ω: ρ has no ω part, then (z, w)
    let mut om = vec![0.0; a.meridian_dim()];
    om[1..].copy_from_slice(&omega[n..n + a.codim_m]);
    let s_end = tr.s[a.len() - 1];
    let cap_zone = |s: f64| {
        let (k, _) = tr.locate(s);
        (a.is_pole(0) && k <= 1) || (a.is_pole(a.len() - 1) && k + 3 >= a.len())
    };
    let rate = |s: f64| -> Result<f64, NeckError> {
        let c = dotv(&tr.tangent_at(s), &om);
        if c.abs() < 1e-8 {
            return Err(NeckError::TangencyLoss { s });
        }
        Ok(1.0 / c)
    };
    let sample = |y: f64, s: f64| {
        let (k, t) = tr.locate(s);
        let p = Track::lerp(&tr.pts, k, t);
        let nu = Track::lerp(&tr.nu, k, t);
        let dnu = Track::lerp(&tr.dnu, k, t);
        let e1 = tr.tangent_at(s);
        let c = dotv(&e1, &om);
        let kappa = Track::lerp(
            &tr.curv.iter().map(|c| c.kappa.clone()).collect::<Vec<_>>(),
            k,
            t,
        );
        let h2 = tr.curv[k].norm_h2 * (1.0 - t) + tr.curv[k + 1].norm_h2 * t;
        // h⁺₁₁ = -⟨κ, ν⁺⟩; the normal part of D_s ν⁺ carries the torsion
        let h11 = -dotv(&kappa, &nu);
        let along = dotv(&dnu, &e1);
        let normal: Vec<f64> = dnu.iter().zip(&e1).map(|(d, e)| d - along * e).collect();
        TrajectorySample {
            y,
            s,
            z: p[1],
            r: p[0],
            nu_omega: dotv(&nu, &om),
            norm_h: h2.sqrt(),
            second_form_rate: h11,
            torsion_rate: dotv(&normal, &om) / c,
        }
    };
    let mut s = tr.s[start];
    let mut y = 0.0;
    let mut out = vec![sample(0.0, s)];
    while y < y_max && s < s_end {
        let r = out.last().map(|x| x.r).unwrap_or(1.0);
        let dy = (0.1 * r).min(y_max - y);
        let step = || -> Result<f64, NeckError> {
            let k1 = rate(s)?;
            let k2 = rate((s + 0.5 * dy * k1).min(s_end))?;
            let k3 = rate((s + 0.5 * dy * k2).min(s_end))?;
            let k4 = rate((s + dy * k3).min(s_end))?;
            Ok(s + dy / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        };
        match step() {
            Ok(next) => {
                s = next.min(s_end);
                y += dy;
                out.push(sample(y, s));
            }
            Err(NeckError::TangencyLoss { s: at }) if cap_zone(at) => break,
            Err(e) => return Err(e),
        }
        if dy <= 0.0 || (cap_zone(s) && out.last().is_some_and(|x| x.r < 1e-3 * out[0].r)) {
            break;
        }
    }
    Ok(out)
}

/// Arclength distance between two nodes along the profile.
pub fn node_distance(a: &SymmetricAnsatz, i: usize, j: usize) -> f64 {
    let (lo, hi) = (i.min(j), i.max(j));
    (lo..hi).map(|k| dist(&a.point(k), &a.point(k + 1))).sum()
}

/// Scan every node with `|H| ≥ H₀` and return the detections.
pub fn detect_all(
    history: &FlowHistory,
    th: &DetectThresholds,
    nbhd: &ParabolicNbhd,
    footprints: &[SurgeryFootprint],
    component: usize,
    k_order: usize,
) -> Result<Vec<(usize, Detection)>, NeckError> {
    let Some((_, a)) = history.latest() else {
        return Ok(Vec::new());
    };
    let state = FlowState::new(a.clone());
    let mut out = Vec::new();
    for k in 0..state.live_nodes() {
        if a.is_pole(k) || state.curv[k].norm_h2.sqrt() < th.h0 {
            continue;
        }
        let mut nb = *nbhd;
        nb.node = k;
        out.push((
            k,
            neck_detect(history, k, th, &nb, footprints, component, k_order)?,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
