//! Rotationally symmetric immersions `(ω, u) ↦ (ρ(u)ω, z(u), w(u))` and
//! closed-form model solutions.
//!
//! A profile point lives in the meridian space `[ρ, z, w_1 .. w_{m-1}]`.

mod analytic;
pub mod snapshot;

pub use analytic::{
    ansatz_chart, deflected_cylinder, dumbbell, dumbbell_shape, dumbbell_with, shrink_radius,
    AnalyticProfile, DumbbellShape, ShrinkKind, ShrinkingSolution,
};

use crate::geometry::{
    forms_from_jet, FormOptions, FundamentalForms, GeometryError, SurfaceJet, VTensor,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("profile radius {radius:.3e} at z = {z} is degenerate away from a capped end")]
    DegenerateProfile { z: f64, radius: f64 },
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("solution is extinct at t = {t} (extinction time {extinction})")]
    Extinct { t: f64, extinction: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndCondition {
    Capped,
    Open,
    Periodic,
}

/// Sampled profile of a rotationally symmetric tube.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricAnsatz {
    pub dim_n: usize,
    pub codim_m: usize,
    pub z_nodes: Vec<f64>,
    pub radius: Vec<f64>,
    /// `m - 1` offsets per node.
    pub offsets: Vec<Vec<f64>>,
    pub ends: [EndCondition; 2],
}

/// Derivatives `0..=4` of the meridian point with respect to the profile parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileJet {
    pub p: [Vec<f64>; 5],
    pub pole: bool,
}

impl SymmetricAnsatz {
    pub fn new(
        dim_n: usize,
        codim_m: usize,
        z_nodes: Vec<f64>,
        radius: Vec<f64>,
        offsets: Vec<Vec<f64>>,
        ends: [EndCondition; 2],
    ) -> Result<Self, ModelError> {
        let a = SymmetricAnsatz {
            dim_n,
            codim_m,
            z_nodes,
            radius,
            offsets,
            ends,
        };
        a.validate()?;
        Ok(a)
    }

    /// Build from meridian points `[ρ, z, w..]`.
    pub fn from_points(
        dim_n: usize,
        codim_m: usize,
        points: &[Vec<f64>],
        ends: [EndCondition; 2],
    ) -> Result<Self, ModelError> {
        let z = points.iter().map(|p| p[1]).collect();
        let r = points.iter().map(|p| p[0]).collect();
        let w = points.iter().map(|p| p[2..].to_vec()).collect();
        SymmetricAnsatz::new(dim_n, codim_m, z, r, w, ends)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.len();
        if self.dim_n < 2 || self.codim_m < 1 {
            return Err(ModelError::InvalidProfile(format!(
                "dimension {} codimension {}",
                self.dim_n, self.codim_m
            )));
        }
        if n < 5 || self.radius.len() != n || self.offsets.len() != n {
            return Err(ModelError::InvalidProfile(format!(
                "need at least 5 consistent nodes, got {n}"
            )));
        }
        if self.offsets.iter().any(|w| w.len() != self.codim_m - 1) {
            return Err(ModelError::InvalidProfile(
                "offset width must be m - 1".into(),
            ));
        }
        let periodic = self.ends.contains(&EndCondition::Periodic);
        if periodic && self.ends != [EndCondition::Periodic; 2] {
            return Err(ModelError::InvalidProfile(
                "periodic must apply to both ends".into(),
            ));
        }
        if self.z_nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ModelError::InvalidProfile(
                "axial nodes must be strictly increasing".into(),
            ));
        }
        for k in 0..n {
            let at_cap = (k == 0 && self.ends[0] == EndCondition::Capped)
                || (k == n - 1 && self.ends[1] == EndCondition::Capped);
            if at_cap {
                if self.radius[k].abs() > 1e-12 {
                    return Err(ModelError::InvalidProfile(format!(
                        "capped end node {k} is off the axis"
                    )));
                }
            } else if !(self.radius[k] > 0.0) {
                return Err(ModelError::InvalidProfile(format!(
                    "radius at node {k} is not positive"
                )));
            }
        }
        if periodic {
            let scale = self.radius.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
            let bad = (self.radius[0] - self.radius[n - 1]).abs() > 1e-12 * scale
                || self.offsets[0]
                    .iter()
                    .zip(&self.offsets[n - 1])
                    .any(|(a, b)| (a - b).abs() > 1e-12 * scale);
            if bad {
                return Err(ModelError::InvalidProfile("periodic ends disagree".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.z_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_nodes.is_empty()
    }

    pub fn meridian_dim(&self) -> usize {
        self.codim_m + 1
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.meridian_dim());
        p.push(self.radius[k]);
        p.push(self.z_nodes[k]);
        p.extend_from_slice(&self.offsets[k]);
        p
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    pub fn is_pole(&self, k: usize) -> bool {
        (k == 0 && self.ends[0] == EndCondition::Capped)
            || (k + 1 == self.len() && self.ends[1] == EndCondition::Capped)
    }

    pub fn period(&self) -> Option<f64> {
        (self.ends[0] == EndCondition::Periodic)
            .then(|| self.z_nodes[self.len() - 1] - self.z_nodes[0])
    }

    /// Point at index `j`, extended past the ends by the boundary rule.
    pub fn ext(&self, j: isize) -> Vec<f64> {
        let n = self.len() as isize;
        if j >= 0 && j < n {
            return self.point(j as usize);
        }
        let left = j < 0;
        let end = if left { self.ends[0] } else { self.ends[1] };
        match end {
            EndCondition::Periodic => {
                let l = self.period().expect("periodic");
                let mut p = if left {
                    self.ext(j + n - 1)
                } else {
                    self.ext(j - (n - 1))
                };
                p[1] += if left { -l } else { l };
                p
            }
            EndCondition::Capped => {
                let mut p = if left {
                    self.ext(-j)
                } else {
                    self.ext(2 * (n - 1) - j)
                };
                p[0] = -p[0];
                p
            }
            EndCondition::Open => {
                let (mirror, zend) = if left {
                    (-j, self.z_nodes[0])
                } else {
                    (2 * (n - 1) - j, self.z_nodes[(n - 1) as usize])
                };
                let mut p = self.ext(mirror);
                p[1] = 2.0 * zend - p[1];
                p
            }
        }
    }

    /// Node-parameter derivatives by 4th-order central differences with ghost nodes.
    pub fn profile_jet(&self, k: usize) -> ProfileJet {
        let d = self.meridian_dim();
        let pts: Vec<Vec<f64>> = (-3..=3).map(|j| self.ext(k as isize + j)).collect();
        let apply = |w: &[f64], den: f64| -> Vec<f64> {
            let r = w.len() / 2;
            (0..d)
                .map(|c| {
                    w.iter()
                        .enumerate()
                        .map(|(i, x)| x * pts[3 + i - r][c])
                        .sum::<f64>()
                        / den
                })
                .collect()
        };
        ProfileJet {
            p: [
                pts[3].clone(),
                apply(&[1.0, -8.0, 0.0, 8.0, -1.0], 12.0),
                apply(&[-1.0, 16.0, -30.0, 16.0, -1.0], 12.0),
                apply(&[1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0], 8.0),
                apply(&[-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0], 6.0),
            ],
            pole: self.is_pole(k),
        }
    }

    /// Arclength from node 0 along the profile (chordal).
    pub fn arclength(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.len()];
        for k in 1..self.len() {
            s[k] = s[k - 1] + dist(&self.point(k - 1), &self.point(k));
        }
        s
    }

    /// Volume of the immersed submanifold, `σ_{n-1} ∫ ρ^{n-1} ds` by Simpson
    /// on each chord with a quadratic radius.
    pub fn area(&self) -> f64 {
        let e = (self.dim_n - 1) as i32;
        let mut total = 0.0;
        for k in 0..self.len() - 1 {
            let a = self.point(k);
            let b = self.point(k + 1);
            let l = dist(&a, &b);
            let rm = 0.5 * (a[0] + b[0]);
            total += l / 6.0 * (a[0].abs().powi(e) + 4.0 * rm.abs().powi(e) + b[0].abs().powi(e));
        }
        sphere_area(self.dim_n - 1) * total
    }

    pub fn scaled(&self, lambda: f64) -> SymmetricAnsatz {
        let mut out = self.clone();
        out.z_nodes.iter_mut().for_each(|x| *x *= lambda);
        out.radius.iter_mut().for_each(|x| *x *= lambda);
        out.offsets
            .iter_mut()
            .for_each(|w| w.iter_mut().for_each(|x| *x *= lambda));
        out
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Volume of the unit `k`-sphere.
pub fn sphere_area(k: usize) -> f64 {
    // σ_k = 2 π^{(k+1)/2} / Γ((k+1)/2)
    let half = (k + 1) as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half(k + 1)
}

/// `Γ(j/2)` for positive integers `j`.
fn gamma_half(j: usize) -> f64 {
    if j % 2 == 0 {
        (1..j / 2).map(|x| x as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        while x < j as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Curvature of the profile reduced to the meridian space. The full mean
/// curvature vector is `κ + (n-1)μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileCurvature {
    pub tangent: Vec<f64>,
    pub speed: f64,
    pub kappa: Vec<f64>,
    pub mu: Vec<f64>,
    pub h: Vec<f64>,
    pub norm_a2: f64,
    pub norm_h2: f64,
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn profile_curvature(jet: &ProfileJet, n: usize) -> ProfileCurvature {
    let v = &jet.p[1];
    let a = &jet.p[2];
    let s2 = dotv(v, v);
    let speed = s2.sqrt();
    let t: Vec<f64> = v.iter().map(|x| x / speed).collect();
    let at = dotv(a, &t);
    let kappa: Vec<f64> = a.iter().zip(&t).map(|(x, ti)| (x - at * ti) / s2).collect();
    let mu: Vec<f64> = if jet.pole {
        kappa.clone()
    } else {
        let rho = jet.p[0][0];
        (0..t.len())
            .map(|c| {
                let e = if c == 0 { 1.0 } else { 0.0 };
                -(e - t[0] * t[c]) / rho
            })
            .collect()
    };
    let nm1 = (n - 1) as f64;
    let h: Vec<f64> = kappa.iter().zip(&mu).map(|(k, m)| k + nm1 * m).collect();
    let norm_a2 = dotv(&kappa, &kappa) + nm1 * dotv(&mu, &mu);
    let norm_h2 = dotv(&h, &h);
    ProfileCurvature {
        tangent: t,
        speed,
        kappa,
        mu,
        h,
        norm_a2,
        norm_h2,
    }
}

/// Closed-form `(|∇A|, |∇H|)` away from poles, from `∇⊥_s κ` and `∇⊥_s μ`.
pub fn profile_gradient_norms(jet: &ProfileJet, n: usize) -> (f64, f64) {
    let pc = profile_curvature(jet, n);
    let v = &jet.p[1];
    let a = &jet.p[2];
    let b = &jet.p[3];
    let d = v.len();
    let s = dotv(v, v);
    let av = dotv(a, v);
    let bv = dotv(b, v);
    let aa = dotv(a, a);
    // d/du of κ = (a - (a·v) v / s) / s
    let dkappa: Vec<f64> = (0..d)
        .map(|c| {
            let inner = b[c] - ((bv + aa) * v[c] + av * a[c]) / s + 2.0 * av * av * v[c] / (s * s);
            inner / s - 2.0 * av / s * (a[c] - av * v[c] / s) / s
        })
        .collect();
    let t = &pc.tangent;
    let speed = pc.speed;
    let perp = |x: &[f64]| -> Vec<f64> {
        let xt = dotv(x, t);
        x.iter()
            .zip(t)
            .map(|(xi, ti)| (xi - xt * ti) / speed)
            .collect()
    };
    let p = perp(&dkappa);
    let q: Vec<f64> = if jet.pole {
        vec![0.0; d]
    } else {
        let rho = jet.p[0][0];
        let drho = v[0];
        let tprime: Vec<f64> = (0..d).map(|c| (a[c] - dotv(a, t) * t[c]) / speed).collect();
        let dmu: Vec<f64> = (0..d)
            .map(|c| {
                let e = if c == 0 { 1.0 } else { 0.0 };
                (tprime[0] * t[c] + t[0] * tprime[c]) / rho + (e - t[0] * t[c]) * drho / (rho * rho)
            })
            .collect();
        perp(&dmu)
    };
    let nm1 = (n - 1) as f64;
    let ga2 = dotv(&p, &p) + 3.0 * nm1 * dotv(&q, &q);
    let gh: Vec<f64> = p.iter().zip(&q).map(|(x, y)| x + nm1 * y).collect();
    (ga2.sqrt(), dotv(&gh, &gh).sqrt())
}

/// Map a meridian vector to the ambient space at the chart point `θ = 0`.
pub fn lift(n: usize, q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n + q.len() - 1];
    out[0] = q[0];
    out[n..].copy_from_slice(&q[1..]);
    out
}

/// Surface jet at `θ = 0` in the chart `(u, θ)` with exponential coordinates
/// on the sphere factor.
pub fn ansatz_jet(n: usize, jet: &ProfileJet) -> SurfaceJet {
    let md = jet.p[0].len();
    let dim = n + md - 1;
    let mut ts = Vec::new();
    for rank in 1..=4 {
        let mut t = VTensor::zeros(n, rank, dim);
        t.fill_symmetric(|key| {
            let k = key.iter().filter(|&&a| a == 0).count();
            let sidx: Vec<usize> = key.iter().copied().filter(|&a| a > 0).collect();
            if sidx.is_empty() {
                lift(n, &jet.p[k])
            } else {
                let mut out = vec![0.0; dim];
                let rho = jet.p[k][0];
                for (c, val) in sphere_chart_derivative(n, &sidx).into_iter().enumerate() {
                    out[c] = rho * val;
                }
                out
            }
        });
        ts.push(t);
    }
    let mut it = ts.into_iter();
    SurfaceJet {
        d1: it.next().unwrap(),
        d2: it.next().unwrap(),
        d3: it.next(),
        d4: it.next(),
    }
}

/// `∂_S ω` at the pole `e_0` of exponential coordinates on `S^{n-1}`;
/// chart index `a ≥ 1` points along `e_a`.
fn sphere_chart_derivative(n: usize, s: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let dl = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    match s.len() {
        1 => out[s[0]] = 1.0,
        2 => out[0] = -dl(s[0], s[1]),
        3 => {
            let (a, b, c) = (s[0], s[1], s[2]);
            out[a] -= dl(b, c) / 3.0;
            out[b] -= dl(a, c) / 3.0;
            out[c] -= dl(a, b) / 3.0;
        }
        4 => {
            let (a, b, c, d) = (s[0], s[1], s[2], s[3]);
            out[0] = (dl(a, b) * dl(c, d) + dl(a, c) * dl(b, d) + dl(a, d) * dl(b, c)) / 3.0;
        }
        _ => {}
    }
    out
}

/// Surface jet at a pole in Cartesian coordinates on the tangent plane.
/// Needs `ρ` odd and the other components even in the parameter.
pub fn pole_jet(n: usize, jet: &ProfileJet) -> SurfaceJet {
    let md = jet.p[0].len();
    let dim = n + md - 1;
    let r1 = jet.p[1][0];
    let r3 = jet.p[3][0];
    let z2: Vec<f64> = (1..md).map(|c| jet.p[2][c] / (r1 * r1)).collect();
    let z4: Vec<f64> = (1..md)
        .map(|c| jet.p[4][c] / r1.powi(4) - 4.0 * jet.p[2][c] * r3 / r1.powi(5))
        .collect();
    let dl = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut d1 = VTensor::zeros(n, 1, dim);
    for i in 0..n {
        d1.get_mut(&[i])[i] = 1.0;
    }
    let mut d2 = VTensor::zeros(n, 2, dim);
    for i in 0..n {
        d2.get_mut(&[i, i])[n..].copy_from_slice(&z2);
    }
    let d3 = VTensor::zeros(n, 3, dim);
    let mut d4 = VTensor::zeros(n, 4, dim);
    d4.fill_symmetric(|k| {
        let c = (dl(k[0], k[1]) * dl(k[2], k[3])
            + dl(k[0], k[2]) * dl(k[1], k[3])
            + dl(k[0], k[3]) * dl(k[1], k[2]))
            / 3.0;
        let mut out = vec![0.0; dim];
        for (j, v) in z4.iter().enumerate() {
            out[n + j] = c * v;
        }
        out
    });
    SurfaceJet {
        d1,
        d2,
        d3: Some(d3),
        d4: Some(d4),
    }
}

/// Fundamental forms of the ansatz from a profile jet.
pub fn forms_from_profile(
    n: usize,
    jet: &ProfileJet,
    opts: &FormOptions,
) -> Result<FundamentalForms, ModelError> {
    if jet.pole {
        return Ok(forms_from_jet(&pole_jet(n, jet), opts, None)?);
    }
    let rho = jet.p[0][0];
    if rho.abs() < 1e-12 {
        return Err(ModelError::DegenerateProfile {
            z: jet.p[0][1],
            radius: rho,
        });
    }
    Ok(forms_from_jet(&ansatz_jet(n, jet), opts, None)?)
}

/// Fundamental forms at node `k` (exact up to 1-D differences on the profile).
pub fn ansatz_forms_at(
    a: &SymmetricAnsatz,
    k: usize,
    opts: &FormOptions,
) -> Result<FundamentalForms, ModelError> {
    forms_from_profile(a.dim_n, &a.profile_jet(k), opts)
}

/// Fundamental forms at axial coordinate `z`; the profile jet is linearly
/// interpolated between the bracketing nodes.
pub fn ansatz_forms(a: &SymmetricAnsatz, z: f64) -> Result<FundamentalForms, ModelError> {
    let opts = FormOptions::default();
    let zs = &a.z_nodes;
    if !(z >= zs[0] && z <= zs[zs.len() - 1]) {
        return Err(ModelError::InvalidProfile(format!(
            "z = {z} outside the profile"
        )));
    }
    let k = match zs.binary_search_by(|x| x.total_cmp(&z)) {
        Ok(k) => return ansatz_forms_at(a, k, &opts),
        Err(k) => k - 1,
    };
    let t = (z - zs[k]) / (zs[k + 1] - zs[k]);
    let (j0, j1) = (a.profile_jet(k), a.profile_jet(k + 1));
    let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(y)
            .map(|(p, q)| (1.0 - t) * p + t * q)
            .collect()
    };
    let jet = ProfileJet {
        p: [
            mix(&j0.p[0], &j1.p[0]),
            mix(&j0.p[1], &j1.p[1]),
            mix(&j0.p[2], &j1.p[2]),
            mix(&j0.p[3], &j1.p[3]),
            mix(&j0.p[4], &j1.p[4]),
        ],
        pole: false,
    };
    forms_from_profile(a.dim_n, &jet, &opts)
}

#[cfg(test)]
mod tests;
