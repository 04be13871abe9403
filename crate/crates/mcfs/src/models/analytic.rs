use std::f64::consts::PI;
use std::sync::Arc;

use super::{forms_from_profile, EndCondition, ModelError, ProfileJet, SymmetricAnsatz};
use crate::geometry::{ChartPatch, FormOptions, FundamentalForms};
use crate::taylor::Taylor;
use serde::{Deserialize, Serialize};

type ProfileFn = dyn Fn(Taylor) -> Vec<Taylor> + Send + Sync;

/// Profile given as a formula in its parameter, differentiated exactly by
/// truncated Taylor arithmetic.
#[derive(Clone)]
pub struct AnalyticProfile {
    pub dim_n: usize,
    pub codim_m: usize,
    f: Arc<ProfileFn>,
}

impl std::fmt::Debug for AnalyticProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AnalyticProfile(n={}, m={})", self.dim_n, self.codim_m)
    }
}

impl AnalyticProfile {
    pub fn new(
        dim_n: usize,
        codim_m: usize,
        f: impl Fn(Taylor) -> Vec<Taylor> + Send + Sync + 'static,
    ) -> Self {
        AnalyticProfile {
            dim_n,
            codim_m,
            f: Arc::new(f),
        }
    }

    pub fn cylinder(dim_n: usize, codim_m: usize, r0: f64) -> Self {
        AnalyticProfile::new(dim_n, codim_m, move |u| {
            let mut p = vec![Taylor::constant(r0), u];
            p.resize(codim_m + 1, Taylor::constant(0.0));
            p
        })
    }

    /// Round sphere of radius `r`, parameter is the polar angle in `[0, π]`.
    pub fn sphere(dim_n: usize, codim_m: usize, r: f64) -> Self {
        AnalyticProfile::new(dim_n, codim_m, move |u| {
            let (s, c) = u.sin_cos();
            let mut p = vec![s * r, c * (-r)];
            p.resize(codim_m + 1, Taylor::constant(0.0));
            p
        })
    }

    /// Profile evaluated on a series argument.
    pub fn eval(&self, u: Taylor) -> Vec<Taylor> {
        (self.f)(u)
    }

    pub fn series(&self, u: f64) -> Vec<Taylor> {
        (self.f)(Taylor::variable(u))
    }

    pub fn point(&self, u: f64) -> Vec<f64> {
        self.series(u).iter().map(|t| t.value()).collect()
    }

    pub fn jet(&self, u: f64, pole: bool) -> ProfileJet {
        let s = self.series(u);
        let col = |k: usize| s.iter().map(|t| t.derivative(k)).collect::<Vec<f64>>();
        ProfileJet {
            p: [col(0), col(1), col(2), col(3), col(4)],
            pole,
        }
    }

    /// Exact fundamental forms at parameter `u`.
    pub fn forms(&self, u: f64, opts: &FormOptions) -> Result<FundamentalForms, ModelError> {
        forms_from_profile(self.dim_n, &self.jet(u, false), opts)
    }

    /// Uniform sampling in the parameter. Capped ends are snapped onto the axis.
    pub fn sample(
        &self,
        u0: f64,
        u1: f64,
        nodes: usize,
        ends: [EndCondition; 2],
    ) -> Result<SymmetricAnsatz, ModelError> {
        let mut pts: Vec<Vec<f64>> = (0..nodes)
            .map(|k| self.point(u0 + (u1 - u0) * k as f64 / (nodes - 1) as f64))
            .collect();
        if ends[0] == EndCondition::Capped {
            pts[0][0] = 0.0;
        }
        if ends[1] == EndCondition::Capped {
            pts[nodes - 1][0] = 0.0;
        }
        if ends[0] == EndCondition::Periodic {
            let mut last = pts[0].clone();
            last[1] = pts[nodes - 1][1];
            pts[nodes - 1] = last;
        }
        SymmetricAnsatz::from_points(self.dim_n, self.codim_m, &pts, ends)
    }
}

/// Cylinder of radius `r0` deflected into the first extra normal direction
/// by `w_1 = δ sin z`.
pub fn deflected_cylinder(dim_n: usize, codim_m: usize, r0: f64, delta: f64) -> AnalyticProfile {
    assert!(codim_m >= 2, "deflection needs a second normal direction");
    AnalyticProfile::new(dim_n, codim_m, move |u| {
        let mut p = vec![Taylor::constant(r0), u, u.sin() * delta];
        p.resize(codim_m + 1, Taylor::constant(0.0));
        p
    })
}

/// Chart patch of the ansatz around parameter `u0`, with exponential
/// coordinates on the sphere factor centered at its pole `e_0`.
pub fn ansatz_chart(profile: &AnalyticProfile, u0: f64, spacing: f64, grid: usize) -> ChartPatch {
    let n = profile.dim_n;
    let m = profile.codim_m;
    let mut center = vec![0.0; n];
    center[0] = u0;
    ChartPatch::sample(n, m, &vec![grid; n], &vec![spacing; n], &center, |x| {
        let p = profile.point(x[0]);
        let theta = &x[1..];
        let r = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        let mut out = vec![0.0; n + m];
        out[0] = p[0] * r.cos();
        let sinc = if r > 0.0 { r.sin() / r } else { 1.0 };
        for (a, t) in theta.iter().enumerate() {
            out[a + 1] = p[0] * sinc * t;
        }
        out[n..].copy_from_slice(&p[1..]);
        out
    })
    .expect("valid chart sampling")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShrinkKind {
    Sphere,
    Cylinder,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkingSolution {
    pub kind: ShrinkKind,
    pub initial_radius: f64,
    pub dim_n: usize,
}

impl ShrinkingSolution {
    /// `r² = r₀² - 2kt` with `k = n` for spheres and `n - 1` for cylinders.
    pub fn rate(&self) -> f64 {
        match self.kind {
            ShrinkKind::Sphere => 2.0 * self.dim_n as f64,
            ShrinkKind::Cylinder => 2.0 * (self.dim_n as f64 - 1.0),
        }
    }

    pub fn extinction_time(&self) -> f64 {
        self.initial_radius * self.initial_radius / self.rate()
    }
}

pub fn shrink_radius(s: &ShrinkingSolution, t: f64) -> Result<f64, ModelError> {
    let te = s.extinction_time();
    if t >= te {
        return Err(ModelError::Extinct { t, extinction: te });
    }
    Ok((s.initial_radius * s.initial_radius - s.rate() * t).sqrt())
}

/// Shape of the dumbbell family. `r²(z) = F(|z|)` with `F'' = neck_f2` on
/// the neck, blended by a quintic step of width `transition` into
/// `F'' = -2`, which makes each bulb an exact round cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumbbellShape {
    pub neck_radius: f64,
    pub bulb_radius: f64,
    pub neck_f2: f64,
    pub transition: f64,
    pub nodes: usize,
    pub deflection: f64,
}

struct DumbbellCurve {
    neck2: f64,
    f2: f64,
    z1: f64,
    wt: f64,
    /// Bulb sphere center and radius on the `z > 0` side.
    center: f64,
    radius: f64,
}

fn smooth_step_integrals(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if x >= 1.0 {
        let d = x - 1.0;
        (1.0, 0.5 + d, 1.0 / 7.0 + 0.5 * d + 0.5 * d * d)
    } else {
        let s = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
        let s1 = x.powi(4) * (2.5 - 3.0 * x + x * x);
        let s2 = x.powi(5) * (0.5 - 0.5 * x + x * x / 7.0);
        (s, s1, s2)
    }
}

impl DumbbellCurve {
    fn new(neck: f64, f2: f64, z1: f64, wt: f64) -> Self {
        let mut c = DumbbellCurve {
            neck2: neck * neck,
            f2,
            z1,
            wt,
            center: 0.0,
            radius: 0.0,
        };
        let ye = z1 + wt;
        let (f, fp) = c.graph(ye);
        // F = R² - (y - c)² past the transition
        let center = ye + fp / 2.0;
        c.center = center;
        c.radius = (f + (ye - center).powi(2)).sqrt();
        c
    }

    /// `(F, F')` on the graph part.
    fn graph(&self, y: f64) -> (f64, f64) {
        let c = -2.0 - self.f2;
        let (_, s1, s2) = smooth_step_integrals((y - self.z1) / self.wt);
        (
            self.neck2 + 0.5 * self.f2 * y * y + c * self.wt * self.wt * s2,
            self.f2 * y + c * self.wt * s1,
        )
    }

    fn half_length(&self) -> f64 {
        self.center + self.radius
    }
}

fn curve_for_bulb(neck: f64, bulb: f64, f2: f64, wt: f64) -> Result<DumbbellCurve, ModelError> {
    let radius_at = |z1: f64| DumbbellCurve::new(neck, f2, z1, wt).radius;
    if radius_at(0.0) >= bulb {
        return Err(ModelError::BadShape(
            "transition alone already exceeds the bulb radius".into(),
        ));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while radius_at(hi) < bulb {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(ModelError::BadShape("bulb radius unreachable".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if radius_at(mid) < bulb {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DumbbellCurve::new(neck, f2, 0.5 * (lo + hi), wt))
}

/// Dumbbell with the neck curvature chosen so the total length is `length`.
pub fn dumbbell(
    n: usize,
    m: usize,
    neck_radius: f64,
    bulb_radius: f64,
    length: f64,
    codim_deflection: f64,
) -> Result<SymmetricAnsatz, ModelError> {
    dumbbell_with(
        n,
        m,
        &dumbbell_shape(neck_radius, bulb_radius, length, codim_deflection)?,
    )
}

/// Shape (512 nodes) whose total length is `length`.
pub fn dumbbell_shape(
    neck_radius: f64,
    bulb_radius: f64,
    length: f64,
    codim_deflection: f64,
) -> Result<DumbbellShape, ModelError> {
    if !(neck_radius > 0.0 && neck_radius < bulb_radius) {
        return Err(ModelError::BadShape(format!(
            "need 0 < neck {neck_radius} < bulb {bulb_radius}"
        )));
    }
    if !(length > 4.0 * bulb_radius) {
        return Err(ModelError::BadShape(format!(
            "length {length} must exceed 4 x bulb radius"
        )));
    }
    let wt = bulb_radius;
    let len =
        |f2: f64| curve_for_bulb(neck_radius, bulb_radius, f2, wt).map(|c| 2.0 * c.half_length());
    let (mut lo, mut hi) = (1e-6, 1.5);
    if len(lo)? < length || len(hi)? > length {
        return Err(ModelError::BadShape(format!(
            "length {length} is outside the reachable range"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if len(mid)? > length {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DumbbellShape {
        neck_radius,
        bulb_radius,
        neck_f2: 0.5 * (lo + hi),
        transition: wt,
        nodes: 512,
        deflection: codim_deflection,
    })
}

pub fn dumbbell_with(
    n: usize,
    m: usize,
    shape: &DumbbellShape,
) -> Result<SymmetricAnsatz, ModelError> {
    if !(shape.neck_radius > 0.0 && shape.neck_radius < shape.bulb_radius) {
        return Err(ModelError::BadShape("need 0 < neck < bulb".into()));
    }
    if shape.nodes < 16 {
        return Err(ModelError::BadShape("too few nodes".into()));
    }
    if shape.deflection != 0.0 && m < 2 {
        return Err(ModelError::BadShape(
            "deflection needs codimension at least 2".into(),
        ));
    }
    let c = curve_for_bulb(
        shape.neck_radius,
        shape.bulb_radius,
        shape.neck_f2,
        shape.transition,
    )?;
    let half = c.half_length();
    let ye = c.z1 + c.wt;
    // Half-profile from the neck (y = 0) to the pole: graph part by y, then
    // the round cap by angle. Tabulate arclength finely, then place nodes.
    let fine = 20000;
    let mut table: Vec<(f64, f64, f64)> = Vec::with_capacity(2 * fine + 1); // (s, y, r)
    let mut s = 0.0;
    let mut prev = (0.0, c.graph(0.0).0.sqrt());
    table.push((0.0, prev.0, prev.1));
    for k in 1..=fine {
        let y = ye * k as f64 / fine as f64;
        let r = c.graph(y).0.sqrt();
        s += ((y - prev.0).powi(2) + (r - prev.1).powi(2)).sqrt();
        table.push((s, y, r));
        prev = (y, r);
    }
    let phi0 = ((ye - c.center) / c.radius).clamp(-1.0, 1.0).acos();
    for k in 1..=fine {
        let phi = phi0 * (1.0 - k as f64 / fine as f64);
        let y = c.center + c.radius * phi.cos();
        let r = if k == fine { 0.0 } else { c.radius * phi.sin() };
        s += ((y - prev.0).powi(2) + (r - prev.1).powi(2)).sqrt();
        table.push((s, y, r));
        prev = (y, r);
    }
    let total = s;
    let eval = |target: f64| -> (f64, f64) {
        let k = table
            .partition_point(|e| e.0 < target)
            .clamp(1, table.len() - 1);
        let (s0, y0, _) = table[k - 1];
        let (s1, y1, _) = table[k];
        let t = if s1 > s0 {
            (target - s0) / (s1 - s0)
        } else {
            0.0
        };
        let y = y0 + t * (y1 - y0);
        let r = if y <= ye {
            c.graph(y).0.max(0.0).sqrt()
        } else {
            (c.radius * c.radius - (y - c.center).powi(2))
                .max(0.0)
                .sqrt()
        };
        (y, r)
    };
    let nodes = shape.nodes;
    let mut pts = Vec::with_capacity(nodes);
    let l = 2.0 * half;
    for k in 0..nodes {
        let sg = -total + 2.0 * total * k as f64 / (nodes - 1) as f64;
        let (y, r) = if k == 0 || k == nodes - 1 {
            (half, 0.0)
        } else {
            eval(sg.abs())
        };
        let z = if sg < 0.0 { -y } else { y };
        let mut p = vec![r, z];
        p.resize(m + 1, 0.0);
        if m >= 2 {
            p[2] = shape.deflection * (PI * z / l).cos();
        }
        pts.push(p);
    }
    SymmetricAnsatz::from_points(n, m, &pts, [EndCondition::Capped, EndCondition::Capped])
}
