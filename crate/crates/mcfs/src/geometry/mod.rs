//! Pointwise extrinsic geometry of an immersion.
//!
//! Everything is computed from a [`SurfaceJet`], the ambient partial
//! derivatives of `F` at one chart point. Chart patches fill the jet with
//! finite differences, closed-form models fill it exactly.

mod chart;
mod tensor;

pub use chart::{
    derivative_norms, fundamental_forms, fundamental_forms_along, fundamental_forms_with,
    ChartPatch,
};
pub use tensor::VTensor;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("metric is degenerate (smallest eigenvalue {0:.3e})")]
    DegenerateMetric(f64),
    #[error("differential has rank {0}, expected {1}")]
    RankDeficient(usize, usize),
    #[error("node {node:?} needs {margin} nodes of clearance from the boundary")]
    NotInterior { node: Vec<usize>, margin: usize },
    #[error("bad chart patch: {0}")]
    BadPatch(String),
}

pub const DEFAULT_EPS_H: f64 = 1e-10;

/// Ambient partial derivatives of an immersion at one chart point.
/// `d3` and `d4` are only needed for torsion and derivative norms.
#[derive(Clone, Debug)]
pub struct SurfaceJet {
    pub d1: VTensor,
    pub d2: VTensor,
    pub d3: Option<VTensor>,
    pub d4: Option<VTensor>,
}

impl SurfaceJet {
    pub fn n(&self) -> usize {
        self.d1.n
    }

    pub fn dim(&self) -> usize {
        self.d1.dim
    }

    /// Jet at `x + delta * e_axis` by Taylor expansion, keeping orders 1 and 2.
    fn shifted(&self, axis: usize, delta: f64) -> (VTensor, VTensor) {
        let n = self.n();
        let mut d1 = self.d1.clone();
        let mut d2 = self.d2.clone();
        for a in 0..n {
            let v = d1.get_mut(&[a]);
            for (k, x) in v.iter_mut().enumerate() {
                *x += delta * self.d2.get(&[a, axis])[k];
            }
            if let Some(d3) = &self.d3 {
                for (k, x) in v.iter_mut().enumerate() {
                    *x += 0.5 * delta * delta * d3.get(&[a, axis, axis])[k];
                }
            }
            if let Some(d4) = &self.d4 {
                for (k, x) in v.iter_mut().enumerate() {
                    *x += delta.powi(3) / 6.0 * d4.get(&[a, axis, axis, axis])[k];
                }
            }
        }
        if let Some(d3) = &self.d3 {
            for a in 0..n {
                for b in 0..n {
                    let v = d2.get_mut(&[a, b]);
                    for (k, x) in v.iter_mut().enumerate() {
                        *x += delta * d3.get(&[a, b, axis])[k];
                    }
                    if let Some(d4) = &self.d4 {
                        for (k, x) in v.iter_mut().enumerate() {
                            *x += 0.5 * delta * delta * d4.get(&[a, b, axis, axis])[k];
                        }
                    }
                }
            }
        }
        (d1, d2)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FormOptions {
    pub eps_h: f64,
    pub torsion: bool,
    pub derivatives: bool,
    pub hessian: bool,
}

impl Default for FormOptions {
    fn default() -> Self {
        FormOptions {
            eps_h: DEFAULT_EPS_H,
            torsion: true,
            derivatives: true,
            hessian: false,
        }
    }
}

/// Orthonormal frame of the normal space, `vectors[0] = ν⁺` when `|H| > eps_H`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalFrame {
    pub vectors: Vec<DVector<f64>>,
}

/// Normal connection coefficients `T_{iα}^β = <∂_i ν_α, ν_β>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Torsion {
    pub n: usize,
    pub m: usize,
    pub data: Vec<f64>,
}

impl Torsion {
    pub fn get(&self, i: usize, alpha: usize, beta: usize) -> f64 {
        self.data[(i * self.m + alpha) * self.m + beta]
    }

    /// Largest violation of `T_{iα}^β = -T_{iβ}^α`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for a in 0..self.m {
                for b in 0..self.m {
                    worst = worst.max((self.get(i, a, b) + self.get(i, b, a)).abs());
                }
            }
        }
        worst
    }

    /// Frame-invariant size, `sqrt(sum T²)` over coordinate indices.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct FundamentalForms {
    pub n: usize,
    pub m: usize,
    pub tangent: Vec<DVector<f64>>,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    /// `h_ij`, row-major in `(i, j)`.
    pub second_form: Vec<DVector<f64>>,
    pub mean_curv: DVector<f64>,
    pub norm_a2: f64,
    pub norm_h2: f64,
    pub principal_normal: Option<DVector<f64>>,
    /// Covariant `<h_ij, ν⁺>`.
    pub weingarten_nu: Option<DMatrix<f64>>,
    pub weingarten_minus_norm: Option<f64>,
    pub frame: NormalFrame,
    pub torsion: Option<Torsion>,
    pub grad_a_norm: Option<f64>,
    pub grad_h_norm: Option<f64>,
    pub hess_a_norm: Option<f64>,
}

impl FundamentalForms {
    pub fn h(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.second_form[i * self.n + j]
    }

    pub fn norm_h(&self) -> f64 {
        self.norm_h2.sqrt()
    }

    /// `|A|²/|H|²`, absent when `H` vanishes.
    pub fn ratio(&self) -> Option<f64> {
        if self.norm_h2 > 0.0 {
            Some(self.norm_a2 / self.norm_h2)
        } else {
            None
        }
    }

    /// `|W_ν⁺|²` with the metric.
    pub fn weingarten_nu_norm2(&self) -> Option<f64> {
        self.weingarten_nu.as_ref().map(|w| {
            let mixed = &self.metric_inv * w;
            (&mixed * &mixed).trace()
        })
    }

    /// `|A|² - |W_ν⁺|² - |W_-|²`, zero up to rounding.
    pub fn split_residual(&self) -> Option<f64> {
        let wp = self.weingarten_nu_norm2()?;
        let wm = self.weingarten_minus_norm?;
        Some(self.norm_a2 - wp - wm * wm)
    }

    /// Eigenvalues of `g⁻¹W_ν⁺`, ascending.
    pub fn weingarten_nu_eigenvalues(&self) -> Option<Vec<f64>> {
        let w = self.weingarten_nu.as_ref()?;
        let (l, _) = orthonormalizer(&self.metric)?;
        let s = &l * w * l.transpose();
        let s = (&s + s.transpose()) * 0.5;
        let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        Some(ev)
    }

    /// Second fundamental form in an orthonormal tangent basis.
    pub fn orthonormal_second_form(&self) -> Vec<DVector<f64>> {
        let n = self.n;
        let (l, _) = orthonormalizer(&self.metric).expect("metric checked at construction");
        let mut out = vec![DVector::zeros(self.mean_curv.len()); n * n];
        for a in 0..n {
            for b in 0..n {
                let mut v = DVector::zeros(self.mean_curv.len());
                for i in 0..n {
                    for j in 0..n {
                        let c = l[(a, i)] * l[(b, j)];
                        if c != 0.0 {
                            v += self.h(i, j) * c;
                        }
                    }
                }
                out[a * n + b] = v;
            }
        }
        out
    }

    /// Components `h_{abα}` in orthonormal tangent and normal frames.
    pub fn frame_components(&self) -> Vec<DMatrix<f64>> {
        let n = self.n;
        let hb = self.orthonormal_second_form();
        self.frame
            .vectors
            .iter()
            .map(|nu| DMatrix::from_fn(n, n, |a, b| hb[a * n + b].dot(nu)))
            .collect()
    }

    /// Smallest eigenvalue of the curvature operator on 2-vectors, from
    /// the Gauss equation. Bounds every sectional curvature from below.
    pub fn curvature_operator_min(&self) -> f64 {
        let n = self.n;
        let hb = self.orthonormal_second_form();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let np = pairs.len();
        if np == 0 {
            return 0.0;
        }
        let r = |i: usize, j: usize, k: usize, l: usize| {
            hb[i * n + k].dot(&hb[j * n + l]) - hb[i * n + l].dot(&hb[j * n + k])
        };
        let op = DMatrix::from_fn(np, np, |p, q| {
            let (i, j) = pairs[p];
            let (k, l) = pairs[q];
            r(i, j, k, l)
        });
        let op = (&op + op.transpose()) * 0.5;
        op.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// `L` with `L g Lᵀ = I` (inverse Cholesky factor) and the factor itself.
fn orthonormalizer(g: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let chol = g.clone().cholesky()?;
    let lower = chol.l();
    let inv = lower.clone().try_inverse()?;
    Some((inv, lower))
}

/// `|∇A|² - 3/(n+2) |∇H|²`, nonnegative by Codazzi. Absent without derivative norms.
pub fn kato_check(ff: &FundamentalForms) -> Option<f64> {
    let ga = ff.grad_a_norm?;
    let gh = ff.grad_h_norm?;
    Some(ga * ga - 3.0 / (ff.n as f64 + 2.0) * gh * gh)
}

struct Basics {
    n: usize,
    dim: usize,
    metric: DMatrix<f64>,
    ginv: DMatrix<f64>,
    nproj: DMatrix<f64>,
    h: VTensor,
}

fn basics(d1: &VTensor, d2: &VTensor) -> Result<Basics, GeometryError> {
    let n = d1.n;
    let dim = d1.dim;
    let dmat = DMatrix::from_fn(dim, n, |k, i| d1.get(&[i])[k]);
    let sv = dmat.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv
        .iter()
        .filter(|&&s| s > 1e-10 * smax.max(f64::MIN_POSITIVE))
        .count();
    if rank < n || smax == 0.0 {
        return Err(GeometryError::RankDeficient(
            if smax == 0.0 { 0 } else { rank },
            n,
        ));
    }
    let metric = dmat.transpose() * &dmat;
    let metric = (&metric + metric.transpose()) * 0.5;
    let lmin = metric
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lmin < 1e-12 {
        return Err(GeometryError::DegenerateMetric(lmin));
    }
    let ginv = metric
        .clone()
        .try_inverse()
        .ok_or(GeometryError::DegenerateMetric(lmin))?;
    let ginv = (&ginv + ginv.transpose()) * 0.5;
    let nproj = DMatrix::identity(dim, dim) - &dmat * &ginv * dmat.transpose();
    let mut h = VTensor::zeros(n, 2, dim);
    for i in 0..n {
        for j in 0..n {
            let v = &nproj * DVector::from_column_slice(d2.get(&[i, j]));
            h.get_mut(&[i, j]).copy_from_slice(v.as_slice());
        }
    }
    Ok(Basics {
        n,
        dim,
        metric,
        ginv,
        nproj,
        h,
    })
}

fn mean_curvature(b: &Basics) -> DVector<f64> {
    let mut hv = DVector::zeros(b.dim);
    for i in 0..b.n {
        for j in 0..b.n {
            let c = b.ginv[(i, j)];
            for k in 0..b.dim {
                hv[k] += c * b.h.get(&[i, j])[k];
            }
        }
    }
    hv
}

fn normal_frame(
    b: &Basics,
    plus: Option<&DVector<f64>>,
    seed: Option<&NormalFrame>,
) -> NormalFrame {
    let m = b.dim - b.n;
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut candidates: Vec<DVector<f64>> = Vec::new();
    if let Some(p) = plus {
        candidates.push(p.clone());
    }
    if let Some(s) = seed {
        candidates.extend(s.vectors.iter().cloned());
    }
    for k in 0..b.dim {
        let mut e = DVector::zeros(b.dim);
        e[k] = 1.0;
        candidates.push(e);
    }
    for c in candidates {
        if out.len() == m {
            break;
        }
        let mut v = &b.nproj * c;
        for _ in 0..2 {
            for u in &out {
                let d = u.dot(&v);
                v -= u * d;
            }
        }
        let norm = v.norm();
        if norm > 1e-3 {
            out.push(v / norm);
        }
    }
    NormalFrame { vectors: out }
}

fn principal(hv: &DVector<f64>, eps_h: f64) -> Option<DVector<f64>> {
    let nh = hv.norm();
    if nh > eps_h {
        Some(hv / nh)
    } else {
        None
    }
}

/// Full pointwise package from a jet. `seed` is a frame at a nearby point
/// that keeps the normal frame continuous along a sweep.
pub fn forms_from_jet(
    jet: &SurfaceJet,
    opts: &FormOptions,
    seed: Option<&NormalFrame>,
) -> Result<FundamentalForms, GeometryError> {
    let b = basics(&jet.d1, &jet.d2)?;
    let n = b.n;
    let dim = b.dim;
    let m = dim - n;
    let hv = mean_curvature(&b);
    let norm_h2 = hv.norm_squared();
    let norm_a2 = tensor::full_norm2(&b.h, &b.ginv);
    let plus = principal(&hv, opts.eps_h);
    let frame = normal_frame(&b, plus.as_ref(), seed);

    let (weingarten_nu, weingarten_minus_norm) = match &plus {
        Some(p) => {
            let w = DMatrix::from_fn(n, n, |i, j| {
                DVector::from_column_slice(b.h.get(&[i, j])).dot(p)
            });
            let mut hm = b.h.clone();
            for i in 0..n {
                for j in 0..n {
                    let wij = w[(i, j)];
                    for (k, x) in hm.get_mut(&[i, j]).iter_mut().enumerate() {
                        *x -= wij * p[k];
                    }
                }
            }
            let wm2 = tensor::full_norm2(&hm, &b.ginv).max(0.0);
            (Some(w), Some(wm2.sqrt()))
        }
        None => (None, None),
    };

    let torsion = if opts.torsion && jet.d3.is_some() {
        Some(torsion(jet, &b, &frame, plus.is_some(), opts.eps_h))
    } else {
        None
    };

    let (mut grad_a_norm, mut grad_h_norm, mut hess_a_norm) = (None, None, None);
    if opts.derivatives {
        if let Some(d3) = &jet.d3 {
            let gam = christoffel(&jet.d1, &jet.d2, &b.ginv);
            let c = grad_a(&b, d3, &gam);
            let ga2 = tensor::full_norm2(&c, &b.ginv).max(0.0);
            let gh = grad_h(&b, &c);
            let gh2 = tensor::full_norm2(&gh, &b.ginv).max(0.0);
            grad_a_norm = Some(ga2.sqrt());
            grad_h_norm = Some(gh2.sqrt());
            if opts.hessian {
                if let Some(d4) = &jet.d4 {
                    let dd = hess_a(&b, jet, d3, d4, &gam, &c);
                    hess_a_norm = Some(tensor::full_norm2(&dd, &b.ginv).max(0.0).sqrt());
                }
            }
        }
    }

    let tangent = (0..n)
        .map(|i| DVector::from_column_slice(jet.d1.get(&[i])))
        .collect();
    let second_form = (0..n * n)
        .map(|f| DVector::from_column_slice(b.h.slot(f)))
        .collect();
    Ok(FundamentalForms {
        n,
        m,
        tangent,
        metric: b.metric.clone(),
        metric_inv: b.ginv.clone(),
        second_form,
        mean_curv: hv,
        norm_a2,
        norm_h2,
        principal_normal: plus,
        weingarten_nu,
        weingarten_minus_norm,
        frame,
        torsion,
        grad_a_norm,
        grad_h_norm,
        hess_a_norm,
    })
}

fn torsion(
    jet: &SurfaceJet,
    b: &Basics,
    frame: &NormalFrame,
    use_plus: bool,
    eps_h: f64,
) -> Torsion {
    let n = b.n;
    let m = frame.vectors.len();
    let lmax = b
        .metric
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let amax = tensor::full_norm2(&b.h, &b.ginv).sqrt();
    let delta = 1e-4 * (1.0f64).min(1.0 / amax.max(1e-300)) / lmax.sqrt();
    let mut data = vec![0.0; n * m * m];
    let frame_at = |axis: usize, d: f64| -> Vec<DVector<f64>> {
        let (d1, d2) = jet.shifted(axis, d);
        match basics(&d1, &d2) {
            Ok(bb) => {
                let hv = mean_curvature(&bb);
                let plus = if use_plus {
                    principal(&hv, eps_h.min(0.5 * hv.norm()))
                } else {
                    None
                };
                normal_frame(&bb, plus.as_ref(), Some(frame)).vectors
            }
            Err(_) => frame.vectors.clone(),
        }
    };
    for i in 0..n {
        let fp = frame_at(i, delta);
        let fm = frame_at(i, -delta);
        for a in 0..m {
            let dnu = (&fp[a] - &fm[a]) / (2.0 * delta);
            for c in 0..m {
                data[(i * m + a) * m + c] = dnu.dot(&frame.vectors[c]);
            }
        }
        for a in 0..m {
            for c in (a + 1)..m {
                let ix = (i * m + a) * m + c;
                let iy = (i * m + c) * m + a;
                let s = 0.5 * (data[ix] - data[iy]);
                data[ix] = s;
                data[iy] = -s;
            }
            data[(i * m + a) * m + a] = 0.0;
        }
    }
    Torsion { n, m, data }
}

/// `Γ_ij^a` stored at `(i*n + j)*n + a`.
fn christoffel(d1: &VTensor, d2: &VTensor, ginv: &DMatrix<f64>) -> Vec<f64> {
    let n = d1.n;
    let mut gam = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            let dots: Vec<f64> = (0..n).map(|l| dot(d1.get(&[l]), d2.get(&[i, j]))).collect();
            for a in 0..n {
                gam[(i * n + j) * n + a] = (0..n).map(|l| ginv[(a, l)] * dots[l]).sum();
            }
        }
    }
    gam
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn project(nproj: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let dim = v.len();
    let mut out = vec![0.0; dim];
    for r in 0..dim {
        let mut s = 0.0;
        for c in 0..dim {
            s += nproj[(r, c)] * v[c];
        }
        out[r] = s;
    }
    out
}

/// `C_kij = ∇_k h_ij`, stored at index `[k, i, j]`.
fn grad_a(b: &Basics, d3: &VTensor, gam: &[f64]) -> VTensor {
    let n = b.n;
    let g = |i: usize, j: usize, a: usize| gam[(i * n + j) * n + a];
    let mut c = VTensor::zeros(n, 3, b.dim);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = project(&b.nproj, d3.get(&[i, j, k]));
                for a in 0..n {
                    axpy(&mut v, -g(i, j, a), b.h.get(&[a, k]));
                    axpy(&mut v, -g(k, i, a), b.h.get(&[a, j]));
                    axpy(&mut v, -g(k, j, a), b.h.get(&[i, a]));
                }
                c.get_mut(&[k, i, j]).copy_from_slice(&v);
            }
        }
    }
    c
}

fn grad_h(b: &Basics, c: &VTensor) -> VTensor {
    let n = b.n;
    let mut out = VTensor::zeros(n, 1, b.dim);
    for k in 0..n {
        let mut v = vec![0.0; b.dim];
        for i in 0..n {
            for j in 0..n {
                axpy(&mut v, b.ginv[(i, j)], c.get(&[k, i, j]));
            }
        }
        out.get_mut(&[k]).copy_from_slice(&v);
    }
    out
}

/// `D_lkij = ∇_l ∇_k h_ij`.
fn hess_a(
    b: &Basics,
    jet: &SurfaceJet,
    d3: &VTensor,
    d4: &VTensor,
    gam: &[f64],
    c: &VTensor,
) -> VTensor {
    let n = b.n;
    let dim = b.dim;
    let d1 = &jet.d1;
    let d2 = &jet.d2;
    let g = |i: usize, j: usize, a: usize| gam[(i * n + j) * n + a];
    // Γ^a(X) = g^ab <d1_b, X>
    let gam_of = |x: &[f64]| -> Vec<f64> {
        let dots: Vec<f64> = (0..n).map(|l| dot(d1.get(&[l]), x)).collect();
        (0..n)
            .map(|a| (0..n).map(|l| b.ginv[(a, l)] * dots[l]).sum())
            .collect()
    };
    // ∂_l g^ab
    let mut dginv = vec![DMatrix::<f64>::zeros(n, n); n];
    for (l, dg) in dginv.iter_mut().enumerate() {
        let dgl = DMatrix::from_fn(n, n, |p, q| {
            dot(d2.get(&[p, l]), d1.get(&[q])) + dot(d1.get(&[p]), d2.get(&[q, l]))
        });
        *dg = -(&b.ginv * dgl * &b.ginv);
    }
    // ∂_l Γ_ij^a at ((i*n + j)*n + l)*n + a
    let mut dgam = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let inner: Vec<f64> = (0..n)
                    .map(|q| {
                        dot(d2.get(&[q, l]), d2.get(&[i, j]))
                            + dot(d1.get(&[q]), d3.get(&[i, j, l]))
                    })
                    .collect();
                let base: Vec<f64> = (0..n).map(|q| dot(d1.get(&[q]), d2.get(&[i, j]))).collect();
                for a in 0..n {
                    let mut s = 0.0;
                    for q in 0..n {
                        s += dginv[l][(a, q)] * base[q] + b.ginv[(a, q)] * inner[q];
                    }
                    dgam[((i * n + j) * n + l) * n + a] = s;
                }
            }
        }
    }
    let dg = |i: usize, j: usize, l: usize, a: usize| dgam[((i * n + j) * n + l) * n + a];
    // E_arl = N ∂_l h_ar
    let mut e = VTensor::zeros(n, 3, dim);
    for a in 0..n {
        for r in 0..n {
            for l in 0..n {
                let mut v = project(&b.nproj, d3.get(&[a, r, l]));
                let ga = gam_of(d2.get(&[a, r]));
                for q in 0..n {
                    axpy(&mut v, -ga[q], b.h.get(&[q, l]));
                }
                e.get_mut(&[a, r, l]).copy_from_slice(&v);
            }
        }
    }
    let mut out = VTensor::zeros(n, 4, dim);
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = project(&b.nproj, d4.get(&[i, j, k, l]));
                    let ga = gam_of(d3.get(&[i, j, k]));
                    for a in 0..n {
                        axpy(&mut v, -ga[a], b.h.get(&[a, l]));
                    }
                    for a in 0..n {
                        axpy(&mut v, -dg(i, j, l, a), b.h.get(&[a, k]));
                        axpy(&mut v, -g(i, j, a), e.get(&[a, k, l]));
                        axpy(&mut v, -dg(k, i, l, a), b.h.get(&[a, j]));
                        axpy(&mut v, -g(k, i, a), e.get(&[a, j, l]));
                        axpy(&mut v, -dg(k, j, l, a), b.h.get(&[i, a]));
                        axpy(&mut v, -g(k, j, a), e.get(&[i, a, l]));
                    }
                    for a in 0..n {
                        axpy(&mut v, -g(l, k, a), c.get(&[a, i, j]));
                        axpy(&mut v, -g(l, i, a), c.get(&[k, a, j]));
                        axpy(&mut v, -g(l, j, a), c.get(&[k, i, a]));
                    }
                    out.get_mut(&[l, k, i, j]).copy_from_slice(&v);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
