//! Deformation `Ñ_τ = N + τu ν̂` of an analytic neck and the checks of the
//! metric and curvature expansions against exact forms of `Ñ_τ`.
//!
//! `ν̂ = H/|H|` points inward; with the outward sign convention for the
//! second fundamental form this is the usual `N - τuν⁺`, and `h⁺_ij =
//! ⟨h_ij, ν̂⟩` is positive on a cylinder.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{BendProfile, SurgeryError, SurgeryParams};
use crate::geometry::{FormOptions, FundamentalForms};
use crate::models::AnalyticProfile;
use crate::taylor::Taylor;

fn dot(a: &[Taylor], b: &[Taylor]) -> Taylor {
    a.iter()
        .zip(b)
        .fold(Taylor::constant(0.0), |acc, (x, y)| acc + *x * *y)
}

/// `H/|H|` of the ansatz as a series in the profile parameter.
pub fn principal_normal_series(p: &[Taylor], n: usize) -> Vec<Taylor> {
    let v: Vec<Taylor> = p.iter().map(|x| x.differentiate()).collect();
    let a: Vec<Taylor> = v.iter().map(|x| x.differentiate()).collect();
    let s2 = dot(&v, &v);
    let speed = s2.sqrt();
    let t: Vec<Taylor> = v.iter().map(|x| *x / speed).collect();
    let at = dot(&a, &t);
    let nm1 = (n - 1) as f64;
    let rho = p[0];
    let h: Vec<Taylor> = (0..p.len())
        .map(|c| {
            let kappa = (a[c] - at * t[c]) / s2;
            let e = if c == 0 { 1.0 } else { 0.0 };
            let mu = (t[0] * t[c] - e) / rho;
            kappa + mu * nm1
        })
        .collect();
    let norm = dot(&h, &h).sqrt();
    h.iter().map(|x| *x / norm).collect()
}

/// The bent profile `p + τ u ν̂`.
pub fn deformed_profile(base: &AnalyticProfile, bend: &BendProfile, tau: f64) -> AnalyticProfile {
    let n = base.dim_n;
    let (base, bend) = (base.clone(), bend.clone());
    AnalyticProfile::new(n, base.codim_m, move |x| {
        let p = base.eval(x);
        if tau == 0.0 {
            return p;
        }
        let nu = principal_normal_series(&p, n);
        let u = bend.eval(x).scale(tau);
        p.iter().zip(&nu).map(|(pc, nc)| *pc + u * *nc).collect()
    })
}

/// Residuals at one parameter value. Lemma entries are max-abs matrix or
/// scalar differences; `lemma_iii_printed` uses `τ²` on the torsion term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationResidual {
    pub x: f64,
    pub lemma_i: f64,
    pub lemma_ii: f64,
    pub lemma_iii: f64,
    pub lemma_iii_printed: f64,
    pub thm_iv: f64,
    pub thm_v: f64,
    /// `Σ_β (T_{1+}^β)²`.
    pub torsion_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationAudit {
    pub tau: f64,
    pub residuals: Vec<DeformationResidual>,
}

impl DeformationAudit {
    pub fn max(&self, f: impl Fn(&DeformationResidual) -> f64) -> f64 {
        self.residuals
            .iter()
            .map(|r| f(r).abs())
            .fold(0.0, f64::max)
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

fn plain() -> FormOptions {
    FormOptions {
        torsion: false,
        derivatives: false,
        hessian: false,
        ..Default::default()
    }
}

struct BaseData {
    ff: FundamentalForms,
    hp: DMatrix<f64>,
    tt: f64,
}

fn base_data(neck: &AnalyticProfile, x: f64) -> Result<BaseData, SurgeryError> {
    let ff = neck.forms(x, &plain())?;
    let hp = ff.weingarten_nu.clone().ok_or(SurgeryError::NotANeck {
        epsilon: f64::INFINITY,
        epsilon0: 0.0,
    })?;
    let p = neck.eval(Taylor::variable(x));
    let nu = principal_normal_series(&p, neck.dim_n);
    let dnu: Vec<f64> = nu.iter().map(|c| c.derivative(1)).collect();
    let t: Vec<f64> = p.iter().map(|c| c.derivative(1)).collect();
    let tn = t.iter().map(|v| v * v).sum::<f64>();
    let along = dnu.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() / tn;
    let tt = dnu
        .iter()
        .zip(&t)
        .map(|(d, tc)| (d - along * tc).powi(2))
        .sum();
    Ok(BaseData { ff, hp, tt })
}

fn e00(n: usize, v: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(0, 0)] = v;
    m
}

/// `Σ_{ijk} h⁺_j^k ⟨h_ik, h^{ij}⟩`.
fn cubic_term(ff: &FundamentalForms, hp: &DMatrix<f64>) -> f64 {
    let n = ff.n;
    let gi = &ff.metric_inv;
    let hpm = hp * gi;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            // h^{ij}
            let mut up = ff.h(0, 0) * 0.0;
            for a in 0..n {
                for b in 0..n {
                    up += ff.h(a, b) * (gi[(i, a)] * gi[(j, b)]);
                }
            }
            for k in 0..n {
                total += hpm[(j, k)] * ff.h(i, k).dot(&up);
            }
        }
    }
    total
}

/// Bend an analytic neck and audit the expansions at `xs`.
pub fn deform_neck(
    neck: &AnalyticProfile,
    epsilon: f64,
    params: &SurgeryParams,
    bend: &BendProfile,
    tau: f64,
    xs: &[f64],
) -> Result<(AnalyticProfile, DeformationAudit), SurgeryError> {
    if epsilon > params.epsilon0 {
        return Err(SurgeryError::NotANeck {
            epsilon,
            epsilon0: params.epsilon0,
        });
    }
    for &x in xs {
        let r = neck.point(x)[0];
        let (lhs, ok) = bend.smallness(x, tau, r);
        if !ok {
            return Err(SurgeryError::SmallnessViolated { x, lhs, r });
        }
    }
    let n = neck.dim_n;
    let h = 0.05;
    let at = |t: f64| deformed_profile(neck, bend, t);
    let (p_tau, p_h, p_2h) = (at(tau), at(h), at(2.0 * h));
    let mut residuals = Vec::with_capacity(xs.len());
    for &x in xs {
        let base = base_data(neck, x)?;
        let (g, hp, ff0) = (&base.ff.metric, &base.hp, &base.ff);
        let (u, u1, u2) = bend.values(x);
        let ff_t = p_tau.forms(x, &plain())?;
        let (g_h, g_2h) = (
            p_h.forms(x, &plain())?.metric,
            p_2h.forms(x, &plain())?.metric,
        );
        let hh = hp * &ff0.metric_inv * hp;
        let tt = e00(n, base.tt);
        let pred_i = g + e00(n, tau * tau * u1 * u1) + &hh * (tau * tau * u * u)
            - hp * (2.0 * tau * u)
            + &tt * (tau * tau * u * u);
        let lemma_i = max_abs(&(&ff_t.metric - pred_i));
        // g̃(τ) is exactly quadratic in τ
        let y = (&g_2h - &g_h * 2.0 + g) / (2.0 * h * h);
        let xlin = (&g_h * 4.0 - &g_2h - g * 3.0) / (2.0 * h);
        let dg = &xlin + &y * (2.0 * tau);
        let pred_ii = hp * (-2.0 * u)
            + e00(n, 2.0 * tau * u1 * u1)
            + &hh * (2.0 * tau * u * u)
            + &tt * (2.0 * tau * u * u);
        let lemma_ii = max_abs(&(&dg - pred_ii));
        let gt = &ff_t.metric;
        let gti = &ff_t.metric_inv;
        let sq = gt.determinant().sqrt();
        let measured = 0.5 * sq * (gti * &dg).trace();
        let core = hp * (-u) + e00(n, tau * u1 * u1) + &hh * (tau * u * u);
        let pred_iii = sq * (gti * (&core + &tt * (tau * u * u))).trace();
        let pred_iii_printed = sq * (gti * (&core + &tt * (tau * tau * u * u))).trace();
        let gi = &ff0.metric_inv;
        let hp_up00 = (gi * hp * gi)[(0, 0)];
        let pred_iv = ff0.norm_a2 + 2.0 * tau * u2 * hp_up00 + 2.0 * tau * u * cubic_term(ff0, hp);
        let hpm = hp * gi;
        let norm_h = ff0.norm_h2.sqrt();
        let pred_v =
            ff0.norm_h2 + 2.0 * tau * norm_h * (u2 * gi[(0, 0)] + u * (&hpm * &hpm).trace());
        residuals.push(DeformationResidual {
            x,
            lemma_i,
            lemma_ii,
            lemma_iii: measured - pred_iii,
            lemma_iii_printed: measured - pred_iii_printed,
            thm_iv: ff_t.norm_a2 - pred_iv,
            thm_v: ff_t.norm_h2 - pred_v,
            torsion_sq: base.tt,
        });
    }
    Ok((p_tau, DeformationAudit { tau, residuals }))
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// One corollary inequality: smallest `rhs - lhs` over its interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorCurvItem {
    pub name: String,
    pub interval: (f64, f64),
    pub worst_margin: f64,
    pub worst_at: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorCurvAudit {
    pub tau: f64,
    pub b: f64,
    pub lambda: f64,
    pub items: Vec<CorCurvItem>,
}

impl CorCurvAudit {
    /// Margins below `-tol` count as failures.
    pub fn failures(&self, tol: f64) -> Vec<String> {
        self.items
            .iter()
            .filter(|i| i.worst_margin < -tol)
            .map(|i| {
                format!(
                    "{}: margin {:e} at zeta {}",
                    i.name, i.worst_margin, i.worst_at
                )
            })
            .collect()
    }
}

/// Curvature comparisons between the unit cylinder and its standard bend,
/// at equal `ζ`, with `f` continued past `3Λ`.
pub fn cor_curv_audit(
    n: usize,
    m: usize,
    params: &SurgeryParams,
    samples: usize,
) -> Result<CorCurvAudit, SurgeryError> {
    let (lambda, tau, b) = (params.lambda, params.tau, params.b);
    let cyl = AnalyticProfile::cylinder(n, m, 1.0);
    let bend = BendProfile::standard(1.0, b, lambda);
    let bent = deformed_profile(&cyl, &bend, tau);
    let c2 = 1.0 / (n as f64 - 2.0);
    let c1 = 1.0 / (n as f64 - 1.0);
    struct Pt {
        zeta: f64,
        h: f64,
        ht: f64,
        a2: f64,
        a2t: f64,
        h2: f64,
        h2t: f64,
        vol: f64,
        volt: f64,
        u: f64,
        u2: f64,
    }
    let eval = |zeta: f64| -> Result<Pt, SurgeryError> {
        let f0 = cyl.forms(zeta, &plain())?;
        let f1 = bent.forms(zeta, &plain())?;
        let (u, _, u2) = bend.values(zeta);
        Ok(Pt {
            zeta,
            h: f0.norm_h2.sqrt(),
            ht: f1.norm_h2.sqrt(),
            a2: f0.norm_a2,
            a2t: f1.norm_a2,
            h2: f0.norm_h2,
            h2t: f1.norm_h2,
            vol: f0.metric.determinant().sqrt(),
            volt: f1.metric.determinant().sqrt(),
            u,
            u2,
        })
    };
    let grid = |lo: f64, hi: f64| -> Result<Vec<Pt>, SurgeryError> {
        (0..=samples)
            .map(|k| eval(lo * lambda + (hi - lo) * lambda * k as f64 / samples as f64))
            .collect()
    };
    let item = |name: &str, lo: f64, hi: f64, pts: &[Pt], margin: &dyn Fn(&Pt) -> f64| {
        let (worst_margin, worst_at) = pts
            .iter()
            .map(|p| (margin(p), p.zeta))
            .fold((f64::INFINITY, lo), |a, b| if b.0 < a.0 { b } else { a });
        CorCurvItem {
            name: name.into(),
            interval: (lo * lambda, hi * lambda),
            worst_margin,
            worst_at,
        }
    };
    let full = grid(1.0, 4.0)?;
    let mid = grid(2.0, 3.0)?;
    let bent_part = grid(1.0, 3.0)?;
    let items = vec![
        item("1: |H~| >= |H|", 1.0, 4.0, &full, &|p| p.ht - p.h),
        item(
            "1: pinching difference non-increasing",
            1.0,
            4.0,
            &full,
            &|p| (p.a2 - c2 * p.h2) - (p.a2t - c2 * p.h2t),
        ),
        item("1: volume element non-increasing", 1.0, 4.0, &full, &|p| {
            p.vol - p.volt
        }),
        item("2: strictly spherically pinched", 2.0, 3.0, &mid, &|p| {
            -0.5 * tau * p.u2 - (p.a2t - c1 * p.h2t)
        }),
        item("2: strict pinching improvement", 2.0, 3.0, &mid, &|p| {
            (p.a2 - c2 * p.h2 - 0.5 * tau * p.u2) - (p.a2t - c2 * p.h2t)
        }),
        item("3: pinching ratio non-increasing", 1.0, 4.0, &full, &|p| {
            (p.a2 - c2 * p.h2) / p.h2 - (p.a2t - c2 * p.h2t) / p.h2t
        }),
        item("4: |H~| >= |H| + tau u''/2", 1.0, 3.0, &bent_part, &|p| {
            p.ht - p.h - 0.5 * tau * p.u2
        }),
        item("4: volume element drop", 1.0, 3.0, &bent_part, &|p| {
            p.vol * (1.0 - 0.5 * tau * p.u * p.h) - p.volt
        }),
    ];
    Ok(CorCurvAudit {
        tau,
        b,
        lambda,
        items,
    })
}

/// Largest `τ` among `candidates` whose corollary audit on the unit cylinder
/// has no margin below `-tol`.
pub fn calibrate_tau(
    n: usize,
    m: usize,
    params: &SurgeryParams,
    candidates: &[f64],
    samples: usize,
    tol: f64,
) -> Result<Option<CorCurvAudit>, SurgeryError> {
    let mut best: Option<CorCurvAudit> = None;
    for &tau in candidates {
        let audit = cor_curv_audit(n, m, &SurgeryParams { tau, ..*params }, samples)?;
        if audit.failures(tol).is_empty() && best.as_ref().map_or(true, |b| tau > b.tau) {
            best = Some(audit);
        }
    }
    Ok(best)
}
