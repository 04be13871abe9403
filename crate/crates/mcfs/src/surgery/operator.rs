//! Standard surgery on a sampled profile.

use serde::{Deserialize, Serialize};

use super::{
    blend_unchecked, build_cap, transition, Cap, CorCurvItem, SurgeryError, SurgeryParams,
};
use crate::models::{dist, profile_curvature, EndCondition, ProfileCurvature, SymmetricAnsatz};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// The piece with arclength below the cut.
    Before,
    After,
}

/// Straight cylinder through the cross-section at arclength `s0`: center
/// and radius of the section, axis along the averaged section normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestCylinder {
    pub s0: f64,
    /// Meridian point `[0, z, w..]`.
    pub center: Vec<f64>,
    /// Unit meridian vector with zero radial part.
    pub axis: Vec<f64>,
    pub r0: f64,
}

fn segment(s: &[f64], s0: f64) -> (usize, f64) {
    let k = s.partition_point(|&x| x <= s0).clamp(1, s.len() - 1) - 1;
    (k, ((s0 - s[k]) / (s[k + 1] - s[k])).clamp(0.0, 1.0))
}

pub fn best_cylinder(a: &SymmetricAnsatz, s0: f64) -> BestCylinder {
    let s = a.arclength();
    let (k, t) = segment(&s, s0);
    let (p, q) = (a.point(k), a.point(k + 1));
    let mut center: Vec<f64> = p
        .iter()
        .zip(&q)
        .map(|(x, y)| x * (1.0 - t) + y * t)
        .collect();
    let r0 = center[0];
    center[0] = 0.0;
    let n = a.dim_n;
    let (c0, c1) = (
        profile_curvature(&a.profile_jet(k), n),
        profile_curvature(&a.profile_jet(k + 1), n),
    );
    let mut axis: Vec<f64> = c0
        .tangent
        .iter()
        .zip(&c1.tangent)
        .map(|(x, y)| x * (1.0 - t) + y * t)
        .collect();
    // the radial part averages out over the section
    axis[0] = 0.0;
    let l = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    axis.iter_mut().for_each(|x| *x /= l);
    BestCylinder {
        s0,
        center,
        axis,
        r0,
    }
}

impl BestCylinder {
    fn at(&self, d: f64, radius: f64) -> Vec<f64> {
        let mut p: Vec<f64> = self
            .center
            .iter()
            .zip(&self.axis)
            .map(|(c, a)| c + d * a)
            .collect();
        p[0] = radius;
        p
    }

    fn shifted(&self, dz: f64, ds: f64) -> Self {
        let mut out = self.clone();
        out.center[1] += dz;
        out.s0 += ds;
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub s0: f64,
    /// First node past the crossing.
    pub node: usize,
    pub r_star: f64,
    /// Node with radius at least `2r*` beyond the site.
    pub tail_node: usize,
}

/// Walk from the high-curvature node `from` in direction `dir` (±1) to the
/// first crossing of `r* = (n-1)/H₁`, then require a section with radius
/// `≥ 2r*` further on. Periodic profiles are not wrapped.
pub fn surgery_site_selection(
    a: &SymmetricAnsatz,
    from: usize,
    dir: i32,
    h1: f64,
) -> Result<Site, SurgeryError> {
    let r_star = (a.dim_n - 1) as f64 / h1;
    let s = a.arclength();
    let len = a.len() as i64;
    if a.radius[from] >= r_star {
        return Err(SurgeryError::NoSuitableSite(format!(
            "start radius {} is not below r* = {r_star}",
            a.radius[from]
        )));
    }
    let mut k = from as i64;
    loop {
        let next = k + dir as i64;
        if next < 0 || next >= len || a.is_pole(next as usize) {
            return Err(SurgeryError::NoSuitableSite(format!(
                "no section reaches r* = {r_star}"
            )));
        }
        if a.radius[next as usize] >= r_star {
            break;
        }
        k = next;
    }
    let (i, j) = (k as usize, (k + dir as i64) as usize);
    let t = (r_star - a.radius[i]) / (a.radius[j] - a.radius[i]);
    let s0 = s[i] + t * (s[j] - s[i]);
    let mut m = j as i64;
    while m >= 0 && m < len && !a.is_pole(m as usize) {
        if a.radius[m as usize] >= 2.0 * r_star {
            return Ok(Site {
                s0,
                node: j,
                r_star,
                tail_node: m as usize,
            });
        }
        m += dir as i64;
    }
    Err(SurgeryError::NoSuitableSite(format!(
        "no section with radius 2r* = {} past the site",
        2.0 * r_star
    )))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgeryAudit {
    pub s0: f64,
    pub r0: f64,
    pub center: Vec<f64>,
    pub axis: Vec<f64>,
    pub tau: f64,
    pub b: f64,
    pub lambda: f64,
    pub cap_radius: f64,
    pub cap_length: f64,
    pub cap_max_h: f64,
    pub cap_max_ratio: f64,
    pub modified_nodes: usize,
    pub unchanged_nodes: usize,
    /// Bent nodes next to the cap left out of the node comparison.
    pub junction_nodes: usize,
    pub items: Vec<CorCurvItem>,
}

impl SurgeryAudit {
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

#[derive(Clone, Debug)]
pub struct SurgeryOutcome {
    /// Pieces in arclength order.
    pub components: Vec<SymmetricAnsatz>,
    pub sides: Vec<Side>,
    /// Axial interval replaced, `z₀ ∓ 4Λr₀` along the axis.
    pub z_interval: (f64, f64),
    pub audit: SurgeryAudit,
}

struct Chain {
    pts: Vec<Vec<f64>>,
    s: Vec<f64>,
    curv: Vec<ProfileCurvature>,
}

impl Chain {
    fn open(a: &SymmetricAnsatz) -> Self {
        let curv = (0..a.len())
            .map(|k| profile_curvature(&a.profile_jet(k), a.dim_n))
            .collect();
        Chain {
            pts: a.points(),
            s: a.arclength(),
            curv,
        }
    }

    /// Two periods laid end to end, without the duplicate node in between.
    fn unrolled(a: &SymmetricAnsatz) -> Self {
        let base = Chain::open(a);
        let period = a.period().expect("periodic profile");
        let total = base.s[a.len() - 1];
        let mut out = Chain {
            pts: Vec::new(),
            s: Vec::new(),
            curv: Vec::new(),
        };
        for rep in 0..2 {
            for k in 0..a.len() - 1 {
                let mut p = base.pts[k].clone();
                p[1] += rep as f64 * period;
                out.pts.push(p);
                out.s.push(base.s[k] + rep as f64 * total);
                out.curv.push(base.curv[k].clone());
            }
        }
        out
    }
}

/// Half-width of the curvature stencil.
const STENCIL: usize = 2;

/// Per-node data for the corollary comparison.
struct Modified {
    zeta: f64,
    new_index: usize,
    old: ProfileCurvature,
    old_density: f64,
}

struct Piece {
    pts: Vec<Vec<f64>>,
    modified: Vec<Modified>,
    unchanged: usize,
    junction_nodes: usize,
    cap: Cap,
}

fn density(pts: &[Vec<f64>], k: usize, n: usize) -> f64 {
    let (i, j) = (k.saturating_sub(1), (k + 1).min(pts.len() - 1));
    pts[k][0].powi(n as i32 - 1) * dist(&pts[i], &pts[j]) / (j - i) as f64
}

/// Nodes of `chain` on `side` of the cut `cyl`, bent and blended, followed
/// (or preceded) by the cap. `range` limits the chain indices considered.
fn build_piece(
    chain: &Chain,
    range: std::ops::Range<usize>,
    cyl: &BestCylinder,
    side: Side,
    params: &SurgeryParams,
    n: usize,
) -> Result<Piece, SurgeryError> {
    let (lambda, tau, b) = (params.lambda, params.tau, params.b);
    let r0 = cyl.r0;
    let sign = if side == Side::Before { -1.0 } else { 1.0 };
    // cap from the bent cylinder at ζ = 3Λ
    let (f3, f3p, f3pp) = blend_unchecked(3.0 * lambda, b, lambda);
    let r_start = r0 * (1.0 - tau * f3);
    let slope = -tau * f3p;
    let k0 = (-tau * f3pp / r0) / (1.0 + slope * slope).powf(1.5);
    let cap = build_cap(r_start, slope, k0, params.cap_ramp * r0)?;
    if cap.length > lambda * r0 {
        return Err(SurgeryError::BadParams(format!(
            "cap length {} does not fit in Lambda r0 = {}",
            cap.length,
            lambda * r0
        )));
    }
    let idx: Vec<usize> = range
        .filter(|&k| sign * (chain.s[k] - cyl.s0) > 0.0)
        .collect();
    let mut body: Vec<(usize, Vec<f64>, Option<f64>)> = Vec::new();
    let mut last_bent = None;
    for &k in &idx {
        let dist_cut = (chain.s[k] - cyl.s0).abs();
        let zeta = 4.0 * lambda - dist_cut / r0;
        if zeta < lambda {
            body.push((k, chain.pts[k].clone(), None));
        } else if zeta < 3.0 * lambda {
            let c = &chain.curv[k];
            let hn = c.norm_h2.sqrt();
            let u = r0 * blend_unchecked(zeta, b, lambda).0;
            let bent: Vec<f64> = chain.pts[k]
                .iter()
                .zip(&c.h)
                .map(|(p, h)| p + tau * u * h / hn)
                .collect();
            let cyl_pt = cyl.at(sign * dist_cut, r0 - tau * u);
            let phi = transition(zeta, lambda).0;
            let p = bent
                .iter()
                .zip(&cyl_pt)
                .map(|(x, y)| phi * x + (1.0 - phi) * y)
                .collect();
            body.push((k, p, Some(zeta)));
            if last_bent.map_or(true, |(_, d)| dist_cut < d) {
                last_bent = Some((k, dist_cut));
            }
        }
    }
    // continue the node spacing of the bent part into the cap
    let (h_cap, start) = match last_bent {
        Some((k, d)) => {
            let j = if side == Side::Before {
                k.saturating_sub(1)
            } else {
                (k + 1).min(chain.s.len() - 1)
            };
            let h = (chain.s[k] - chain.s[j]).abs().min(cap.length / 24.0);
            (h, (h - (d - lambda * r0)).max(0.0))
        }
        None => (cap.length / 24.0, 0.0),
    };
    let cap_pts: Vec<Vec<f64>> = cap
        .nodes_from(start, h_cap)
        .into_iter()
        .map(|(x, r)| cyl.at(sign * (lambda * r0 - x), r))
        .collect();
    let mut pts = Vec::new();
    let mut marks = Vec::new();
    if side == Side::After {
        pts.extend(cap_pts.iter().rev().cloned());
    }
    for (k, p, z) in body {
        if let Some(zeta) = z {
            marks.push((k, pts.len(), zeta));
        }
        pts.push(p);
    }
    let unchanged = pts.len()
        - marks.len()
        - if side == Side::After {
            cap_pts.len()
        } else {
            0
        };
    // the difference stencil of these nodes reaches into the cap, whose
    // curvature is audited in closed form instead
    let junction = match side {
        Side::Before => pts.len().saturating_sub(STENCIL)..pts.len(),
        Side::After => cap_pts.len()..cap_pts.len() + STENCIL,
    };
    let before_filter = marks.len();
    marks.retain(|m| !junction.contains(&m.1));
    let junction_nodes = before_filter - marks.len();
    if side == Side::Before {
        pts.extend(cap_pts);
    }
    let old_pts = &chain.pts;
    let modified = marks
        .into_iter()
        .map(|(k, new_index, zeta)| Modified {
            zeta,
            new_index,
            old: chain.curv[k].clone(),
            old_density: density(old_pts, k, n),
        })
        .collect();
    Ok(Piece {
        pts,
        modified,
        unchanged,
        junction_nodes,
        cap,
    })
}

fn piece_items(
    pieces: &[(&Piece, &SymmetricAnsatz)],
    params: &SurgeryParams,
    r0: f64,
) -> Vec<CorCurvItem> {
    let n = pieces[0].1.dim_n;
    let c1 = 1.0 / (n as f64 - 1.0);
    let c2 = 1.0 / (n as f64 - 2.0);
    let (lambda, tau, b) = (params.lambda, params.tau, params.b);
    let mut worst: Vec<(f64, f64)> = vec![(f64::INFINITY, 0.0); 8];
    for (piece, a) in pieces {
        let pts = a.points();
        for m in &piece.modified {
            let new = profile_curvature(&a.profile_jet(m.new_index), n);
            let (h, ht) = (m.old.norm_h2.sqrt(), new.norm_h2.sqrt());
            let (a2, a2t, h2, h2t) = (m.old.norm_a2, new.norm_a2, m.old.norm_h2, new.norm_h2);
            let (f, _, f2) = blend_unchecked(m.zeta, b, lambda);
            let u = r0 * f;
            // ½τ r₀u'' scaled to the neck: u'' = f''/r₀ in arclength
            let bonus = 0.5 * tau * f2 / (r0 * r0);
            let vol = m.old_density;
            let volt = density(&pts, m.new_index, n);
            let z = m.zeta;
            let margins = [
                Some(ht - h),
                Some((a2 - c2 * h2) - (a2t - c2 * h2t)),
                Some(vol - volt),
                (z >= 2.0 * lambda).then(|| -bonus - (a2t - c1 * h2t)),
                (z >= 2.0 * lambda).then(|| (a2 - c2 * h2 - bonus) - (a2t - c2 * h2t)),
                Some((a2 - c2 * h2) / h2 - (a2t - c2 * h2t) / h2t),
                Some(ht - h - bonus * r0),
                Some(vol * (1.0 - 0.5 * tau * u * h) - volt),
            ];
            for (w, mg) in worst.iter_mut().zip(margins) {
                if let Some(v) = mg {
                    if v < w.0 {
                        *w = (v, z);
                    }
                }
            }
        }
    }
    let names = [
        ("1: |H~| >= |H|", 1.0, 3.0),
        ("1: pinching difference non-increasing", 1.0, 3.0),
        ("1: volume element non-increasing", 1.0, 3.0),
        ("2: strictly spherically pinched", 2.0, 3.0),
        ("2: strict pinching improvement", 2.0, 3.0),
        ("3: pinching ratio non-increasing", 1.0, 3.0),
        ("4: |H~| >= |H| + tau u''/2", 1.0, 3.0),
        ("4: volume element drop", 1.0, 3.0),
    ];
    names
        .iter()
        .zip(worst)
        .map(|((name, lo, hi), (m, at))| CorCurvItem {
            name: name.to_string(),
            interval: (lo * lambda, hi * lambda),
            worst_margin: if m.is_finite() { m } else { 0.0 },
            worst_at: at,
        })
        .collect()
}

/// Standard surgery at arclength `s0`, keeping the pieces on `keep`.
pub fn standard_surgery(
    a: &SymmetricAnsatz,
    s0: f64,
    params: &SurgeryParams,
    keep: &[Side],
) -> Result<SurgeryOutcome, SurgeryError> {
    params.validate()?;
    let n = a.dim_n;
    let cyl = best_cylinder(a, s0);
    let r0 = cyl.r0;
    let reach = 4.0 * params.lambda * r0;
    let s = a.arclength();
    let total = s[a.len() - 1];
    let mut built: Vec<(Side, Piece, SymmetricAnsatz)> = Vec::new();
    if let Some(period) = a.period() {
        if total < 2.0 * reach {
            return Err(SurgeryError::NeckTooShort {
                need: 2.0 * reach,
                have: total,
            });
        }
        let chain = Chain::unrolled(a);
        let start = chain.s.partition_point(|&x| x <= s0);
        let end = chain.s.partition_point(|&x| x < s0 + total);
        let second = cyl.shifted(period, total);
        let mid = s0 + 0.5 * total;
        let split = chain.s.partition_point(|&x| x < mid);
        let after = build_piece(&chain, start..split, &cyl, Side::After, params, n)?;
        let before = build_piece(&chain, split..end, &second, Side::Before, params, n)?;
        let mut pts = after.pts.clone();
        let offset = pts.len();
        pts.extend(before.pts.iter().cloned());
        let comp = SymmetricAnsatz::from_points(n, a.codim_m, &pts, [EndCondition::Capped; 2])?;
        let mut merged = Piece {
            pts: pts.clone(),
            modified: after.modified,
            unchanged: after.unchanged + before.unchanged,
            junction_nodes: after.junction_nodes + before.junction_nodes,
            cap: after.cap.clone(),
        };
        merged
            .modified
            .extend(before.modified.into_iter().map(|mut m| {
                m.new_index += offset;
                m
            }));
        built.push((Side::After, merged, comp));
    } else {
        for &side in keep {
            let (lo, hi) = match side {
                Side::Before => (s0 - reach, s0),
                Side::After => (s0, s0 + reach),
            };
            if lo < s[0] || hi > total {
                let have = if side == Side::Before {
                    s0 - s[0]
                } else {
                    total - s0
                };
                return Err(SurgeryError::NeckTooShort { need: reach, have });
            }
            let chain = Chain::open(a);
            let piece = build_piece(&chain, 0..a.len(), &cyl, side, params, n)?;
            let ends = match side {
                Side::Before => [a.ends[0], EndCondition::Capped],
                Side::After => [EndCondition::Capped, a.ends[1]],
            };
            let comp = SymmetricAnsatz::from_points(n, a.codim_m, &piece.pts, ends)?;
            built.push((side, piece, comp));
        }
    }
    let refs: Vec<(&Piece, &SymmetricAnsatz)> = built.iter().map(|(_, p, c)| (p, c)).collect();
    let items = if refs.is_empty() {
        Vec::new()
    } else {
        piece_items(&refs, params, r0)
    };
    let cap = built.first().map(|(_, p, _)| p.cap.clone());
    let (cap_max_h, cap_max_ratio) = cap.as_ref().map(|c| c.extremes(n)).unwrap_or((0.0, 0.0));
    let audit = SurgeryAudit {
        s0,
        r0,
        center: cyl.center.clone(),
        axis: cyl.axis.clone(),
        tau: params.tau,
        b: params.b,
        lambda: params.lambda,
        cap_radius: cap.as_ref().map_or(0.0, |c| c.rho_c),
        cap_length: cap.as_ref().map_or(0.0, |c| c.length),
        cap_max_h,
        cap_max_ratio,
        modified_nodes: built.iter().map(|(_, p, _)| p.modified.len()).sum(),
        unchanged_nodes: built.iter().map(|(_, p, _)| p.unchanged).sum(),
        junction_nodes: built.iter().map(|(_, p, _)| p.junction_nodes).sum(),
        items,
    };
    if params.strict_audit {
        let fails = audit.failures(1e-8 / (r0 * r0));
        if !fails.is_empty() {
            return Err(SurgeryError::AuditFailed(fails));
        }
    }
    let z0 = cyl.center[1];
    let az = cyl.axis[1];
    Ok(SurgeryOutcome {
        sides: built.iter().map(|(s, _, _)| *s).collect(),
        components: built.into_iter().map(|(_, _, c)| c).collect(),
        z_interval: (z0 - reach * az, z0 + reach * az),
        audit,
    })
}
