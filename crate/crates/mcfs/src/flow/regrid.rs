//! Redistribution of profile nodes by arclength, equidistributing a
//! curvature-weighted monitor.

use super::FlowParams;
use crate::models::{dist, EndCondition, ModelError, ProfileCurvature, SymmetricAnsatz};

/// Monitor density `max(1, |A| h̄ / resolution)`, smoothed.
fn monitor(a: &SymmetricAnsatz, curv: &[ProfileCurvature], params: &FlowParams) -> Vec<f64> {
    let pts = a.points();
    let total: f64 = pts.windows(2).map(|w| dist(&w[0], &w[1])).sum();
    let hbar = total / (a.len() - 1) as f64;
    let mut m: Vec<f64> = curv
        .iter()
        .map(|c| (c.norm_a2.sqrt() * hbar / params.regrid_resolution).max(1.0))
        .collect();
    let n = m.len();
    for _ in 0..4 {
        let prev = m.clone();
        for k in 0..n {
            let l = prev[k.saturating_sub(1)];
            let r = prev[(k + 1).min(n - 1)];
            m[k] = 0.25 * l + 0.5 * prev[k] + 0.25 * r;
        }
    }
    m
}

/// Segment weights `Δs_k · (M_k + M_{k+1}) / 2`.
fn weights(a: &SymmetricAnsatz, m: &[f64]) -> Vec<f64> {
    let pts = a.points();
    (0..a.len() - 1)
        .map(|k| dist(&pts[k], &pts[k + 1]) * 0.5 * (m[k] + m[k + 1]))
        .collect()
}

pub fn needs_regrid(a: &SymmetricAnsatz, curv: &[ProfileCurvature], params: &FlowParams) -> bool {
    let w = weights(a, &monitor(a, curv, params));
    let hi = w.iter().copied().fold(0.0, f64::max);
    let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
    hi > params.regrid_ratio * lo
}

/// Place the same number of nodes so that every segment carries equal
/// monitor weight. Positions are cubic Hermite interpolants in the node
/// parameter; end nodes are kept.
pub fn regrid(
    a: &SymmetricAnsatz,
    curv: &[ProfileCurvature],
    params: &FlowParams,
) -> Result<SymmetricAnsatz, ModelError> {
    let len = a.len();
    let pts = a.points();
    let tangents: Vec<Vec<f64>> = (0..len).map(|k| a.profile_jet(k).p[1].clone()).collect();
    let w = weights(a, &monitor(a, curv, params));
    let mut cum = vec![0.0; len];
    for k in 1..len {
        cum[k] = cum[k - 1] + w[k - 1];
    }
    let total = cum[len - 1];
    let mut out = Vec::with_capacity(len);
    out.push(pts[0].clone());
    for j in 1..len - 1 {
        let target = total * j as f64 / (len - 1) as f64;
        let k = cum.partition_point(|&c| c <= target).clamp(1, len - 1) - 1;
        let t = (target - cum[k]) / (cum[k + 1] - cum[k]);
        let (h00, h10, h01, h11) = (
            2.0 * t * t * t - 3.0 * t * t + 1.0,
            t * t * t - 2.0 * t * t + t,
            -2.0 * t * t * t + 3.0 * t * t,
            t * t * t - t * t,
        );
        let p: Vec<f64> = (0..pts[0].len())
            .map(|c| {
                h00 * pts[k][c]
                    + h10 * tangents[k][c]
                    + h01 * pts[k + 1][c]
                    + h11 * tangents[k + 1][c]
            })
            .collect();
        out.push(p);
    }
    out.push(pts[len - 1].clone());
    if a.ends[0] == EndCondition::Periodic {
        let mut last = out[0].clone();
        last[1] = pts[len - 1][1];
        out[len - 1] = last;
    }
    SymmetricAnsatz::from_points(a.dim_n, a.codim_m, &out, a.ends)
}
