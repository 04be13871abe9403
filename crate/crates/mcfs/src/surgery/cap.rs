//! Axially symmetric cap closing a bent neck end.
//!
//! In the half-plane `(X, R)` with `X` running toward the cut, the meridian
//! starts at the bent cylinder's end point with its slope and curvature,
//! ramps its curvature to `-1/ρ_c` by a quintic smoothstep over a fixed
//! length, and finishes with a circular arc of radius `ρ_c` meeting the axis
//! at a right angle. `ρ_c` is found by bisection so that the arc ends on the
//! axis.

use std::f64::consts::FRAC_PI_2;

use super::SurgeryError;

#[derive(Clone, Debug, PartialEq)]
pub struct Cap {
    pub r_start: f64,
    pub theta0: f64,
    pub k0: f64,
    pub ramp: f64,
    pub rho_c: f64,
    /// End of the ramp.
    pub x_l: f64,
    pub r_l: f64,
    pub theta_l: f64,
    pub length: f64,
}

/// `∫₀ᵗ (6s⁵ - 15s⁴ + 10s³) ds`.
fn smoothstep_integral(t: f64) -> f64 {
    t.powi(4) * (t * (t - 3.0) + 2.5)
}

fn smoothstep(t: f64) -> f64 {
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

fn ramp_theta(theta0: f64, k0: f64, k1: f64, ramp: f64, s: f64) -> f64 {
    theta0 + k0 * s + (k1 - k0) * ramp * smoothstep_integral(s / ramp)
}

fn ramp_point(theta0: f64, k0: f64, k1: f64, ramp: f64, r0: f64, s: f64) -> (f64, f64) {
    let steps = 256;
    let h = s / steps as f64;
    let (mut x, mut r) = (0.0, r0);
    for i in 0..steps {
        let a = i as f64 * h;
        let ths = [
            ramp_theta(theta0, k0, k1, ramp, a),
            ramp_theta(theta0, k0, k1, ramp, a + 0.5 * h),
            ramp_theta(theta0, k0, k1, ramp, a + h),
        ];
        x += h / 6.0 * (ths[0].cos() + 4.0 * ths[1].cos() + ths[2].cos());
        r += h / 6.0 * (ths[0].sin() + 4.0 * ths[1].sin() + ths[2].sin());
    }
    (x, r)
}

/// Cap from radius `r_start`, slope `dR/dX` and signed curvature `k0`
/// (negative when the meridian turns toward the axis).
pub fn build_cap(r_start: f64, slope: f64, k0: f64, ramp: f64) -> Result<Cap, SurgeryError> {
    if !(r_start > 0.0 && ramp > 0.0) {
        return Err(SurgeryError::BadParams(format!(
            "cap needs positive radius and ramp, got {r_start}, {ramp}"
        )));
    }
    let theta0 = slope.atan();
    let end = |rho: f64| {
        let k1 = -1.0 / rho;
        let th = ramp_theta(theta0, k0, k1, ramp, ramp);
        let (x, r) = ramp_point(theta0, k0, k1, ramp, r_start, ramp);
        (x, r, th, r - rho * th.cos())
    };
    let (mut lo, mut hi) = (1e-3 * r_start, 10.0 * r_start);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (_, r, th, r_end) = end(mid);
        // an arc that has already turned past vertical, or left the
        // half-plane, is too tight
        if th <= -FRAC_PI_2 || r <= 0.0 {
            lo = mid;
            continue;
        }
        if r_end > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho_c = 0.5 * (lo + hi);
    let (x_l, r_l, theta_l, r_end) = end(rho_c);
    if !(theta_l > -FRAC_PI_2 && r_end.abs() < 1e-9 * r_start) {
        return Err(SurgeryError::BadParams(format!(
            "cap does not close: end radius {r_end}"
        )));
    }
    Ok(Cap {
        r_start,
        theta0,
        k0,
        ramp,
        rho_c,
        x_l,
        r_l,
        theta_l,
        length: ramp + rho_c * (theta_l + FRAC_PI_2),
    })
}

impl Cap {
    /// Point `(X, R)`, tangent angle and signed curvature at arclength `s`.
    pub fn at(&self, s: f64) -> (f64, f64, f64, f64) {
        let k1 = -1.0 / self.rho_c;
        if s <= self.ramp {
            let (x, r) = ramp_point(self.theta0, self.k0, k1, self.ramp, self.r_start, s);
            let th = ramp_theta(self.theta0, self.k0, k1, self.ramp, s);
            let k = self.k0 + (k1 - self.k0) * smoothstep(s / self.ramp);
            return (x, r, th, k);
        }
        let th = self.theta_l - (s - self.ramp) / self.rho_c;
        let x = self.x_l - self.rho_c * (th.sin() - self.theta_l.sin());
        let r = self.r_l + self.rho_c * (th.cos() - self.theta_l.cos());
        (x, r, th, k1)
    }

    /// Nodes at spacing at most `h`; the last one sits on the axis.
    pub fn nodes(&self, h: f64) -> Vec<(f64, f64)> {
        self.nodes_from(0.0, h)
    }

    /// Nodes from arclength `start` to the pole at even spacing close to `h`.
    pub fn nodes_from(&self, start: f64, h: f64) -> Vec<(f64, f64)> {
        let span = self.length - start;
        let count = (span / h).round().max(4.0) as usize;
        let mut out: Vec<(f64, f64)> = (0..=count)
            .map(|i| {
                let (x, r, _, _) = self.at(start + span * i as f64 / count as f64);
                (x, r)
            })
            .collect();
        if let Some(last) = out.last_mut() {
            last.1 = 0.0;
        }
        out
    }

    /// `(|A|², |H|²)` of the ansatz at arclength `s`, away from the pole.
    pub fn curvature(&self, n: usize, s: f64) -> (f64, f64) {
        let (_, r, th, k) = self.at(s);
        let kappa = -k;
        let mu = th.cos() / r;
        let nm1 = (n - 1) as f64;
        (kappa * kappa + nm1 * mu * mu, (kappa + nm1 * mu).powi(2))
    }

    /// Largest `|H|` and largest `|A|²/|H|²` over the cap.
    pub fn extremes(&self, n: usize) -> (f64, f64) {
        let samples = 2000;
        let mut max_h = n as f64 / self.rho_c;
        let mut max_ratio = 1.0 / n as f64;
        for i in 0..samples {
            let s = self.length * i as f64 / samples as f64;
            let (a2, h2) = self.curvature(n, s);
            max_h = max_h.max(h2.sqrt());
            max_ratio = max_ratio.max(a2 / h2);
        }
        (max_h, max_ratio)
    }
}
