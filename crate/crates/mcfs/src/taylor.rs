//! Truncated Taylor series in one variable.
//!
//! Coefficients are stored normalized, `c[k] = f^(k)(x0) / k!`. Every value
//! carries the highest degree it is accurate to, so differentiating a series
//! lowers its degree and mixing series keeps the smaller one.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const ORDER: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Taylor {
    pub c: [f64; ORDER + 1],
    pub deg: usize,
}

impl Taylor {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; ORDER + 1];
        c[0] = v;
        Taylor { c, deg: ORDER }
    }

    /// The independent variable expanded about `x0`.
    pub fn variable(x0: f64) -> Self {
        let mut t = Taylor::constant(x0);
        t.c[1] = 1.0;
        t
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        assert!(
            k <= self.deg,
            "derivative {k} exceeds series degree {}",
            self.deg
        );
        self.c[k] * factorial(k)
    }

    /// Derivatives 0..=k as plain numbers.
    pub fn derivatives(&self, k: usize) -> Vec<f64> {
        (0..=k).map(|j| self.derivative(j)).collect()
    }

    pub fn differentiate(&self) -> Self {
        let mut c = [0.0; ORDER + 1];
        for k in 0..ORDER {
            c[k] = (k + 1) as f64 * self.c[k + 1];
        }
        Taylor {
            c,
            deg: self.deg.saturating_sub(1),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for v in out.c.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut out = *self;
        out.c[0] += s;
        out
    }

    pub fn recip(&self) -> Self {
        Taylor::constant(1.0) / *self
    }

    pub fn exp(&self) -> Self {
        let a = &self.c;
        let mut e = [0.0; ORDER + 1];
        e[0] = a[0].exp();
        for k in 1..=ORDER {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Taylor {
            c: e,
            deg: self.deg,
        }
    }

    pub fn ln(&self) -> Self {
        let a = &self.c;
        let mut l = [0.0; ORDER + 1];
        l[0] = a[0].ln();
        for k in 1..=ORDER {
            let mut s = 0.0;
            for j in 1..k {
                s += j as f64 * l[j] * a[k - j];
            }
            l[k] = (a[k] - s / k as f64) / a[0];
        }
        Taylor {
            c: l,
            deg: self.deg,
        }
    }

    pub fn sqrt(&self) -> Self {
        let a = &self.c;
        let mut s = [0.0; ORDER + 1];
        s[0] = a[0].sqrt();
        for k in 1..=ORDER {
            let mut acc = 0.0;
            for j in 1..k {
                acc += s[j] * s[k - j];
            }
            s[k] = (a[k] - acc) / (2.0 * s[0]);
        }
        Taylor {
            c: s,
            deg: self.deg,
        }
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let a = &self.c;
        let mut s = [0.0; ORDER + 1];
        let mut c = [0.0; ORDER + 1];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..=ORDER {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                ss += j as f64 * a[j] * c[k - j];
                cc += j as f64 * a[j] * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = -cc / k as f64;
        }
        (
            Taylor {
                c: s,
                deg: self.deg,
            },
            Taylor { c, deg: self.deg },
        )
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    pub fn powi(&self, p: u32) -> Self {
        let mut out = Taylor::constant(1.0);
        out.deg = self.deg;
        for _ in 0..p {
            out = out * *self;
        }
        out
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

impl Add for Taylor {
    type Output = Taylor;
    fn add(self, o: Taylor) -> Taylor {
        let mut c = self.c;
        for (x, y) in c.iter_mut().zip(o.c.iter()) {
            *x += y;
        }
        Taylor {
            c,
            deg: self.deg.min(o.deg),
        }
    }
}

impl Sub for Taylor {
    type Output = Taylor;
    fn sub(self, o: Taylor) -> Taylor {
        let mut c = self.c;
        for (x, y) in c.iter_mut().zip(o.c.iter()) {
            *x -= y;
        }
        Taylor {
            c,
            deg: self.deg.min(o.deg),
        }
    }
}

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

impl Mul for Taylor {
    type Output = Taylor;
    fn mul(self, o: Taylor) -> Taylor {
        let mut c = [0.0; ORDER + 1];
        for k in 0..=ORDER {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * o.c[k - j];
            }
            c[k] = s;
        }
        Taylor {
            c,
            deg: self.deg.min(o.deg),
        }
    }
}

impl Div for Taylor {
    type Output = Taylor;
    fn div(self, o: Taylor) -> Taylor {
        let mut q = [0.0; ORDER + 1];
        for k in 0..=ORDER {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= o.c[j] * q[k - j];
            }
            q[k] = s / o.c[0];
        }
        Taylor {
            c: q,
            deg: self.deg.min(o.deg),
        }
    }
}

impl Mul<f64> for Taylor {
    type Output = Taylor;
    fn mul(self, s: f64) -> Taylor {
        self.scale(s)
    }
}

impl Add<f64> for Taylor {
    type Output = Taylor;
    fn add(self, s: f64) -> Taylor {
        self.add_scalar(s)
    }
}

impl Sub<f64> for Taylor {
    type Output = Taylor;
    fn sub(self, s: f64) -> Taylor {
        self.add_scalar(-s)
    }
}
