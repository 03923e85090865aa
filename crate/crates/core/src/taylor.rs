//! Truncated bivariate Taylor polynomials of total degree three.
//!
//! Arithmetic on these carries exact derivatives through order three, which
//! is how jets of implicit and composite potentials are assembled without a
//! symbolic engine.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::fields::Jet3;

/// Exponents `(i, j)` of `dx^i dy^j` for each coefficient slot.
const EXP: [(usize, usize); 10] =
    [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

/// `i! j!` for each slot; coefficient × factorial gives the derivative.
const FACT: [f64; 10] = [1.0, 1.0, 1.0, 2.0, 1.0, 2.0, 6.0, 2.0, 2.0, 6.0];

fn slot(i: usize, j: usize) -> Option<usize> {
    EXP.iter().position(|&e| e == (i, j))
}

/// `Σ c_k dx^i dy^j` over monomials of degree ≤ 3 about a base point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Taylor3 {
    pub c: [f64; 10],
}

impl Taylor3 {
    pub const fn constant(v: f64) -> Self {
        let mut c = [0.0; 10];
        c[0] = v;
        Taylor3 { c }
    }

    /// The coordinate x expanded about `x0`.
    pub const fn var_x(x0: f64) -> Self {
        let mut c = [0.0; 10];
        c[0] = x0;
        c[1] = 1.0;
        Taylor3 { c }
    }

    /// The coordinate y expanded about `y0`.
    pub const fn var_y(y0: f64) -> Self {
        let mut c = [0.0; 10];
        c[0] = y0;
        c[2] = 1.0;
        Taylor3 { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `g(self)` given `g` and its first three derivatives at `self.value()`.
    pub fn compose(&self, g: [f64; 4]) -> Self {
        let mut h = *self;
        h.c[0] = 0.0;
        let h2 = h * h;
        let h3 = h2 * h;
        let mut out = h * g[1] + h2 * (g[2] / 2.0) + h3 * (g[3] / 6.0);
        out.c[0] += g[0];
        out
    }

    pub fn recip(&self) -> Self {
        let v = self.c[0];
        self.compose([1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v), -6.0 / (v * v * v * v)])
    }

    pub fn powf(&self, e: f64) -> Self {
        let v = self.c[0];
        self.compose([
            v.powf(e),
            e * v.powf(e - 1.0),
            e * (e - 1.0) * v.powf(e - 2.0),
            e * (e - 1.0) * (e - 2.0) * v.powf(e - 3.0),
        ])
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn ln(&self) -> Self {
        let v = self.c[0];
        self.compose([v.ln(), 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)])
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        self.compose([e; 4])
    }

    /// Partial derivatives packed into a jet.
    pub fn to_jet(&self) -> Jet3 {
        let mut v = [0.0; 10];
        for k in 0..10 {
            v[k] = self.c[k] * FACT[k];
        }
        Jet3::from_array(v)
    }

    pub fn from_jet(j: &Jet3) -> Self {
        let v = j.to_array();
        let mut c = [0.0; 10];
        for k in 0..10 {
            c[k] = v[k] / FACT[k];
        }
        Taylor3 { c }
    }
}

impl Add for Taylor3 {
    type Output = Taylor3;
    fn add(mut self, o: Taylor3) -> Taylor3 {
        for k in 0..10 {
            self.c[k] += o.c[k];
        }
        self
    }
}

impl Sub for Taylor3 {
    type Output = Taylor3;
    fn sub(mut self, o: Taylor3) -> Taylor3 {
        for k in 0..10 {
            self.c[k] -= o.c[k];
        }
        self
    }
}

impl Neg for Taylor3 {
    type Output = Taylor3;
    fn neg(self) -> Taylor3 {
        self * -1.0
    }
}

impl Mul for Taylor3 {
    type Output = Taylor3;
    fn mul(self, o: Taylor3) -> Taylor3 {
        let mut c = [0.0; 10];
        for (k1, &(i1, j1)) in EXP.iter().enumerate() {
            if self.c[k1] == 0.0 {
                continue;
            }
            for (k2, &(i2, j2)) in EXP.iter().enumerate() {
                if let Some(k) = slot(i1 + i2, j1 + j2) {
                    c[k] += self.c[k1] * o.c[k2];
                }
            }
        }
        Taylor3 { c }
    }
}

impl Div for Taylor3 {
    type Output = Taylor3;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Taylor3) -> Taylor3 {
        self * o.recip()
    }
}

impl Add<f64> for Taylor3 {
    type Output = Taylor3;
    fn add(mut self, v: f64) -> Taylor3 {
        self.c[0] += v;
        self
    }
}

impl Sub<f64> for Taylor3 {
    type Output = Taylor3;
    fn sub(mut self, v: f64) -> Taylor3 {
        self.c[0] -= v;
        self
    }
}

impl Mul<f64> for Taylor3 {
    type Output = Taylor3;
    fn mul(mut self, v: f64) -> Taylor3 {
        for k in 0..10 {
            self.c[k] *= v;
        }
        self
    }
}

impl Div<f64> for Taylor3 {
    type Output = Taylor3;
    fn div(self, v: f64) -> Taylor3 {
        self * (1.0 / v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn polynomial_jet() {
        // f = x³/(6y) + y⁴/24 at (1, 2).
        let x = Taylor3::var_x(1.0);
        let y = Taylor3::var_y(2.0);
        let f = x * x * x / (y * 6.0) + y * y * y * y / 24.0;
        let j = f.to_jet();
        assert!(close(j.p, 0.5) && close(j.a, -0.25) && close(j.b, 0.125) && close(j.q, 1.9375));
        assert!(close(j.fx, 0.25) && close(j.fxy, -0.125));
    }

    #[test]
    fn transcendental_compositions() {
        let x = Taylor3::var_x(0.7);
        let y = Taylor3::var_y(1.3);
        let f = (x * y).ln() + (x - y).exp() + (x + y * y).sqrt();
        let j = f.to_jet();
        let s: f64 = 0.7 + 1.3 * 1.3;
        let e = (0.7f64 - 1.3).exp();
        let expect_p = 2.0 / (0.7f64 * 0.7 * 0.7) + e + 3.0 / 8.0 * s.powf(-2.5);
        assert!(close(j.p, expect_p), "{} vs {}", j.p, expect_p);
        let expect_a = -e + 3.0 / 8.0 * s.powf(-2.5) * 2.0 * 1.3;
        assert!(close(j.a, expect_a), "{} vs {}", j.a, expect_a);
        let round = Taylor3::from_jet(&j);
        assert_eq!(round.to_jet(), j);
    }
}
