//! Adaptive Dormand–Prince 5(4) integration and Chebyshev interpolants.
//!
//! ODE-defined potentials are solved once at Chebyshev nodes and evaluated
//! through the interpolant afterwards, so the evaluated function is smooth
//! in its argument (no step-switching noise under finite differences).

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` with mixed absolute/relative
/// tolerance `tol`. The right-hand side may fail (e.g. a vanishing
/// denominator), which aborts the integration.
pub fn dopri5<const N: usize, F>(f: F, t0: f64, y0: [f64; N], t1: f64, tol: f64) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = dir * (span.abs() * 0.01).min(0.05);
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, &y)?;
    for _ in 0..1_000_000 {
        if (t1 - t) * dir <= 0.0 {
            return Ok(y);
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        for s in 1..7 {
            let mut ys = y;
            for (n, v) in ys.iter_mut().enumerate() {
                for r in 0..s {
                    *v += h * A[s][r] * k[r][n];
                }
            }
            k[s] = f(t + C[s] * h, &ys)?;
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for n in 0..N {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][n];
                d4 += B4[s] * k[s][n];
            }
            y5[n] += h * d5;
            let scale = tol * (1.0 + y[n].abs().max(y5[n].abs()));
            err = err.max((h * (d5 - d4)).abs() / scale);
        }
        if !err.is_finite() {
            return Err(Error::NonConvergence(format!("non-finite state near t = {t}")));
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            t += h;
            y = y5;
            k[0] = k[6];
            if (t1 - t).abs() <= 1e-14 * (1.0 + t.abs()) {
                return Ok(y);
            }
        } else if h.abs() * factor < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::NonConvergence(format!("step size underflow at t = {t}")));
        }
        h *= factor;
    }
    Err(Error::NonConvergence("step budget exhausted".into()))
}

/// `Σ a_k T_k(s)` on `[lo, hi]`, where `s` maps the interval onto `[−1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Chebyshev {
    lo: f64,
    hi: f64,
    coef: Vec<f64>,
}

impl Chebyshev {
    /// Chebyshev points of the first kind on `[lo, hi]`.
    pub fn nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let s = (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos();
                0.5 * (lo + hi) + 0.5 * (hi - lo) * s
            })
            .collect()
    }

    /// Interpolant through values at [`Chebyshev::nodes`].
    pub fn from_values(lo: f64, hi: f64, values: &[f64]) -> Self {
        let n = values.len();
        let coef = (0..n)
            .map(|j| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                    .sum();
                if j == 0 {
                    s / n as f64
                } else {
                    2.0 * s / n as f64
                }
            })
            .collect();
        Chebyshev { lo, hi, coef }
    }

    /// Fits every component returned by `sample` at the nodes, doubling the
    /// node count from 32 until the trailing coefficients are negligible.
    pub fn fit_adaptive<F>(lo: f64, hi: f64, components: usize, sample: F) -> Result<Vec<Chebyshev>>
    where
        F: Fn(&[f64]) -> Result<Vec<Vec<f64>>>,
    {
        let mut n = 32;
        while n <= 1024 {
            let xs = Self::nodes(lo, hi, n);
            let vals = sample(&xs)?;
            let fits: Vec<Chebyshev> = (0..components)
                .map(|c| {
                    let col: Vec<f64> = vals.iter().map(|v| v[c]).collect();
                    Self::from_values(lo, hi, &col)
                })
                .collect();
            if fits.iter().all(|f| f.tail_ratio() < 1e-13) {
                return Ok(fits);
            }
            n *= 2;
        }
        Err(Error::NonConvergence(format!("Chebyshev fit on [{lo}, {hi}] did not resolve; shrink the interval")))
    }

    /// Largest of the last three coefficients relative to the largest overall.
    pub fn tail_ratio(&self) -> f64 {
        let max = self.coef.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if max == 0.0 {
            return 0.0;
        }
        let tail = self.coef.iter().rev().take(3).fold(0.0f64, |m, c| m.max(c.abs()));
        tail / max
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn to_unit(&self, x: f64) -> f64 {
        (2.0 * x - self.lo - self.hi) / (self.hi - self.lo)
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let s = self.to_unit(x);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coef.iter().skip(1).rev() {
            let b0 = 2.0 * s * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        s * b1 - b2 + self.coef[0]
    }

    /// Antiderivative vanishing at `x_ref`.
    pub fn integral(&self, x_ref: f64) -> Chebyshev {
        let a = &self.coef;
        let n = a.len();
        let half = 0.5 * (self.hi - self.lo);
        let at = |k: usize| if k < n { a[k] } else { 0.0 };
        let mut b = vec![0.0; n + 1];
        b[1] = at(0) - at(2) / 2.0;
        for k in 2..=n {
            b[k] = (at(k - 1) - at(k + 1)) / (2.0 * k as f64);
        }
        for v in b.iter_mut() {
            *v *= half;
        }
        let mut out = Chebyshev { lo: self.lo, hi: self.hi, coef: b };
        out.coef[0] = -out.eval(x_ref);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dopri_exponential_and_oscillator() {
        let y = dopri5(|_, y: &[f64; 1]| Ok([y[0]]), 0.0, [1.0], 2.0, 1e-12).unwrap();
        assert!((y[0] - 2f64.exp()).abs() < 1e-10);
        let y = dopri5(|_, y: &[f64; 2]| Ok([y[1], -y[0]]), 0.0, [0.0, 1.0], -3.0, 1e-12).unwrap();
        assert!((y[0] - (-3f64).sin()).abs() < 1e-10);
        assert!((y[1] - (-3f64).cos()).abs() < 1e-10);
    }

    #[test]
    fn dopri_propagates_rhs_failure() {
        let r = dopri5(
            |t, _: &[f64; 1]| if t > 0.5 { Err(Error::Singular("test".into())) } else { Ok([1.0]) },
            0.0,
            [0.0],
            1.0,
            1e-10,
        );
        assert!(r.is_err());
    }

    #[test]
    fn chebyshev_interpolates_and_integrates() {
        let fits = Chebyshev::fit_adaptive(0.2, 1.7, 1, |xs| Ok(xs.iter().map(|x| vec![x.exp() / x]).collect()))
            .unwrap();
        let f = &fits[0];
        for x in [0.2, 0.5, 1.0, 1.7] {
            assert!((f.eval(x) - x.exp() / x).abs() < 1e-13);
        }
        let g = Chebyshev::fit_adaptive(0.0, 2.0, 1, |xs| Ok(xs.iter().map(|x| vec![x.cos()]).collect())).unwrap();
        let int = g[0].integral(0.5);
        for x in [0.0, 0.5, 1.3, 2.0] {
            assert!((int.eval(x) - (x.sin() - 0.5f64.sin())).abs() < 1e-13);
        }
    }
}
