//! Exact solutions of the associativity equations with analytic jets.
//!
//! Closed forms are differentiated by hand. The implicit table entry and the
//! ODE-defined families go through [`Taylor3`] arithmetic, which carries
//! exact derivatives through order three.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid2D, Jet3, Point2, ScalarField2D};
use crate::ode::{dopri5, Chebyshev};
use crate::sampling::Domain;
use crate::taylor::Taylor3;

/// Which associativity equation a potential solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquationForm {
    /// `pq − ab = 1` (hyperbolic, f in asymptotic coordinates).
    Ass1,
    /// `a² + b² − pb − qa = 1` (convex).
    Ass2,
    /// `F_ttt = F_tyy² − F_tty F_yyy`, with t in the x slot.
    Ass3,
}

impl fmt::Display for EquationForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EquationForm::Ass1 => "ASS1",
            EquationForm::Ass2 => "ASS2",
            EquationForm::Ass3 => "ASS3",
        })
    }
}

/// Anything that yields a jet at a point.
pub trait JetSource: Send + Sync {
    fn jet(&self, pt: Point2) -> Result<Jet3>;
}

impl<F> JetSource for F
where
    F: Fn(Point2) -> Result<Jet3> + Send + Sync,
{
    fn jet(&self, pt: Point2) -> Result<Jet3> {
        self(pt)
    }
}

/// Wraps a source and adds `dq` to `f_yyy`, moving it off `pq − ab = 1`.
/// Used as a negative control.
pub struct OffShell<'a> {
    pub inner: &'a dyn JetSource,
    pub dq: f64,
}

impl JetSource for OffShell<'_> {
    fn jet(&self, pt: Point2) -> Result<Jet3> {
        let mut j = self.inner.jet(pt)?;
        j.q += self.dq;
        Ok(j)
    }
}

/// Shape of the arbitrary function φ in the rarefaction family.
#[derive(Clone, Debug, PartialEq)]
pub enum Phi {
    /// φ(s) = k0 + k1 s
    Affine { k0: f64, k1: f64 },
    /// φ(s) = k0 exp(k1 s), k1 ≠ 0
    Exp { k0: f64, k1: f64 },
    /// Natural cubic spline through samples.
    Tabulated(Arc<TabulatedPhi>),
}

impl Phi {
    /// `[ψ, ψ', ψ'', ψ''']` at `s`, where ψ''' = φ.
    pub fn psi(&self, s: f64) -> Option<[f64; 4]> {
        match self {
            Phi::Affine { k0, k1 } => Some([
                k0 * s.powi(3) / 6.0 + k1 * s.powi(4) / 24.0,
                k0 * s * s / 2.0 + k1 * s.powi(3) / 6.0,
                k0 * s + k1 * s * s / 2.0,
                k0 + k1 * s,
            ]),
            Phi::Exp { k0, k1 } => {
                let e = k0 * (k1 * s).exp();
                Some([e / k1.powi(3), e / (k1 * k1), e / k1, e])
            }
            Phi::Tabulated(t) => t.psi(s),
        }
    }

    pub fn phi(&self, s: f64) -> Option<f64> {
        self.psi(s).map(|v| v[3])
    }

    /// φ and φ' at `s`.
    pub fn phi_prime(&self, s: f64) -> Option<(f64, f64)> {
        match self {
            Phi::Affine { k0, k1 } => Some((k0 + k1 * s, *k1)),
            Phi::Exp { k0, k1 } => {
                let e = k0 * (k1 * s).exp();
                Some((e, k1 * e))
            }
            Phi::Tabulated(t) => t.phi_prime(s),
        }
    }
}

/// Natural cubic spline for φ with exact repeated antiderivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedPhi {
    s: Vec<f64>,
    /// Per piece: φ coefficients in τ = s − s_k, then ψ'', ψ', ψ at s_k.
    pieces: Vec<([f64; 4], [f64; 3])>,
}

impl TabulatedPhi {
    pub fn new(s: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let n = s.len();
        if n < 3 || phi.len() != n || s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "tabulated φ needs ≥ 3 samples with strictly increasing abscissae".into(),
            ));
        }
        let h: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
        // Second derivatives M by the Thomas algorithm, M_0 = M_{n−1} = 0.
        let mut m = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            rhs[i] = 6.0 * ((phi[i + 1] - phi[i]) / h[i] - (phi[i] - phi[i - 1]) / h[i - 1]);
        }
        for i in 2..n - 1 {
            let w = h[i - 1] / diag[i - 1];
            diag[i] -= w * h[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (1..n - 1).rev() {
            let upper = if i + 1 < n - 1 { h[i] * m[i + 1] } else { 0.0 };
            m[i] = (rhs[i] - upper) / diag[i];
        }
        let mut pieces = Vec::with_capacity(n - 1);
        let mut acc = [0.0; 3];
        for k in 0..n - 1 {
            let hk = h[k];
            let c = [
                phi[k],
                (phi[k + 1] - phi[k]) / hk - hk * (2.0 * m[k] + m[k + 1]) / 6.0,
                m[k] / 2.0,
                (m[k + 1] - m[k]) / (6.0 * hk),
            ];
            pieces.push((c, acc));
            acc = Self::integrals(&c, &acc, hk);
        }
        Ok(TabulatedPhi { s, pieces })
    }

    /// ψ'', ψ', ψ at τ within a piece.
    fn integrals(c: &[f64; 4], base: &[f64; 3], t: f64) -> [f64; 3] {
        let [a, b, cc, d] = *c;
        let p2 = base[0] + a * t + b * t.powi(2) / 2.0 + cc * t.powi(3) / 3.0 + d * t.powi(4) / 4.0;
        let p1 = base[1]
            + base[0] * t
            + a * t.powi(2) / 2.0
            + b * t.powi(3) / 6.0
            + cc * t.powi(4) / 12.0
            + d * t.powi(5) / 20.0;
        let p0 = base[2]
            + base[1] * t
            + base[0] * t.powi(2) / 2.0
            + a * t.powi(3) / 6.0
            + b * t.powi(4) / 24.0
            + cc * t.powi(5) / 60.0
            + d * t.powi(6) / 120.0;
        [p2, p1, p0]
    }

    fn locate(&self, s: f64) -> Option<(usize, f64)> {
        let n = self.s.len();
        if !(s >= self.s[0] && s <= self.s[n - 1]) {
            return None;
        }
        let k = self.s.partition_point(|&v| v <= s).saturating_sub(1).min(n - 2);
        Some((k, s - self.s[k]))
    }

    pub fn psi(&self, s: f64) -> Option<[f64; 4]> {
        let (k, t) = self.locate(s)?;
        let (c, base) = &self.pieces[k];
        let [p2, p1, p0] = Self::integrals(c, base, t);
        Some([p0, p1, p2, c[0] + t * (c[1] + t * (c[2] + t * c[3]))])
    }

    pub fn phi_prime(&self, s: f64) -> Option<(f64, f64)> {
        let (k, t) = self.locate(s)?;
        let c = &self.pieces[k].0;
        Some((c[0] + t * (c[1] + t * (c[2] + t * c[3])), c[1] + t * (2.0 * c[2] + 3.0 * t * c[3])))
    }

    pub fn range(&self) -> (f64, f64) {
        (self.s[0], self.s[self.s.len() - 1])
    }
}

/// Parameters of the degenerate-hodograph family: fields constant along
/// s = x + c y up to affine terms.
#[derive(Clone, Debug, PartialEq)]
pub struct RarefactionParams {
    pub c: f64,
    pub mu: f64,
    pub phi: Phi,
}

impl RarefactionParams {
    pub fn validate(&self) -> Result<()> {
        if self.mu == 0.0 || !self.mu.is_finite() || !self.c.is_finite() {
            return Err(Error::InvalidParameter("rarefaction needs finite c and μ ≠ 0".into()));
        }
        if let Phi::Exp { k1, .. } = self.phi {
            if k1 == 0.0 {
                return Err(Error::InvalidParameter("exponential φ needs k1 ≠ 0".into()));
            }
        }
        Ok(())
    }

    /// `(p, a, b, q)` at `pt`.
    pub fn fields(&self, pt: Point2) -> Option<[f64; 4]> {
        let (c, mu) = (self.c, self.mu);
        let phi = self.phi.phi(pt.x + c * pt.y)?;
        Some([phi, c * phi + mu, c * c * phi - 1.0 / mu, c.powi(3) * phi + c * c * mu - c / mu])
    }

    /// Full jet of f = ψ(s) + μx²y/2 − xy²/(2μ) + κy³/6 with κ = c²μ − c/μ.
    pub fn jet(&self, pt: Point2) -> Option<Jet3> {
        let (c, mu, x, y) = (self.c, self.mu, pt.x, pt.y);
        let [p0, p1, p2, p3] = self.phi.psi(x + c * y)?;
        let kappa = c * c * mu - c / mu;
        Some(Jet3 {
            f: p0 + mu * x * x * y / 2.0 - x * y * y / (2.0 * mu) + kappa * y.powi(3) / 6.0,
            fx: p1 + mu * x * y - y * y / (2.0 * mu),
            fy: c * p1 + mu * x * x / 2.0 - x * y / mu + kappa * y * y / 2.0,
            fxx: p2 + mu * y,
            fxy: c * p2 + mu * x - y / mu,
            fyy: c * c * p2 - x / mu + kappa * y,
            p: p3,
            a: c * p3 + mu,
            b: c * c * p3 - 1.0 / mu,
            q: c.powi(3) * p3 + kappa,
        })
    }
}

/// Root branch of the quadratic system behind the revolution family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn from_sign(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Branch::Plus)
        } else if v == -1.0 {
            Ok(Branch::Minus)
        } else {
            Err(Error::InvalidParameter(format!("branch must be +1 or −1, got {v}")))
        }
    }
}

/// Constants of ξ²(H − G) = εξ + ν, 2ξ²HG = μ − ξ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevolutionParams {
    pub epsilon: f64,
    pub nu: f64,
    pub mu: f64,
    pub branch: Branch,
}

/// G, G', H, H' at one ξ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RevolutionRoot {
    pub g: f64,
    pub gp: f64,
    pub h: f64,
    pub hp: f64,
}

impl RevolutionParams {
    /// Closed-form root of the quadratic system and its ξ-derivative.
    pub fn root(&self, xi: f64) -> Result<RevolutionRoot> {
        let (e, n, m) = (self.epsilon, self.nu, self.mu);
        let d = (e * xi + n) / (xi * xi);
        let pp = (m - xi) / (2.0 * xi * xi);
        let disc = d * d + 4.0 * pp;
        if xi == 0.0 || !(disc > 0.0) || !disc.is_finite() {
            return Err(Error::DomainViolation { id: "revolution".into(), x: xi, y: f64::NAN });
        }
        let sq = disc.sqrt();
        let sgn = self.branch.sign();
        let dp = -e / (xi * xi) - 2.0 * n / xi.powi(3);
        let ppp = -m / xi.powi(3) + 1.0 / (2.0 * xi * xi);
        let discp = 2.0 * d * dp + 4.0 * ppp;
        let g = 0.5 * (-d + sgn * sq);
        let gp = 0.5 * (-dp + sgn * discp / (2.0 * sq));
        Ok(RevolutionRoot { g, gp, h: g + d, hp: gp + dp })
    }

    /// `(p, a, b, q)` at `pt` via a = yα, b = xβ, p = y³ρ, q = x³γ, ξ = xy.
    pub fn fields(&self, pt: Point2) -> Result<[f64; 4]> {
        let xi = pt.x * pt.y;
        let r = self.root(xi).map_err(|_| Error::DomainViolation { id: "revolution".into(), x: pt.x, y: pt.y })?;
        let alpha = 2.0 * r.g + xi * r.gp;
        let beta = 2.0 * r.h + xi * r.hp;
        Ok([pt.y.powi(3) * r.gp, pt.y * alpha, pt.x * beta, pt.x.powi(3) * r.hp])
    }
}

/// F, F', F'' of an ODE-defined profile, with F''' from the right-hand side.
#[derive(Clone)]
struct OdeProfile {
    fits: Arc<Vec<Chebyshev>>,
    lo: f64,
    hi: f64,
}

impl OdeProfile {
    fn solve<R>(lo: f64, hi: f64, x0: f64, init: [f64; 3], rhs: R) -> Result<Self>
    where
        R: Fn(f64, [f64; 3]) -> Result<f64> + Sync,
    {
        if !(hi > lo) || !(x0 >= lo && x0 <= hi) {
            return Err(Error::InvalidParameter(format!(
                "ODE interval [{lo}, {hi}] must be nondegenerate and contain the initial point {x0}"
            )));
        }
        let field = |t: f64, y: &[f64; 3]| Ok([y[1], y[2], rhs(t, *y)?]);
        let fits = Chebyshev::fit_adaptive(lo, hi, 3, |nodes| {
            let mut order: Vec<usize> = (0..nodes.len()).collect();
            order.sort_by(|&i, &j| nodes[i].total_cmp(&nodes[j]));
            let mut out = vec![Vec::new(); nodes.len()];
            let split = order.partition_point(|&i| nodes[i] < x0);
            let (mut t, mut y) = (x0, init);
            for &i in &order[split..] {
                y = dopri5(field, t, y, nodes[i], 1e-13)?;
                t = nodes[i];
                out[i] = y.to_vec();
            }
            let (mut t, mut y) = (x0, init);
            for &i in order[..split].iter().rev() {
                y = dopri5(field, t, y, nodes[i], 1e-13)?;
                t = nodes[i];
                out[i] = y.to_vec();
            }
            Ok(out)
        })?;
        Ok(OdeProfile { fits: Arc::new(fits), lo, hi })
    }

    fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    fn state(&self, x: f64) -> [f64; 3] {
        [self.fits[0].eval(x), self.fits[1].eval(x), self.fits[2].eval(x)]
    }
}

/// Third derivative of the ansatz y³F(x/y) profile.
fn ansatz2_rhs(xi: f64, s: [f64; 3]) -> Result<f64> {
    let [f, f1, f2] = s;
    let den = 6.0 * f - 4.0 * xi * f1;
    if den.abs() < 1e-12 {
        return Err(Error::Singular(format!("6F − 4ξF' vanishes at ξ = {xi}")));
    }
    Ok((1.0 + 2.0 * f1 * f2 - 2.0 * xi * f2 * f2) / den)
}

/// Jet of (xy)^{3/2} F(x y^μ) at `pt` for the given profile values.
fn self_similar_taylor(mu: f64, pt: Point2, prof: [f64; 4]) -> Jet3 {
    let x = Taylor3::var_x(pt.x);
    let y = Taylor3::var_y(pt.y);
    let z = x * y.powf(mu);
    ((x * y).powf(1.5) * z.compose(prof)).to_jet()
}

/// Third derivative of the self-similar profile: pq − ab is affine in F'''
/// at fixed (F, F', F''), so two evaluations at y = 1 determine it.
fn self_similar_rhs(mu: f64, z: f64, s: [f64; 3]) -> Result<f64> {
    let pt = Point2::new(z, 1.0);
    let j0 = self_similar_taylor(mu, pt, [s[0], s[1], s[2], 0.0]);
    let j1 = self_similar_taylor(mu, pt, [s[0], s[1], s[2], 1.0]);
    let (p1, a1, b1, q1) = (j1.p - j0.p, j1.a - j0.a, j1.b - j0.b, j1.q - j0.q);
    let r0 = j0.p * j0.q - j0.a * j0.b - 1.0;
    let lin = j0.p * q1 + p1 * j0.q - j0.a * b1 - a1 * j0.b;
    if lin.abs() < 1e-12 {
        return Err(Error::Singular(format!("self-similar ODE degenerates at z = {z}")));
    }
    Ok(-r0 / lin)
}

/// Root of y t⁴/2 + y² t = x in `bracket`, then the jet of the row-6 potential.
pub fn eval_implicit_row6(pt: Point2, bracket: (f64, f64)) -> Result<(f64, Jet3)> {
    let (x, y) = (pt.x, pt.y);
    let (lo, hi) = bracket;
    if y == 0.0 || !(hi > lo) {
        return Err(Error::DomainViolation { id: "table6_f".into(), x, y });
    }
    let g = |t: f64| y * t.powi(4) / 2.0 + y * y * t - x;
    let gp = |t: f64| 2.0 * y * t.powi(3) + y * y;
    let n = 64;
    let ts: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let gs: Vec<f64> = ts.iter().map(|&t| g(t)).collect();
    let mut hits = Vec::new();
    if gs[0] == 0.0 {
        hits.push((ts[0], ts[0]));
    }
    for k in 0..n {
        if gs[k + 1] == 0.0 || (gs[k] != 0.0 && gs[k].signum() != gs[k + 1].signum()) {
            hits.push((ts[k], ts[k + 1]));
        }
    }
    match hits.len() {
        0 => return Err(Error::NoRootInBracket { lo, hi, x, y }),
        1 => {}
        count => return Err(Error::AmbiguousRoot { count, lo, hi, x, y }),
    }
    let (mut a, mut b) = hits[0];
    let tol = 1e-12 * x.abs().max(1.0);
    let mut t = if g(b) == 0.0 { b } else { 0.5 * (a + b) };
    for _ in 0..200 {
        let v = g(t);
        if v.abs() <= tol {
            break;
        }
        if v.signum() == g(a).signum() {
            a = t;
        } else {
            b = t;
        }
        let d = gp(t);
        let newton = t - v / d;
        t = if d != 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
    }
    if g(t).abs() > tol {
        return Err(Error::NonConvergence(format!("quartic root at ({x}, {y})")));
    }
    let xt = gp(t);
    if xt == 0.0 {
        return Err(Error::Singular(format!("∂x/∂t vanishes at ({x}, {y})")));
    }
    // Series inversion of x = y² T + y T⁴/2; each pass fixes one more order.
    let xs = Taylor3::var_x(x);
    let ys = Taylor3::var_y(y);
    let mut ts = Taylor3::constant(t);
    for _ in 0..5 {
        let t4 = ts * ts * ts * ts;
        let resid = ys * ys * ts + ys * t4 * 0.5 - xs;
        ts = ts - resid / xt;
    }
    let t3 = ts * ts * ts;
    let t6 = t3 * t3;
    let y2 = ys * ys;
    let y3 = y2 * ys;
    let f = y3 * ys * t3 / 6.0 + y3 * t6 * (7.0 / 30.0) + y2 * t6 * t3 * (4.0 / 45.0) + y3 * y2 / 60.0;
    Ok((t, f.to_jet()))
}

#[derive(Clone)]
enum Kind {
    TrivialCubic,
    ConvexTrivial,
    ZeroPotential,
    TableF(u8),
    Table6 { bracket: (f64, f64) },
    TableCapF(u8),
    Rarefaction(RarefactionParams),
    Revolution { params: RevolutionParams, lo: f64, hi: f64, fp: Arc<Chebyshev>, f0: Arc<Chebyshev> },
    Ansatz1 { alpha: f64, beta: f64, gamma: f64 },
    Ansatz2(OdeProfile),
    SelfSimilar { mu: f64, prof: OdeProfile },
}

/// Static description of a catalogue entry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionInfo {
    pub id: &'static str,
    pub form: EquationForm,
    pub params: Vec<(&'static str, f64)>,
    pub description: &'static str,
}

const IDS: [&str; 21] = [
    "trivial_cubic",
    "convex_trivial",
    "zero_potential",
    "table1_f",
    "table2_f",
    "table3_f",
    "table4_f",
    "table5_f",
    "table6_f",
    "table1_F",
    "table2_F",
    "table3_F",
    "table4_F",
    "table5_F",
    "table6_F",
    "rarefaction",
    "rarefaction_exp",
    "revolution",
    "ansatz1",
    "ansatz2",
    "self_similar",
];

fn info(id: &str) -> Option<SolutionInfo> {
    use EquationForm::*;
    let (form, params, description): (EquationForm, Vec<(&'static str, f64)>, &'static str) = match id {
        "trivial_cubic" => (Ass1, vec![], "f = x³/6 + y³/6"),
        "convex_trivial" => (Ass2, vec![], "f = x²y/2"),
        "zero_potential" => (Ass1, vec![], "f = 0 (not a solution; negative control)"),
        "table1_f" => (Ass1, vec![], "f = x³/(6y) + y⁴/24"),
        "table2_f" => (Ass1, vec![], "f = xy³/6 + x² ln x/2 − 3x²/4"),
        "table3_f" => (Ass1, vec![], "f = xy³/12 − x² ln y/2 + x² ln x/2 − 3x²/4"),
        "table4_f" => (Ass1, vec![], "f = yx³/6 + y² ln y/2 − 3y²/4"),
        "table5_f" => (Ass1, vec![], "f = (4y²/15)(x/y − y/2)^{5/2}"),
        "table6_f" => (
            Ass1,
            vec![("t_lo", 0.0), ("t_hi", 4.0)],
            "f = y⁴t³/6 + 7y³t⁶/30 + 4y²t⁹/45 + y⁵/60 with x = y²t + yt⁴/2",
        ),
        "table1_F" => (Ass3, vec![], "F = t²y²/4 + t⁵/60"),
        "table2_F" => (Ass3, vec![], "F = y eᵗ − y⁴/24"),
        "table3_F" => (Ass3, vec![], "F = y²eᵗ/4 + e²ᵗ/32 − y⁴/48"),
        "table4_F" => (Ass3, vec![], "F = t² ln y/2"),
        "table5_F" => (Ass3, vec![], "F = y³t/6 + y²t³/6 + t⁷/210"),
        "table6_F" => (Ass3, vec![], "F = y³t²/6 + y²t⁵/20 + t¹¹/3960"),
        "rarefaction" => (
            Ass1,
            vec![("c", 1.0), ("mu", 1.0), ("k0", 2.0), ("k1", 0.25)],
            "p = φ(x + cy), a = cφ + μ, b = c²φ − 1/μ with φ = k0 + k1 s",
        ),
        "rarefaction_exp" => (
            Ass1,
            vec![("c", 1.0), ("mu", 1.0), ("k0", 2.0), ("k1", 0.5)],
            "rarefaction family with φ = k0 exp(k1 s)",
        ),
        "revolution" => (
            Ass1,
            vec![
                ("epsilon", 0.0),
                ("nu", 0.0),
                ("mu", 1.0),
                ("branch", 1.0),
                ("xi_lo", 0.05),
                ("xi_hi", 0.95),
                ("xi_ref", 0.5),
            ],
            "a = yα(ξ), b = xβ(ξ), p = y³ρ(ξ), q = x³γ(ξ), ξ = xy",
        ),
        "ansatz1" => (
            Ass1,
            vec![("alpha", 1.0), ("beta", 1.0), ("gamma", 1.0)],
            "f = y^{3/2} √(−8x³/9 + αx² + βx + γ)",
        ),
        "ansatz2" => (
            Ass1,
            vec![("xi0", 1.0), ("F0", 1.0), ("F1", 0.0), ("F2", 0.0), ("xi_lo", 0.5), ("xi_hi", 1.5)],
            "f = y³F(x/y) with 6FF''' − 4ξF'F''' + 2ξF''² − 2F'F'' = 1",
        ),
        "self_similar" => (
            Ass1,
            vec![
                ("mu", 2.0),
                ("z0", 1.0),
                ("F0", 1.0),
                ("F1", 0.0),
                ("F2", 0.0),
                ("z_lo", 0.5),
                ("z_hi", 1.5),
            ],
            "f = (xy)^{3/2} F(x y^μ)",
        ),
        _ => return None,
    };
    let id = IDS.iter().find(|&&s| s == id)?;
    Some(SolutionInfo { id, form, params, description })
}

/// Every catalogue entry in a fixed order.
pub fn list_solutions() -> Vec<SolutionInfo> {
    IDS.iter().filter_map(|id| info(id)).collect()
}

/// F-column id, f-column id and the agreement tolerance of each table row.
pub fn table_pairs() -> [(&'static str, &'static str, f64); 6] {
    [
        ("table1_F", "table1_f", 1e-9),
        ("table2_F", "table2_f", 1e-9),
        ("table3_F", "table3_f", 1e-9),
        ("table4_F", "table4_f", 1e-9),
        ("table5_F", "table5_f", 1e-7),
        ("table6_F", "table6_f", 1e-7),
    ]
}

/// A catalogue entry bound to parameter values.
#[derive(Clone)]
pub struct Solution {
    id: &'static str,
    form: EquationForm,
    params: Vec<(&'static str, f64)>,
    kind: Kind,
}

impl fmt::Debug for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Solution").field("id", &self.id).field("params", &self.params).finish()
    }
}

impl Solution {
    /// Entry with default parameters.
    pub fn get(id: &str) -> Result<Self> {
        Self::with_params(id, &[])
    }

    /// Entry with some parameters overridden by name.
    pub fn with_params(id: &str, overrides: &[(&str, f64)]) -> Result<Self> {
        let info = info(id).ok_or_else(|| Error::UnknownSolution(id.to_string()))?;
        let mut params = info.params.clone();
        for (name, v) in overrides {
            let slot = params
                .iter_mut()
                .find(|(n, _)| n == name)
                .ok_or_else(|| Error::InvalidParameter(format!("`{id}` has no parameter `{name}`")))?;
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("parameter `{name}` must be finite")));
            }
            slot.1 = *v;
        }
        let p = |name: &str| params.iter().find(|(n, _)| *n == name).map(|e| e.1).unwrap_or(f64::NAN);
        let kind = match info.id {
            "trivial_cubic" => Kind::TrivialCubic,
            "convex_trivial" => Kind::ConvexTrivial,
            "zero_potential" => Kind::ZeroPotential,
            "table6_f" => Kind::Table6 { bracket: (p("t_lo"), p("t_hi")) },
            s if s.starts_with("table") && s.ends_with("_f") => Kind::TableF(s.as_bytes()[5] - b'0'),
            s if s.starts_with("table") => Kind::TableCapF(s.as_bytes()[5] - b'0'),
            "rarefaction" | "rarefaction_exp" => {
                let phi = if info.id == "rarefaction" {
                    Phi::Affine { k0: p("k0"), k1: p("k1") }
                } else {
                    Phi::Exp { k0: p("k0"), k1: p("k1") }
                };
                let rp = RarefactionParams { c: p("c"), mu: p("mu"), phi };
                rp.validate()?;
                Kind::Rarefaction(rp)
            }
            "revolution" => {
                let params = RevolutionParams {
                    epsilon: p("epsilon"),
                    nu: p("nu"),
                    mu: p("mu"),
                    branch: Branch::from_sign(p("branch"))?,
                };
                revolution_kind(params, p("xi_lo"), p("xi_hi"), p("xi_ref"))?
            }
            "ansatz1" => Kind::Ansatz1 { alpha: p("alpha"), beta: p("beta"), gamma: p("gamma") },
            "ansatz2" => Kind::Ansatz2(OdeProfile::solve(
                p("xi_lo"),
                p("xi_hi"),
                p("xi0"),
                [p("F0"), p("F1"), p("F2")],
                ansatz2_rhs,
            )?),
            "self_similar" => {
                let mu = p("mu");
                let prof =
                    OdeProfile::solve(p("z_lo"), p("z_hi"), p("z0"), [p("F0"), p("F1"), p("F2")], |z, s| {
                        self_similar_rhs(mu, z, s)
                    })?;
                Kind::SelfSimilar { mu, prof }
            }
            _ => unreachable!("every listed id has a constructor"),
        };
        Ok(Solution { id: info.id, form: info.form, params, kind })
    }

    /// Rarefaction entry with an arbitrary φ (e.g. tabulated).
    pub fn rarefaction(params: RarefactionParams) -> Result<Self> {
        params.validate()?;
        let info = info("rarefaction").expect("listed");
        Ok(Solution {
            id: info.id,
            form: info.form,
            params: vec![("c", params.c), ("mu", params.mu)],
            kind: Kind::Rarefaction(params),
        })
    }

    pub fn id(&self) -> &'static str {
        self.id
    }

    pub fn form(&self) -> EquationForm {
        self.form
    }

    pub fn params(&self) -> &[(&'static str, f64)] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| *n == name).map(|e| e.1)
    }

    /// The rarefaction parameters, if this is a rarefaction entry.
    pub fn rarefaction_params(&self) -> Option<&RarefactionParams> {
        match &self.kind {
            Kind::Rarefaction(r) => Some(r),
            _ => None,
        }
    }

    /// Pointwise domain predicate.
    pub fn contains(&self, pt: Point2) -> bool {
        let (x, y) = (pt.x, pt.y);
        if !(x.is_finite() && y.is_finite()) {
            return false;
        }
        match &self.kind {
            Kind::TrivialCubic | Kind::ConvexTrivial | Kind::ZeroPotential => true,
            Kind::TableF(1) => y != 0.0,
            Kind::TableF(2) => x > 0.0,
            Kind::TableF(3) => x > 0.0 && y > 0.0,
            Kind::TableF(4) => y > 0.0,
            Kind::TableF(5) => y != 0.0 && x / y - y / 2.0 > 0.0,
            Kind::TableF(_) => false,
            Kind::Table6 { .. } => y != 0.0,
            Kind::TableCapF(4) => y > 0.0,
            Kind::TableCapF(_) => true,
            Kind::Rarefaction(r) => r.phi.phi(x + r.c * y).is_some(),
            Kind::Revolution { params, lo, hi, .. } => {
                let xi = x * y;
                y > 0.0 && xi >= *lo && xi <= *hi && params.root(xi).is_ok()
            }
            Kind::Ansatz1 { alpha, beta, gamma } => {
                y > 0.0 && -8.0 / 9.0 * x.powi(3) + alpha * x * x + beta * x + gamma > 0.0
            }
            Kind::Ansatz2(prof) => y != 0.0 && prof.contains(x / y),
            Kind::SelfSimilar { mu, prof } => x > 0.0 && y > 0.0 && prof.contains(x * y.powf(*mu)),
        }
    }

    /// A rectangle inside the domain used for default sampling.
    pub fn default_domain(&self) -> Domain {
        match &self.kind {
            Kind::TrivialCubic | Kind::ConvexTrivial | Kind::ZeroPotential => Domain::new(-1.0, 1.0, -1.0, 1.0),
            Kind::TableF(1) => Domain::new(0.5, 1.5, 1.5, 2.5),
            Kind::TableF(2) => Domain::new(0.5, 2.0, -1.0, 1.0),
            Kind::TableF(3) => Domain::new(0.5, 2.0, 0.5, 2.0),
            Kind::TableF(4) => Domain::new(-1.0, 1.0, 0.5, 2.0),
            Kind::TableF(_) => Domain::new(1.5, 3.0, 0.5, 1.5),
            Kind::Table6 { .. } => Domain::new(0.2, 2.0, 0.5, 1.5),
            Kind::TableCapF(1) => Domain::new(0.5, 1.5, 1.5, 2.5),
            Kind::TableCapF(2) => Domain::new(-0.5, 0.5, -1.0, 1.0),
            Kind::TableCapF(3) => Domain::new(-0.5, 0.5, 0.5, 2.0),
            Kind::TableCapF(4) => Domain::new(-1.0, 1.0, 0.5, 2.0),
            Kind::TableCapF(5) => Domain::new(0.5, 1.2, 0.5, 1.5),
            Kind::TableCapF(_) => Domain::new(0.2, 1.5, 0.5, 1.5),
            Kind::Rarefaction(_) => Domain::new(0.0, 1.0, 0.0, 1.0),
            Kind::Revolution { .. } => Domain::new(0.3, 0.9, 0.3, 0.9),
            Kind::Ansatz1 { .. } => Domain::new(-0.3, 0.3, 0.5, 2.0),
            Kind::Ansatz2(_) => Domain::new(0.8, 1.2, 0.9, 1.1),
            Kind::SelfSimilar { .. } => Domain::new(0.8, 1.2, 0.9, 1.1),
        }
    }

    /// Analytic jet at `pt`.
    pub fn eval_jet(&self, pt: Point2) -> Result<Jet3> {
        if !self.contains(pt) {
            return Err(Error::DomainViolation { id: self.id.to_string(), x: pt.x, y: pt.y });
        }
        let (x, y) = (pt.x, pt.y);
        let jet = match &self.kind {
            Kind::TrivialCubic => Jet3 {
                f: (x.powi(3) + y.powi(3)) / 6.0,
                fx: x * x / 2.0,
                fy: y * y / 2.0,
                fxx: x,
                fxy: 0.0,
                fyy: y,
                p: 1.0,
                a: 0.0,
                b: 0.0,
                q: 1.0,
            },
            Kind::ConvexTrivial => Jet3 {
                f: x * x * y / 2.0,
                fx: x * y,
                fy: x * x / 2.0,
                fxx: y,
                fxy: x,
                fyy: 0.0,
                p: 0.0,
                a: 1.0,
                b: 0.0,
                q: 0.0,
            },
            Kind::ZeroPotential => Jet3::default(),
            Kind::TableF(n) => table_f(*n, x, y),
            Kind::Table6 { bracket } => eval_implicit_row6(pt, *bracket)?.1,
            Kind::TableCapF(n) => table_cap_f(*n, x, y),
            Kind::Rarefaction(r) => {
                r.jet(pt).ok_or_else(|| Error::DomainViolation { id: self.id.to_string(), x, y })?
            }
            Kind::Revolution { params, fp, f0, .. } => {
                let xi = x * y;
                let r = params.root(xi)?;
                let xs = Taylor3::var_x(x);
                let ys = Taylor3::var_y(y);
                let xis = xs * ys;
                let big = xis.compose([f0.eval(xi), fp.eval(xi), r.g, r.gp]);
                (big + (xis * params.epsilon - params.nu) * ys.ln()).to_jet()
            }
            Kind::Ansatz1 { alpha, beta, gamma } => {
                let xs = Taylor3::var_x(x);
                let ys = Taylor3::var_y(y);
                let r = xs * xs * xs * (-8.0 / 9.0) + xs * xs * *alpha + xs * *beta + *gamma;
                (ys.powf(1.5) * r.sqrt()).to_jet()
            }
            Kind::Ansatz2(prof) => {
                let xi = x / y;
                let s = prof.state(xi);
                let f3 = ansatz2_rhs(xi, s)?;
                let xs = Taylor3::var_x(x);
                let ys = Taylor3::var_y(y);
                (ys * ys * ys * (xs / ys).compose([s[0], s[1], s[2], f3])).to_jet()
            }
            Kind::SelfSimilar { mu, prof } => {
                let z = x * y.powf(*mu);
                let s = prof.state(z);
                let f3 = self_similar_rhs(*mu, z, s)?;
                self_similar_taylor(*mu, pt, [s[0], s[1], s[2], f3])
            }
        };
        if jet.is_finite() {
            Ok(jet)
        } else {
            Err(Error::DomainViolation { id: self.id.to_string(), x, y })
        }
    }
}

impl JetSource for Solution {
    fn jet(&self, pt: Point2) -> Result<Jet3> {
        self.eval_jet(pt)
    }
}

/// Convenience: build the entry and evaluate once.
pub fn eval_jet(id: &str, params: &[(&str, f64)], pt: Point2) -> Result<Jet3> {
    Solution::with_params(id, params)?.eval_jet(pt)
}

/// Jets of a source at every node of a grid.
#[derive(Clone, Debug)]
pub struct JetField {
    pub grid: Grid2D,
    pub jets: Vec<Jet3>,
}

impl JetField {
    /// Evaluates `src` at every node in parallel; the first failure wins.
    pub fn sample(src: &dyn JetSource, grid: Grid2D) -> Result<Self> {
        let jets = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = grid.node(k);
                src.jet(grid.point(i, j))
            })
            .collect::<Result<Vec<Jet3>>>()?;
        Ok(JetField { grid, jets })
    }

    /// One scalar derived from each jet.
    pub fn component(&self, f: impl Fn(&Jet3) -> f64) -> ScalarField2D {
        ScalarField2D { grid: self.grid, values: self.jets.iter().map(f).collect() }
    }

    pub fn at(&self, i: usize, j: usize) -> &Jet3 {
        &self.jets[self.grid.index(i, j)]
    }
}

fn revolution_kind(params: RevolutionParams, lo: f64, hi: f64, xi_ref: f64) -> Result<Kind> {
    if !(hi > lo) || lo * hi <= 0.0 || !(xi_ref >= lo && xi_ref <= hi) {
        return Err(Error::InvalidParameter(format!(
            "revolution needs 0 ∉ [{lo}, {hi}] and ξ_ref = {xi_ref} inside it"
        )));
    }
    let g = Chebyshev::fit_adaptive(lo, hi, 1, |xs| xs.iter().map(|&xi| Ok(vec![params.root(xi)?.g])).collect())?;
    let fp = g[0].integral(xi_ref);
    let f0 = fp.integral(xi_ref);
    Ok(Kind::Revolution { params, lo, hi, fp: Arc::new(fp), f0: Arc::new(f0) })
}

fn table_f(n: u8, x: f64, y: f64) -> Jet3 {
    match n {
        1 => Jet3 {
            f: x.powi(3) / (6.0 * y) + y.powi(4) / 24.0,
            fx: x * x / (2.0 * y),
            fy: -x.powi(3) / (6.0 * y * y) + y.powi(3) / 6.0,
            fxx: x / y,
            fxy: -x * x / (2.0 * y * y),
            fyy: x.powi(3) / (3.0 * y.powi(3)) + y * y / 2.0,
            p: 1.0 / y,
            a: -x / (y * y),
            b: x * x / y.powi(3),
            q: -x.powi(3) / y.powi(4) + y,
        },
        2 => {
            let l = x.ln();
            Jet3 {
                f: x * y.powi(3) / 6.0 + x * x * l / 2.0 - 0.75 * x * x,
                fx: y.powi(3) / 6.0 + x * l - x,
                fy: x * y * y / 2.0,
                fxx: l,
                fxy: y * y / 2.0,
                fyy: x * y,
                p: 1.0 / x,
                a: 0.0,
                b: y,
                q: x,
            }
        }
        3 => {
            let (lx, ly) = (x.ln(), y.ln());
            Jet3 {
                f: x * y.powi(3) / 12.0 - x * x * ly / 2.0 + x * x * lx / 2.0 - 0.75 * x * x,
                fx: y.powi(3) / 12.0 - x * ly + x * lx - x,
                fy: x * y * y / 4.0 - x * x / (2.0 * y),
                fxx: lx - ly,
                fxy: y * y / 4.0 - x / y,
                fyy: x * y / 2.0 + x * x / (2.0 * y * y),
                p: 1.0 / x,
                a: -1.0 / y,
                b: y / 2.0 + x / (y * y),
                q: x / 2.0 - x * x / y.powi(3),
            }
        }
        4 => {
            let l = y.ln();
            Jet3 {
                f: y * x.powi(3) / 6.0 + y * y * l / 2.0 - 0.75 * y * y,
                fx: y * x * x / 2.0,
                fy: x.powi(3) / 6.0 + y * l - y,
                fxx: x * y,
                fxy: x * x / 2.0,
                fyy: l,
                p: y,
                a: x,
                b: 0.0,
                q: 1.0 / y,
            }
        }
        _ => {
            let s = x / y - y / 2.0;
            let r = s.sqrt();
            Jet3 {
                f: 4.0 / 15.0 * y * y * s * s * r,
                fx: 2.0 / 3.0 * y * s * r,
                fy: -2.0 / 15.0 * y * s * s * r - 2.0 / 3.0 * y * y * s * r,
                fxx: r,
                fxy: -s * r / 3.0 - y * r,
                fyy: s * s * r / 5.0 + y * y * r,
                p: 1.0 / (2.0 * y * r),
                a: -(s + y) / (2.0 * y * r),
                b: (s * s + y * y) / (2.0 * y * r),
                q: -s * s * r / (2.0 * y) - s * r / 2.0 + 1.5 * y * r - y * y / (2.0 * r),
            }
        }
    }
}

/// F-column potentials; the jet's x slot is t.
fn table_cap_f(n: u8, t: f64, y: f64) -> Jet3 {
    match n {
        1 => Jet3 {
            f: t * t * y * y / 4.0 + t.powi(5) / 60.0,
            fx: t * y * y / 2.0 + t.powi(4) / 12.0,
            fy: t * t * y / 2.0,
            fxx: y * y / 2.0 + t.powi(3) / 3.0,
            fxy: t * y,
            fyy: t * t / 2.0,
            p: t * t,
            a: y,
            b: t,
            q: 0.0,
        },
        2 => {
            let e = t.exp();
            Jet3 {
                f: y * e - y.powi(4) / 24.0,
                fx: y * e,
                fy: e - y.powi(3) / 6.0,
                fxx: y * e,
                fxy: e,
                fyy: -y * y / 2.0,
                p: y * e,
                a: e,
                b: 0.0,
                q: -y,
            }
        }
        3 => {
            let e = t.exp();
            let e2 = e * e;
            Jet3 {
                f: y * y * e / 4.0 + e2 / 32.0 - y.powi(4) / 48.0,
                fx: y * y * e / 4.0 + e2 / 16.0,
                fy: y * e / 2.0 - y.powi(3) / 12.0,
                fxx: y * y * e / 4.0 + e2 / 8.0,
                fxy: y * e / 2.0,
                fyy: e / 2.0 - y * y / 4.0,
                p: y * y * e / 4.0 + e2 / 4.0,
                a: y * e / 2.0,
                b: e / 2.0,
                q: -y / 2.0,
            }
        }
        4 => {
            let l = y.ln();
            Jet3 {
                f: t * t * l / 2.0,
                fx: t * l,
                fy: t * t / (2.0 * y),
                fxx: l,
                fxy: t / y,
                fyy: -t * t / (2.0 * y * y),
                p: 0.0,
                a: 1.0 / y,
                b: -t / (y * y),
                q: t * t / y.powi(3),
            }
        }
        5 => Jet3 {
            f: y.powi(3) * t / 6.0 + y * y * t.powi(3) / 6.0 + t.powi(7) / 210.0,
            fx: y.powi(3) / 6.0 + y * y * t * t / 2.0 + t.powi(6) / 30.0,
            fy: y * y * t / 2.0 + y * t.powi(3) / 3.0,
            fxx: y * y * t + t.powi(5) / 5.0,
            fxy: y * y / 2.0 + y * t * t,
            fyy: y * t + t.powi(3) / 3.0,
            p: y * y + t.powi(4),
            a: 2.0 * y * t,
            b: y + t * t,
            q: t,
        },
        _ => Jet3 {
            f: y.powi(3) * t * t / 6.0 + y * y * t.powi(5) / 20.0 + t.powi(11) / 3960.0,
            fx: y.powi(3) * t / 3.0 + y * y * t.powi(4) / 4.0 + t.powi(10) / 360.0,
            fy: y * y * t * t / 2.0 + y * t.powi(5) / 10.0,
            fxx: y.powi(3) / 3.0 + y * y * t.powi(3) + t.powi(9) / 36.0,
            fxy: y * y * t + y * t.powi(4) / 2.0,
            fyy: y * t * t + t.powi(5) / 10.0,
            p: 3.0 * y * y * t * t + t.powi(8) / 4.0,
            a: y * y + 2.0 * y * t.powi(3),
            b: 2.0 * y * t + t.powi(4) / 2.0,
            q: t * t,
        },
    }
}
