//! Centroaffine invariants of surfaces in asymptotic coordinates, the
//! characteristic 3-web and its curvature, and invariants read off from a
//! sampled position vector.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::catalog::JetField;
use crate::error::{Error, Result};
use crate::fields::{cubic_roots, exterior_derivative, same_grid, Jet3, OneFormField, Point2, ScalarField2D};
use crate::wdvv::Case;

/// Default floor on |r_w² − 4 s_w t_w| in the web connection form.
pub const WEB_FLOOR: f64 = 1e-12;

/// Pointwise centroaffine data of a surface with flat metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentroaffineData {
    /// Coefficients of dx², dxdy, dy².
    pub metric: [f64; 3],
    /// Coefficients of dx³, dx²dy, dxdy², dy³.
    pub cubic: [f64; 4],
    /// Components (T₁, T₂) of the Chebyshev covector.
    pub chebyshev: [f64; 2],
    #[serde(rename = "K")]
    pub k: f64,
}

/// Metric η, cubic form d³f and T = ½ d(Δf) in flat coordinates.
pub fn centroaffine_from_jet(j: &Jet3, case: Case) -> CentroaffineData {
    let cubic = [j.p, 3.0 * j.a, 3.0 * j.b, j.q];
    match case {
        Case::Hyperbolic => CentroaffineData { metric: [0.0, 2.0, 0.0], cubic, chebyshev: [j.a, j.b], k: 0.0 },
        Case::Convex => CentroaffineData {
            metric: [1.0, 0.0, 1.0],
            cubic,
            chebyshev: [0.5 * (j.p + j.b), 0.5 * (j.a + j.q)],
            k: 0.0,
        },
    }
}

/// Metric potential u (M = 2eᵘdxdy) and cubic coefficients in asymptotic
/// coordinates, all on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticFields {
    pub u: ScalarField2D,
    pub a: ScalarField2D,
    pub b: ScalarField2D,
    pub p: ScalarField2D,
    pub q: ScalarField2D,
}

impl AsymptoticFields {
    pub fn new(
        u: ScalarField2D,
        a: ScalarField2D,
        b: ScalarField2D,
        p: ScalarField2D,
        q: ScalarField2D,
    ) -> Result<Self> {
        same_grid(&[&u, &a, &b, &p, &q])?;
        if u.values.iter().any(|v| !v.exp().is_finite()) {
            return Err(Error::InvalidParameter("eᵘ overflows on the grid".into()));
        }
        Ok(AsymptoticFields { u, a, b, p, q })
    }

    /// Flat data (u = 0) from the third derivatives of a potential.
    pub fn flat(jets: &JetField) -> Self {
        AsymptoticFields {
            u: ScalarField2D::constant(jets.grid, 0.0),
            a: jets.component(|j| j.a),
            b: jets.component(|j| j.b),
            p: jets.component(|j| j.p),
            q: jets.component(|j| j.q),
        }
    }

    /// Samples `(u, a, b, p, q)` from a closure.
    pub fn from_fn<F>(grid: crate::fields::Grid2D, f: F) -> Result<Self>
    where
        F: Fn(Point2) -> [f64; 5] + Sync,
    {
        let comp = |k: usize| ScalarField2D::from_fn(grid, |pt| f(pt)[k]);
        Self::new(comp(0), comp(1), comp(2), comp(3), comp(4))
    }
}

/// Gauss–Codazzi residuals together with K = −e^{−u}u_xy.
#[derive(Clone, Debug, PartialEq)]
pub struct Comp4Residual {
    pub residuals: [ScalarField2D; 4],
    pub k: ScalarField2D,
}

/// K = −e^{−u}u_xy by central differences.
pub fn gaussian_curvature(u: &ScalarField2D) -> ScalarField2D {
    u.d_dxdy().zip_with(u, |uxy, u| -(-u).exp() * uxy).expect("same grid")
}

/// Residuals of a_y − b_x, a_x − p_y − au_x − pu_y, b_y − q_x − qu_x − bu_y
/// and pq − ab − eᵘ(K + 1).
pub fn comp4_residual(f: &AsymptoticFields) -> Result<Comp4Residual> {
    let g = same_grid(&[&f.u, &f.a, &f.b, &f.p, &f.q])?;
    let k = gaussian_curvature(&f.u);
    let (ux, uy) = (f.u.d_dx(), f.u.d_dy());
    let (ax, ay, bx, by) = (f.a.d_dx(), f.a.d_dy(), f.b.d_dx(), f.b.d_dy());
    let (py, qx) = (f.p.d_dy(), f.q.d_dx());
    let n = g.len();
    let mut r = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for m in 0..n {
        let (a, b, p, q, u) = (f.a.values[m], f.b.values[m], f.p.values[m], f.q.values[m], f.u.values[m]);
        r[0][m] = ay.values[m] - bx.values[m];
        r[1][m] = ax.values[m] - py.values[m] - a * ux.values[m] - p * uy.values[m];
        r[2][m] = by.values[m] - qx.values[m] - q * ux.values[m] - b * uy.values[m];
        r[3][m] = p * q - a * b - u.exp() * (k.values[m] + 1.0);
    }
    let [r0, r1, r2, r3] = r.map(|values| ScalarField2D { grid: g, values });
    Ok(Comp4Residual { residuals: [r0, r1, r2, r3], k })
}

/// u_xy − eᵘ + e^{−2u}.
pub fn tzitzeica_residual(u: &ScalarField2D) -> ScalarField2D {
    u.d_dxdy().zip_with(u, |uxy, u| uxy - u.exp() + (-2.0 * u).exp()).expect("same grid")
}

/// Coefficients of p dx³ + a dx²dy − b dxdy² − q dy³.
pub fn characteristic_cubic(j: &Jet3) -> [f64; 4] {
    [j.p, j.a, -j.b, -j.q]
}

/// Roots λ = −dx/dy of the characteristic cubic, i.e. of pλ³ − aλ² − bλ + q.
pub fn characteristic_roots(j: &Jet3) -> Result<[Complex64; 3]> {
    cubic_roots(j.p, -j.a, -j.b, j.q)
}

/// The quantities r_w, s_w, t_w entering the web connection form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WebScalars {
    pub r_w: f64,
    pub s_w: f64,
    pub t_w: f64,
}

impl WebScalars {
    pub fn new(a: f64, b: f64, p: f64, q: f64) -> Self {
        WebScalars { r_w: a * b - 9.0 * p * q, s_w: b * b + 3.0 * a * q, t_w: a * a + 3.0 * b * p }
    }

    pub fn denominator(&self) -> f64 {
        self.r_w * self.r_w - 4.0 * self.s_w * self.t_w
    }
}

/// ω = −3eᵘ/(r²−4st)·((rK_x − 2tK_y)dx + (rK_y − 2sK_x)dy).
pub fn web_connection_form(f: &AsymptoticFields, floor: f64) -> Result<OneFormField> {
    let g = same_grid(&[&f.u, &f.a, &f.b, &f.p, &f.q])?;
    let k = gaussian_curvature(&f.u);
    let (kx, ky) = (k.d_dx(), k.d_dy());
    let mut bad = Vec::new();
    let mut cx = vec![0.0; g.len()];
    let mut cy = vec![0.0; g.len()];
    for m in 0..g.len() {
        let w = WebScalars::new(f.a.values[m], f.b.values[m], f.p.values[m], f.q.values[m]);
        let den = w.denominator();
        if !(den.abs() > floor) {
            bad.push(g.node(m));
            continue;
        }
        let s = -3.0 * f.u.values[m].exp() / den;
        let (kx, ky) = (kx.values[m], ky.values[m]);
        cx[m] = s * (w.r_w * kx - 2.0 * w.t_w * ky);
        cy[m] = s * (w.r_w * ky - 2.0 * w.s_w * kx);
    }
    if !bad.is_empty() {
        return Err(Error::DenominatorFloor { nodes: bad });
    }
    OneFormField::new(ScalarField2D { grid: g, values: cx }, ScalarField2D { grid: g, values: cy })
}

/// Ω = dω; the web is hexagonal where it vanishes.
pub fn web_curvature(f: &AsymptoticFields, floor: f64) -> Result<ScalarField2D> {
    Ok(exterior_derivative(&web_connection_form(f, floor)?))
}

/// Metric coefficients (g₁₁, g₁₂, g₂₂) with gᵢⱼ = det(rᵢⱼ, r_x, r_y)/det(r, r_x, r_y).
pub fn invariants_from_position(r: &[ScalarField2D; 3]) -> Result<[ScalarField2D; 3]> {
    let g = same_grid(&[&r[0], &r[1], &r[2]])?;
    let rx = r.each_ref().map(|c| c.d_dx());
    let ry = r.each_ref().map(|c| c.d_dy());
    let rxx = rx.each_ref().map(|c| c.d_dx());
    let rxy = r.each_ref().map(|c| c.d_dxdy());
    let ryy = ry.each_ref().map(|c| c.d_dy());
    let vec3 = |f: &[ScalarField2D; 3], m: usize| [f[0].values[m], f[1].values[m], f[2].values[m]];
    let det = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| {
        a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
    };
    let norm = |a: [f64; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let mut out = [vec![f64::NAN; g.len()], vec![f64::NAN; g.len()], vec![f64::NAN; g.len()]];
    for m in 0..g.len() {
        let (i, j) = g.node(m);
        // Second x and y differences of first differences need two nodes of margin.
        if !g.is_interior(i, j, 2) {
            continue;
        }
        let (p, px, py) = (vec3(r, m), vec3(&rx, m), vec3(&ry, m));
        let d = det(p, px, py);
        if !(d.abs() > 1e-12 * norm(p) * norm(px) * norm(py)) {
            return Err(Error::DegenerateFrame { i, j });
        }
        out[0][m] = det(vec3(&rxx, m), px, py) / d;
        out[1][m] = det(vec3(&rxy, m), px, py) / d;
        out[2][m] = det(vec3(&ryy, m), px, py) / d;
    }
    Ok(out.map(|values| ScalarField2D { grid: g, values }))
}

/// Centroaffine metric (g₁₁, g₁₂, g₂₂) = −fᵢⱼ/(x f_x + y f_y − f) of the graph z = f(x, y).
pub fn graph_metric(j: &Jet3, pt: Point2) -> Result<[f64; 3]> {
    let big_f = pt.x * j.fx + pt.y * j.fy - j.f;
    if big_f == 0.0 || !big_f.is_finite() {
        return Err(Error::Singular(format!("tangent plane passes through the origin at ({}, {})", pt.x, pt.y)));
    }
    Ok([-j.fxx / big_f, -j.fxy / big_f, -j.fyy / big_f])
}

/// Largest |λ₁ + λ₂| over paired roots, where λ₁ runs over zero directions
/// (−dx/dy) of C − 2TM and λ₂ over those of the characteristic cubic. Both
/// triples are sorted by real then imaginary part and the second is paired in
/// reverse. Zero means every pair is conjugate for M = 2dxdy.
pub fn conjugacy_defect(j: &Jet3) -> Result<f64> {
    // C − 2TM = p dx³ − a dx²dy − b dxdy² + q dy³
    let mut first = cubic_roots(-j.p, -j.a, j.b, j.q)?;
    let mut second = characteristic_roots(j)?;
    let key = |z: &Complex64, w: &Complex64| z.re.total_cmp(&w.re).then(z.im.total_cmp(&w.im));
    first.sort_by(key);
    second.sort_by(key);
    let scale = first.iter().chain(&second).fold(1.0f64, |m, z| m.max(z.norm()));
    Ok((0..3).map(|k| (first[k] + second[2 - k]).norm()).fold(0.0, f64::max) / scale)
}
