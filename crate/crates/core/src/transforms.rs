//! From the associativity equation in (x, y) to the 3-wave system: the
//! (t, y) reparametrization, characteristic variables and coordinates, the
//! SO(2,1) forms and the wave amplitudes on a characteristic grid.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{JetField, JetSource, Solution};
use crate::error::{Error, Result};
use crate::fields::{cubic_roots, exterior_derivative, same_grid, Grid2D, Jet3, OneFormField, Point2, ScalarField2D};
use crate::frames::SweepOrder;
use crate::sampling::{sample_points, Domain};

/// Jet of f at (x, y) from the jet of F at (t, y), with x = F_ty,
/// f_xx = t, f_xy = −F_yy, f_yy = F_tt and p = 1/F_tty, a = −F_tyy/F_tty,
/// b = F_tyy²/F_tty − F_yyy, q = (1 + ab)/p. The value and first
/// derivatives of f are not determined and are returned as zero.
pub fn ass3_to_ass1(cap: &dyn JetSource, pt_ty: Point2) -> Result<(f64, Jet3)> {
    let j = cap.jet(pt_ty)?;
    // Slots of F: fxx = F_tt, fxy = F_ty, fyy = F_yy, p = F_ttt, a = F_tty, b = F_tyy, q = F_yyy.
    let (f_tty, f_tyy, f_yyy) = (j.a, j.b, j.q);
    if f_tty == 0.0 || !f_tty.is_finite() {
        return Err(Error::Singular(format!("F_tty vanishes at (t, y) = ({}, {})", pt_ty.x, pt_ty.y)));
    }
    let p = 1.0 / f_tty;
    let a = -f_tyy / f_tty;
    let b = f_tyy * f_tyy / f_tty - f_yyy;
    let q = (1.0 + a * b) / p;
    let jet = Jet3 { f: 0.0, fx: 0.0, fy: 0.0, fxx: pt_ty.x, fxy: -j.fyy, fyy: j.fxx, p, a, b, q };
    Ok((j.fxy, jet))
}

/// Agreement of a table pair through [`ass3_to_ass1`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub cap_id: String,
    pub f_id: String,
    pub points: usize,
    /// Largest difference in (p, a, b, q).
    pub third_order: f64,
    /// Largest variation of the difference in (f_xx, f_xy, f_yy) about its
    /// value at the first point.
    pub second_order: f64,
    /// Difference in (f_xx, f_xy, f_yy) at the first point.
    pub offsets: [f64; 3],
}

/// Maps `n` seeded points of F's default domain to (x, y) and compares the
/// transformed jet with the catalogued f.
pub fn pairing_check(cap: &Solution, f: &Solution, n: usize, seed: u64) -> Result<PairingReport> {
    let admissible = |pt: Point2| match ass3_to_ass1(cap, pt) {
        Ok((x, _)) => f.eval_jet(Point2::new(x, pt.y)).is_ok(),
        Err(_) => false,
    };
    let pts = sample_points(&cap.default_domain(), n, seed, admissible)?;
    let mut third = 0.0f64;
    let mut second = 0.0f64;
    let mut offsets = None;
    for pt in &pts {
        let (x, mapped) = ass3_to_ass1(cap, *pt)?;
        let want = f.eval_jet(Point2::new(x, pt.y))?;
        for (u, v) in mapped.third().iter().zip(want.third()) {
            third = third.max((u - v).abs() / (1.0 + v.abs()));
        }
        let d = [mapped.fxx - want.fxx, mapped.fxy - want.fxy, mapped.fyy - want.fyy];
        let o = *offsets.get_or_insert(d);
        for k in 0..3 {
            second = second.max((d[k] - o[k]).abs());
        }
    }
    Ok(PairingReport {
        cap_id: cap.id().to_string(),
        f_id: f.id().to_string(),
        points: pts.len(),
        third_order: third,
        second_order: second,
        offsets: offsets.unwrap_or([0.0; 3]),
    })
}

/// Roots w of w³ − 2aw² + (a² − pb)w − p.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharTriple {
    pub w: [Complex64; 3],
    /// All three roots are real.
    pub real: bool,
}

impl CharTriple {
    /// A triple given directly in its labelling.
    pub fn from_real(w: [f64; 3]) -> Self {
        CharTriple { w: w.map(|v| Complex64::new(v, 0.0)), real: true }
    }

    /// Real parts of the roots, or an error if they are complex, coincide
    /// or vanish.
    pub fn real_roots(&self) -> Result<[f64; 3]> {
        if !self.real {
            return Err(Error::ComplexRoots);
        }
        let w = self.w.map(|z| z.re);
        let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = 1e-12 * scale;
        if w.iter().any(|v| v.abs() <= tiny) || (w[0] - w[1]).abs() <= tiny || (w[0] - w[2]).abs() <= tiny
            || (w[1] - w[2]).abs() <= tiny
        {
            return Err(Error::CoincidentRoots);
        }
        Ok(w)
    }
}

/// Characteristic variables. Real roots are labelled through u = 1/w:
/// u¹ is the smallest, u² the largest and u³ the middle one, which is the
/// chamber where the square roots of the SO(2,1) forms are real.
pub fn char_variables(j: &Jet3) -> Result<CharTriple> {
    if j.p == 0.0 {
        return Err(Error::CoincidentRoots);
    }
    let r = cubic_roots(1.0, -2.0 * j.a, j.a * j.a - j.p * j.b, -j.p)?;
    if r.iter().any(|z| z.im != 0.0) {
        return Ok(CharTriple { w: r, real: false });
    }
    let mut u = r.map(|z| 1.0 / z.re);
    u.sort_by(f64::total_cmp);
    let w = [1.0 / u[0], 1.0 / u[2], 1.0 / u[1]];
    Ok(CharTriple::from_real(w))
}

/// Coefficients (dx, dy) of dξ and dη:
/// dξ = (w² − w³)(dx + v₃dy), dη = (w¹ − w³)(dx + v₂dy), where
/// vₖ = (Σw − 2wᵏ')/(2w¹w²w³) with v₁ = (w¹+w²−w³)/(2P),
/// v₂ = (w¹+w³−w²)/(2P), v₃ = (w²+w³−w¹)/(2P).
pub fn char_coordinate_forms(t: &CharTriple) -> Result<([f64; 2], [f64; 2])> {
    let [w1, w2, w3] = t.real_roots()?;
    let v = char_velocities([w1, w2, w3]);
    Ok(([w2 - w3, (w2 - w3) * v[2]], [w1 - w3, (w1 - w3) * v[1]]))
}

/// (v₁, v₂, v₃); dx + vₖdy is annihilated along the k-th family.
pub fn char_velocities(w: [f64; 3]) -> [f64; 3] {
    let [w1, w2, w3] = w;
    let pp = 2.0 * w1 * w2 * w3;
    [(w1 + w2 - w3) / pp, (w1 + w3 - w2) / pp, (w2 + w3 - w1) / pp]
}

/// Coefficients of (w² − w¹)(dx + v₁dy), which equals dξ − dη.
pub fn third_char_form(t: &CharTriple) -> Result<[f64; 2]> {
    let [w1, w2, w3] = t.real_roots()?;
    let v = char_velocities([w1, w2, w3]);
    Ok([w2 - w1, (w2 - w1) * v[0]])
}

/// Metric E dξ² + 2F dξdη + G dη² and the second-fundamental-form
/// coefficients in characteristic coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharMetric {
    pub e_c: f64,
    pub f_c: f64,
    pub g_c: f64,
    pub h1_11: f64,
    pub h2_22: f64,
    pub h1_12: f64,
    pub h2_12: f64,
}

impl CharMetric {
    /// (EG − F²)² + F(E + F)(G + F), relative to the size of its terms.
    pub fn identity_residual(&self) -> f64 {
        let (e, f, g) = (self.e_c, self.f_c, self.g_c);
        let a = (e * g - f * f).powi(2);
        let b = f * (e + f) * (g + f);
        (a + b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }
}

pub fn char_metric(t: &CharTriple) -> Result<CharMetric> {
    let [w1, w2, w3] = t.real_roots()?;
    let pp = w1 * w2 * w3;
    let s = w1 * w2 + w1 * w3 + w2 * w3;
    Ok(CharMetric {
        e_c: pp * (w2 - w1 - w3) / ((w2 - w1).powi(2) * (w2 - w3).powi(2)),
        f_c: w1 * w2 * w3 * w3 / ((w1 - w2).powi(2) * (w1 - w3) * (w2 - w3)),
        g_c: pp * (w1 - w2 - w3) / ((w1 - w2).powi(2) * (w1 - w3).powi(2)),
        h1_11: (w2 * w2 - s) / ((w2 - w1) * (w2 - w3)),
        h2_22: (w1 * w1 - s) / ((w1 - w2) * (w1 - w3)),
        h1_12: -w2 * w3 / ((w1 - w2) * (w1 - w3)),
        h2_12: -w1 * w3 / ((w2 - w1) * (w2 - w3)),
    })
}

/// Coefficients of 2dxdy rewritten in dξ, dη from the forms of a triple,
/// as (E, F, G).
pub fn pulled_back_metric(t: &CharTriple) -> Result<[f64; 3]> {
    let (xi, eta) = char_coordinate_forms(t)?;
    // [dξ; dη] = J [dx; dy]; rows of J⁻¹ express dx, dy.
    let det = xi[0] * eta[1] - xi[1] * eta[0];
    let dx = [eta[1] / det, -xi[1] / det];
    let dy = [-eta[0] / det, xi[0] / det];
    Ok([2.0 * dx[0] * dy[0], dx[0] * dy[1] + dx[1] * dy[0], 2.0 * dx[1] * dy[1]])
}

fn wedge(a: &OneFormField, b: &OneFormField) -> ScalarField2D {
    let g = a.grid();
    let values = (0..g.len())
        .map(|k| a.cx.values[k] * b.cy.values[k] - a.cy.values[k] * b.cx.values[k])
        .collect();
    ScalarField2D { grid: g, values }
}

/// The three SO(2,1) forms and the defects of dω¹ = ω²∧ω³, dω² = ω³∧ω¹,
/// dω³ = ω²∧ω¹.
#[derive(Clone, Debug, PartialEq)]
pub struct So21 {
    pub omega: [OneFormField; 3],
    pub structure: [ScalarField2D; 3],
}

/// SO(2,1) forms from uⁱ fields, with du by central differences. Every node
/// must satisfy (u²−u¹)(u³−u¹) > 0, (u²−u¹)(u²−u³) > 0 and (u³−u¹)(u²−u³) > 0.
pub fn so21_forms(u: &[ScalarField2D; 3]) -> Result<So21> {
    let g = same_grid(&[&u[0], &u[1], &u[2]])?;
    let bad: Vec<(usize, usize)> = (0..g.len())
        .filter(|&k| {
            let (u1, u2, u3) = (u[0].values[k], u[1].values[k], u[2].values[k]);
            !((u2 - u1) * (u3 - u1) > 0.0 && (u2 - u1) * (u2 - u3) > 0.0 && (u3 - u1) * (u2 - u3) > 0.0)
        })
        .map(|k| g.node(k))
        .collect();
    if !bad.is_empty() {
        return Err(Error::ChamberViolation { nodes: bad });
    }
    let du = u.each_ref().map(OneFormField::gradient);
    let build = |coef: &dyn Fn(f64, f64, f64) -> ([f64; 3], f64)| {
        let mut cx = vec![0.0; g.len()];
        let mut cy = vec![0.0; g.len()];
        for k in 0..g.len() {
            let (c, den) = coef(u[0].values[k], u[1].values[k], u[2].values[k]);
            cx[k] = (0..3).map(|i| c[i] * du[i].cx.values[k]).sum::<f64>() / den;
            cy[k] = (0..3).map(|i| c[i] * du[i].cy.values[k]).sum::<f64>() / den;
        }
        OneFormField { cx: ScalarField2D { grid: g, values: cx }, cy: ScalarField2D { grid: g, values: cy } }
    };
    let w1 = build(&|u1, u2, u3| {
        ([u2 - u3, u1 - u3, u2 - u1], 2.0 * (u2 - u3) * ((u2 - u1) * (u3 - u1)).sqrt())
    });
    let w2 = build(&|u1, u2, u3| {
        ([u2 - u3, u1 - u3, u1 - u2], 2.0 * (u3 - u1) * ((u2 - u1) * (u2 - u3)).sqrt())
    });
    let w3 = build(&|u1, u2, u3| {
        ([u2 - u3, u3 - u1, u2 - u1], 2.0 * (u2 - u1) * ((u3 - u1) * (u2 - u3)).sqrt())
    });
    let diff = |a: ScalarField2D, b: ScalarField2D| a.zip_with(&b, |x, y| x - y).expect("same grid");
    let structure = [
        diff(exterior_derivative(&w1), wedge(&w2, &w3)),
        diff(exterior_derivative(&w2), wedge(&w3, &w1)),
        diff(exterior_derivative(&w3), wedge(&w2, &w1)),
    ];
    Ok(So21 { omega: [w1, w2, w3], structure })
}

/// Potential of a closed 1-form by trapezoid path integration, zero at the
/// lower-left node.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    pub field: ScalarField2D,
    /// Interior max |d form|.
    pub closedness: f64,
}

pub fn integrate_closed_form(form: &OneFormField, tolerance: f64, order: SweepOrder) -> Result<Potential> {
    let g = form.grid();
    let closedness = exterior_derivative(form).norms().linf;
    if !(closedness <= tolerance) {
        return Err(Error::NotClosed { residual: closedness, tolerance });
    }
    let (cx, cy) = (&form.cx, &form.cy);
    let mut v = vec![0.0; g.len()];
    match order {
        SweepOrder::RowFirst => {
            for i in 1..g.nx {
                v[g.index(i, 0)] = v[g.index(i - 1, 0)] + 0.5 * g.dx * (cx.at(i - 1, 0) + cx.at(i, 0));
            }
            for i in 0..g.nx {
                for j in 1..g.ny {
                    v[g.index(i, j)] = v[g.index(i, j - 1)] + 0.5 * g.dy * (cy.at(i, j - 1) + cy.at(i, j));
                }
            }
        }
        SweepOrder::ColumnFirst => {
            for j in 1..g.ny {
                v[g.index(0, j)] = v[g.index(0, j - 1)] + 0.5 * g.dy * (cy.at(0, j - 1) + cy.at(0, j));
            }
            for j in 0..g.ny {
                for i in 1..g.nx {
                    v[g.index(i, j)] = v[g.index(i - 1, j)] + 0.5 * g.dx * (cx.at(i - 1, j) + cx.at(i, j));
                }
            }
        }
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("form has non-finite coefficients".into()));
    }
    Ok(Potential { field: ScalarField2D { grid: g, values: v }, closedness })
}

/// Bilinear interpolation of a field and its gradient; `None` outside the grid.
fn bilinear(f: &ScalarField2D, x: f64, y: f64) -> Option<(f64, f64, f64)> {
    let g = f.grid;
    let sx = (x - g.x0) / g.dx;
    let sy = (y - g.y0) / g.dy;
    let tol = 1e-9;
    if !(sx >= -tol && sy >= -tol && sx <= (g.nx - 1) as f64 + tol && sy <= (g.ny - 1) as f64 + tol) {
        return None;
    }
    let i = (sx.floor().max(0.0) as usize).min(g.nx - 2);
    let j = (sy.floor().max(0.0) as usize).min(g.ny - 2);
    let (s, t) = (sx - i as f64, sy - j as f64);
    let (f00, f10, f01, f11) = (f.at(i, j), f.at(i + 1, j), f.at(i, j + 1), f.at(i + 1, j + 1));
    let v = (1.0 - s) * (1.0 - t) * f00 + s * (1.0 - t) * f10 + (1.0 - s) * t * f01 + s * t * f11;
    let dx = ((1.0 - t) * (f10 - f00) + t * (f11 - f01)) / g.dx;
    let dy = ((1.0 - s) * (f01 - f00) + s * (f11 - f10)) / g.dy;
    Some((v, dx, dy))
}

/// Point (x, y) where the bilinear interpolants of ξ and η take the target
/// values, by Newton's method from `guess`.
fn preimage(xi: &ScalarField2D, eta: &ScalarField2D, target: (f64, f64), guess: Point2) -> Option<Point2> {
    let g = xi.grid;
    let (mut x, mut y) = (guess.x, guess.y);
    let scale = 1.0 + target.0.abs().max(target.1.abs());
    for _ in 0..60 {
        let (a, ax, ay) = bilinear(xi, x, y)?;
        let (b, bx, by) = bilinear(eta, x, y)?;
        let (r1, r2) = (a - target.0, b - target.1);
        if r1.abs().max(r2.abs()) < 1e-13 * scale {
            return Some(Point2::new(x, y));
        }
        let det = ax * by - ay * bx;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = (r1 * by - r2 * ay) / det;
        let dy = (ax * r2 - bx * r1) / det;
        x = (x - dx).clamp(g.x0, g.xmax());
        y = (y - dy).clamp(g.y0, g.ymax());
    }
    None
}

/// Fields sampled on a rectangular (ξ, η) grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Resampled {
    /// Grid in (ξ, η); its x and y axes are ξ and η.
    pub grid: Grid2D,
    pub fields: Vec<ScalarField2D>,
    pub preimages: Vec<Point2>,
}

/// Resamples `fields` from the (x, y) grid onto an n×n grid in (ξ, η). The
/// target rectangle is centred at the image of the centre of `sub`, has the
/// aspect ratio of the bounding box of the image of `sub`, and is shrunk
/// until its boundary pulls back into `sub`.
pub fn resample_to_char(
    xi: &ScalarField2D,
    eta: &ScalarField2D,
    fields: &[&ScalarField2D],
    sub: &Domain,
    n: usize,
) -> Result<Resampled> {
    let g = same_grid(&[xi, eta])?;
    for f in fields {
        same_grid(&[xi, f])?;
    }
    sub.validate()?;
    let inside: Vec<usize> = (0..g.len())
        .filter(|&k| {
            let (i, j) = g.node(k);
            sub.contains(g.point(i, j))
        })
        .collect();
    if inside.len() < 4 {
        return Err(Error::InvalidGrid("sub-rectangle holds too few nodes".into()));
    }
    let bounds = |f: &ScalarField2D| {
        inside.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| (lo.min(f.values[k]), hi.max(f.values[k])))
    };
    let (xlo, xhi) = bounds(xi);
    let (ylo, yhi) = bounds(eta);
    let centre = Point2::new(0.5 * (sub.xmin + sub.xmax), 0.5 * (sub.ymin + sub.ymax));
    let c = (
        bilinear(xi, centre.x, centre.y).ok_or(Error::ResampleOutOfRange { xi: f64::NAN, eta: f64::NAN })?.0,
        bilinear(eta, centre.x, centre.y).ok_or(Error::ResampleOutOfRange { xi: f64::NAN, eta: f64::NAN })?.0,
    );
    let half = (0.5 * (xhi - xlo), 0.5 * (yhi - ylo));
    let nearest = |t: (f64, f64)| {
        let k = inside
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = (xi.values[a] - t.0).powi(2) + (eta.values[a] - t.1).powi(2);
                let db = (xi.values[b] - t.0).powi(2) + (eta.values[b] - t.1).powi(2);
                da.total_cmp(&db)
            })
            .expect("non-empty");
        let (i, j) = g.node(k);
        g.point(i, j)
    };
    let fits = |s: f64| {
        let m = 16;
        (0..4 * m).all(|e| {
            let u = (e % m) as f64 / m as f64;
            let (a, b) = match e / m {
                0 => (-1.0 + 2.0 * u, -1.0),
                1 => (1.0, -1.0 + 2.0 * u),
                2 => (1.0 - 2.0 * u, 1.0),
                _ => (-1.0, 1.0 - 2.0 * u),
            };
            let t = (c.0 + s * a * half.0, c.1 + s * b * half.1);
            preimage(xi, eta, t, nearest(t)).is_some_and(|p| sub.contains(p))
        })
    };
    let mut s = 1.0;
    while !fits(s) {
        s *= 0.9;
        if s < 0.02 {
            return Err(Error::ResampleOutOfRange { xi: c.0, eta: c.1 });
        }
    }
    let target = Grid2D::from_domain(c.0 - s * half.0, c.0 + s * half.0, c.1 - s * half.1, c.1 + s * half.1, n, n)?;
    let rows: Vec<Vec<Point2>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut out = Vec::with_capacity(n);
            let mut guess = None;
            for i in 0..n {
                let t = (target.x(i), target.y(j));
                let start = guess.unwrap_or_else(|| nearest(t));
                let p = preimage(xi, eta, t, start)
                    .or_else(|| preimage(xi, eta, t, nearest(t)))
                    .ok_or(Error::ResampleOutOfRange { xi: t.0, eta: t.1 })?;
                out.push(p);
                guess = Some(p);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let preimages: Vec<Point2> = rows.into_iter().flatten().collect();
    let fields = fields
        .iter()
        .map(|f| {
            let values = preimages
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let v = bilinear(f, p.x, p.y).map(|r| r.0).unwrap_or(f64::NAN);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        let (i, j) = target.node(k);
                        Err(Error::ResampleOutOfRange { xi: target.x(i), eta: target.y(j) })
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(ScalarField2D { grid: target, values })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Resampled { grid: target, fields, preimages })
}

/// pᵏ = ⟨ωᵏ, θᵏ⟩/⟨θᵏ, θᵏ⟩ with θ = (dξ, dη, dξ − dη), coefficientwise.
pub fn threewave_extract(omega: &[OneFormField; 3], dxi: &OneFormField, deta: &OneFormField) -> [ScalarField2D; 3] {
    let g = dxi.grid();
    let third = OneFormField {
        cx: dxi.cx.zip_with(&deta.cx, |a, b| a - b).expect("same grid"),
        cy: dxi.cy.zip_with(&deta.cy, |a, b| a - b).expect("same grid"),
    };
    let theta = [dxi, deta, &third];
    [0, 1, 2].map(|k| {
        let (w, t) = (&omega[k], theta[k]);
        let values = (0..g.len())
            .map(|m| {
                let (tx, ty) = (t.cx.values[m], t.cy.values[m]);
                (w.cx.values[m] * tx + w.cy.values[m] * ty) / (tx * tx + ty * ty)
            })
            .collect();
        ScalarField2D { grid: g, values }
    })
}

/// p¹_η − p²p³, p²_ξ − p¹p³, p³_ξ + p³_η − p¹p² on a (ξ, η) grid.
pub fn threewave_residual(p: &[ScalarField2D; 3]) -> Result<[ScalarField2D; 3]> {
    let g = same_grid(&[&p[0], &p[1], &p[2]])?;
    let (p1e, p2x, p3x, p3e) = (p[0].d_dy(), p[1].d_dx(), p[2].d_dx(), p[2].d_dy());
    let v = |k: usize, m: usize| p[k].values[m];
    let r1 = (0..g.len()).map(|m| p1e.values[m] - v(1, m) * v(2, m)).collect();
    let r2 = (0..g.len()).map(|m| p2x.values[m] - v(0, m) * v(2, m)).collect();
    let r3 = (0..g.len()).map(|m| p3x.values[m] + p3e.values[m] - v(0, m) * v(1, m)).collect();
    Ok([r1, r2, r3].map(|values| ScalarField2D { grid: g, values }))
}

/// Residuals of (u³−u²)u¹_ξ − (u³−u¹)u²_η, (u²−u³)(u¹_ξ+u¹_η) − (u¹−u²)u³_η,
/// (u¹−u³)(u²_ξ+u²_η) − (u²−u¹)u³_ξ on a (ξ, η) grid.
pub fn char_system_residual(u: &[ScalarField2D; 3]) -> Result<[ScalarField2D; 3]> {
    let g = same_grid(&[&u[0], &u[1], &u[2]])?;
    let ux = u.each_ref().map(|f| f.d_dx());
    let ue = u.each_ref().map(|f| f.d_dy());
    let v = |k: usize, m: usize| u[k].values[m];
    let r1 = (0..g.len()).map(|m| (v(2, m) - v(1, m)) * ux[0].values[m] - (v(2, m) - v(0, m)) * ue[1].values[m]).collect();
    let r2 = (0..g.len())
        .map(|m| (v(1, m) - v(2, m)) * (ux[0].values[m] + ue[0].values[m]) - (v(0, m) - v(1, m)) * ue[2].values[m])
        .collect();
    let r3 = (0..g.len())
        .map(|m| (v(0, m) - v(2, m)) * (ux[1].values[m] + ue[1].values[m]) - (v(1, m) - v(0, m)) * ux[2].values[m])
        .collect();
    Ok([r1, r2, r3].map(|values| ScalarField2D { grid: g, values }))
}

/// Settings of [`run_chain`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Sub-rectangle of the (x, y) grid whose image sets the (ξ, η) grid.
    pub sub: Domain,
    /// Nodes per side of the (ξ, η) grid.
    pub n_char: usize,
    /// Largest admissible |d form| for dξ and dη.
    pub closed_tol: f64,
}

/// Every stage of the chain f → w → u → (ξ, η) → p.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    pub w: [ScalarField2D; 3],
    pub u: [ScalarField2D; 3],
    pub xi: ScalarField2D,
    pub eta: ScalarField2D,
    pub closedness: [f64; 2],
    pub so21: So21,
    pub p_xy: [ScalarField2D; 3],
    pub char_grid: Grid2D,
    pub p: [ScalarField2D; 3],
    pub u_char: [ScalarField2D; 3],
    pub wave_residuals: [ScalarField2D; 3],
    pub system_residuals: [ScalarField2D; 3],
}

/// Runs the chain on a solution sampled over `grid`.
pub fn run_chain(src: &dyn JetSource, grid: Grid2D, cfg: &ChainConfig) -> Result<ChainOutput> {
    let jets = JetField::sample(src, grid)?;
    let triples: Vec<Result<CharTriple>> = jets.jets.par_iter().map(char_variables).collect();
    let mut w = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
    let mut bad = Vec::new();
    let mut forms = (vec![[0.0; 2]; grid.len()], vec![[0.0; 2]; grid.len()]);
    for (k, t) in triples.into_iter().enumerate() {
        let t = t?;
        match t.real_roots().and_then(|r| Ok((r, char_coordinate_forms(&t)?))) {
            Ok((r, (a, b))) => {
                for c in 0..3 {
                    w[c][k] = r[c];
                }
                forms.0[k] = a;
                forms.1[k] = b;
            }
            Err(_) => bad.push(grid.node(k)),
        }
    }
    if !bad.is_empty() {
        return Err(Error::ChamberViolation { nodes: bad });
    }
    let w = w.map(|values| ScalarField2D { grid, values });
    let u = w.each_ref().map(|f| f.map(|v| 1.0 / v));
    let coef = |f: &Vec<[f64; 2]>, c: usize| ScalarField2D { grid, values: f.iter().map(|v| v[c]).collect() };
    let dxi = OneFormField { cx: coef(&forms.0, 0), cy: coef(&forms.0, 1) };
    let deta = OneFormField { cx: coef(&forms.1, 0), cy: coef(&forms.1, 1) };
    let xi = integrate_closed_form(&dxi, cfg.closed_tol, SweepOrder::RowFirst)?;
    let eta = integrate_closed_form(&deta, cfg.closed_tol, SweepOrder::RowFirst)?;
    let so21 = so21_forms(&u)?;
    let p_xy = threewave_extract(&so21.omega, &dxi, &deta);
    let sampled = [&p_xy[0], &p_xy[1], &p_xy[2], &u[0], &u[1], &u[2]];
    let r = resample_to_char(&xi.field, &eta.field, &sampled, &cfg.sub, cfg.n_char)?;
    let mut it = r.fields.into_iter();
    let mut next = || it.next().expect("six fields");
    let p = [next(), next(), next()];
    let u_char = [next(), next(), next()];
    let wave_residuals = threewave_residual(&p)?;
    let system_residuals = char_system_residual(&u_char)?;
    Ok(ChainOutput {
        w,
        u,
        closedness: [xi.closedness, eta.closedness],
        xi: xi.field,
        eta: eta.field,
        so21,
        p_xy,
        char_grid: r.grid,
        p,
        u_char,
        wave_residuals,
        system_residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::table_pairs;
    use crate::fields::observed_orders;
    use crate::invariants::characteristic_roots;
    use proptest::prelude::*;

    #[test]
    fn worked_pairings() {
        let cap = Solution::get("table1_F").unwrap();
        let (x, j) = ass3_to_ass1(&cap, Point2::new(1.0, 2.0)).unwrap();
        assert_eq!(x, 2.0);
        assert_eq!((j.p, j.a, j.b), (0.5, -0.5, 0.5));
        let f = Solution::get("table1_f").unwrap().eval_jet(Point2::new(2.0, 2.0)).unwrap();
        for (u, v) in j.third().iter().zip(f.third()) {
            assert!((u - v).abs() < 1e-15);
        }
        assert_eq!((j.fxx, j.fxy, j.fyy), (f.fxx, f.fxy, f.fyy));
        let cap4 = Solution::get("table4_F").unwrap();
        let (x, j) = ass3_to_ass1(&cap4, Point2::new(1.0, 1.0)).unwrap();
        assert_eq!((x, j.p), (1.0, 1.0));
        let f4 = Solution::get("table4_f").unwrap().eval_jet(Point2::new(1.0, 1.0)).unwrap();
        assert!(j.third().iter().zip(f4.third()).all(|(u, v)| (u - v).abs() < 1e-14));
    }

    #[test]
    fn all_table_pairs_agree() {
        for (cap, f, tol) in table_pairs() {
            let r = pairing_check(&Solution::get(cap).unwrap(), &Solution::get(f).unwrap(), 50, 1).unwrap();
            assert_eq!(r.points, 50);
            assert!(r.third_order <= tol && r.second_order <= tol, "{r:?}");
            if f != "table3_f" {
                assert!(r.offsets.iter().all(|o| o.abs() <= tol), "{r:?}");
            } else {
                assert!((r.offsets[0] - 2f64.ln()).abs() < tol && r.offsets[1].abs() < tol && r.offsets[2].abs() < tol);
            }
        }
    }

    #[test]
    fn char_variable_examples() {
        let t = char_variables(&Jet3::from_third(6.0, 3.0, -1.0 / 3.0, 0.0)).unwrap();
        assert!(t.real);
        let w = t.real_roots().unwrap();
        let mut sorted = w;
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] - 1.0).abs() < 1e-12 && (sorted[1] - 2.0).abs() < 1e-12 && (sorted[2] - 3.0).abs() < 1e-12);
        // u = 1/w: u¹ = 1/3, u³ = 1/2, u² = 1.
        assert!((w[0] - 3.0).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12 && (w[2] - 2.0).abs() < 1e-12);
        let c = char_variables(&Jet3::from_third(1.0, 0.0, 0.0, 1.0)).unwrap();
        assert!(!c.real);
        assert_eq!(char_coordinate_forms(&c).unwrap_err(), Error::ComplexRoots);
        assert_eq!(
            char_coordinate_forms(&CharTriple::from_real([1.0, 1.0, 2.0])).unwrap_err(),
            Error::CoincidentRoots
        );
    }

    #[test]
    fn worked_triple() {
        let t = CharTriple::from_real([1.0, 2.0, 3.0]);
        let m = char_metric(&t).unwrap();
        assert!((m.e_c + 12.0).abs() < 1e-12 && (m.f_c - 9.0).abs() < 1e-12 && (m.g_c + 6.0).abs() < 1e-12);
        assert!(m.identity_residual() < 1e-12);
        let (xi, eta) = char_coordinate_forms(&t).unwrap();
        assert!((xi[0] + 1.0).abs() < 1e-15 && (xi[1] + 1.0 / 3.0).abs() < 1e-15);
        assert!((eta[0] + 2.0).abs() < 1e-15 && (eta[1] + 1.0 / 3.0).abs() < 1e-15);
        let pb = pulled_back_metric(&t).unwrap();
        assert!((pb[0] + 12.0).abs() < 1e-12 && (pb[1] - 9.0).abs() < 1e-12 && (pb[2] + 6.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_integration() {
        let g = Grid2D::from_domain(0.5, 1.5, -0.5, 0.5, 17, 17).unwrap();
        let exact = OneFormField::from_fn(g, |pt| (pt.y, pt.x));
        let p = integrate_closed_form(&exact, 1e-12, SweepOrder::RowFirst).unwrap();
        let ok = (0..g.len()).all(|k| {
            let (i, j) = g.node(k);
            (p.field.values[k] - (g.x(i) * g.y(j) - g.x0 * g.y0)).abs() < 1e-13
        });
        assert!(ok);
        let rot = OneFormField::from_fn(g, |pt| (-pt.y, pt.x));
        assert!(matches!(integrate_closed_form(&rot, 1e-6, SweepOrder::RowFirst), Err(Error::NotClosed { .. })));
    }

    #[test]
    fn constant_u_gives_zero_forms() {
        let g = Grid2D::from_domain(0.0, 1.0, 0.0, 1.0, 9, 9).unwrap();
        let u = [1.0, 3.0, 2.0].map(|c| ScalarField2D::constant(g, c));
        let s = so21_forms(&u).unwrap();
        assert!(s.omega.iter().all(|w| w.cx.norms().linf == 0.0 && w.cy.norms().linf == 0.0));
        assert!(s.structure.iter().all(|r| r.norms().linf == 0.0));
        let wrong = [1.0, 2.0, 3.0].map(|c| ScalarField2D::constant(g, c));
        assert!(matches!(so21_forms(&wrong), Err(Error::ChamberViolation { .. })));
    }

    #[test]
    fn structure_equations_converge_on_generic_fields() {
        let mut errs = Vec::new();
        for n in [33, 65, 129] {
            let g = Grid2D::from_domain(0.0, 1.0, 0.0, 1.0, n, n).unwrap();
            let u = [
                ScalarField2D::from_fn(g, |pt| 0.2 * (pt.x + pt.y * pt.y)),
                ScalarField2D::from_fn(g, |pt| 3.0 + (pt.x * pt.y).sin()),
                ScalarField2D::from_fn(g, |pt| 1.5 + 0.3 * pt.x - 0.2 * pt.y),
            ];
            let s = so21_forms(&u).unwrap();
            let inner = Domain::new(0.1, 0.9, 0.1, 0.9);
            errs.push(s.structure.iter().fold(0.0f64, |m, r| m.max(r.norms_within(&inner).linf)));
        }
        assert!(observed_orders(&errs).iter().all(|&o| o > 1.8), "{errs:?}");
    }

    #[test]
    fn threewave_trivial_cases() {
        let g = Grid2D::from_domain(0.0, 1.0, 0.0, 1.0, 9, 9).unwrap();
        let z = ScalarField2D::constant(g, 0.0);
        let r = threewave_residual(&[z.clone(), z.clone(), z.clone()]).unwrap();
        assert!(r.iter().all(|f| f.norms().linf == 0.0));
        let p3 = ScalarField2D::from_fn(g, |pt| (pt.x - pt.y).sin());
        let r = threewave_residual(&[z.clone(), z.clone(), p3]).unwrap();
        assert!(r.iter().all(|f| f.norms().linf < 1e-14));
    }

    #[test]
    fn resampling_inverts_linear_map() {
        let g = Grid2D::from_domain(0.0, 1.0, 0.0, 1.0, 33, 33).unwrap();
        let xi = ScalarField2D::from_fn(g, |pt| -pt.x - pt.y / 3.0);
        let eta = ScalarField2D::from_fn(g, |pt| -2.0 * pt.x - pt.y / 3.0);
        let f = ScalarField2D::from_fn(g, |pt| pt.x + 2.0 * pt.y);
        let sub = Domain::new(0.25, 0.75, 0.25, 0.75);
        let r = resample_to_char(&xi, &eta, &[&f], &sub, 17).unwrap();
        // x = ξ − η, y = −6ξ + 3η.
        let ok = (0..r.grid.len()).all(|k| {
            let (i, j) = r.grid.node(k);
            let (a, b) = (r.grid.x(i), r.grid.y(j));
            let (x, y) = (a - b, -6.0 * a + 3.0 * b);
            sub.contains(Point2::new(x, y)) && (r.fields[0].values[k] - (x + 2.0 * y)).abs() < 1e-12
        });
        assert!(ok);
    }

    #[test]
    fn rarefaction_chain_converges() {
        let sol = Solution::get("rarefaction").unwrap();
        let cfg = ChainConfig { sub: Domain::new(0.25, 0.75, 0.25, 0.75), n_char: 33, closed_tol: 1e-2 };
        let mut errs = Vec::new();
        for n in [65, 129, 257] {
            let g = Grid2D::from_domain(0.0, 1.0, 0.0, 1.0, n, n).unwrap();
            let out = run_chain(&sol, g, &cfg).unwrap();
            errs.push(out.wave_residuals.iter().fold(0.0f64, |m, r| m.max(r.norms().linf)));
        }
        assert!(errs[1] <= 0.05 && observed_orders(&errs).iter().all(|&o| o >= 1.0), "{errs:?}");
    }

    proptest! {
        #[test]
        fn metric_identity_and_forms(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64) {
            let w = [a, b, c];
            let gap = (a - b).abs().min((a - c).abs()).min((b - c).abs());
            prop_assume!(gap > 0.05 && w.iter().all(|v| v.abs() > 0.05));
            let t = CharTriple::from_real(w);
            let m = char_metric(&t).unwrap();
            prop_assert!(m.identity_residual() < 1e-9);
            let pb = pulled_back_metric(&t).unwrap();
            for (u, v) in pb.iter().zip([m.e_c, m.f_c, m.g_c]) {
                prop_assert!((u - v).abs() < 1e-9 * (1.0 + v.abs()));
            }
            let (xi, eta) = char_coordinate_forms(&t).unwrap();
            let third = third_char_form(&t).unwrap();
            prop_assert!((xi[0] - eta[0] - third[0]).abs() < 1e-10 * (1.0 + third[0].abs()));
            prop_assert!((xi[1] - eta[1] - third[1]).abs() < 1e-10 * (1.0 + third[1].abs()));
        }

        #[test]
        fn velocities_are_characteristic_speeds(w1 in 0.2..3.0f64, w2 in -3.0..3.0f64, w3 in -3.0..3.0f64) {
            let gap = (w1 - w2).abs().min((w1 - w3).abs()).min((w2 - w3).abs());
            prop_assume!(gap > 0.05 && w2.abs() > 0.05 && w3.abs() > 0.05);
            // Coefficients whose characteristic cubic has roots w1, w2, w3.
            let p = w1 * w2 * w3;
            let a = 0.5 * (w1 + w2 + w3);
            let b = (a * a - (w1 * w2 + w1 * w3 + w2 * w3)) / p;
            let j = Jet3::from_third(p, a, b, (1.0 + a * b) / p);
            let t = char_variables(&j).unwrap();
            prop_assert!(t.real);
            let w = t.real_roots().unwrap();
            let s = w[0] + w[1] + w[2];
            prop_assert!((s - 2.0 * a).abs() < 1e-9 * (1.0 + s.abs()));
            let mut v = char_velocities(w);
            let mut r: Vec<f64> = characteristic_roots(&j).unwrap().iter().map(|z| z.re).collect();
            v.sort_by(f64::total_cmp);
            r.sort_by(f64::total_cmp);
            for k in 0..3 {
                prop_assert!((v[k] - r[k]).abs() < 1e-7 * (1.0 + r[k].abs()), "{v:?} {r:?}");
            }
        }
    }
}
