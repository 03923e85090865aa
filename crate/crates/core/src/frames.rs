//! The λ-family of frame equations ψ_x = λAₓψ, ψ_y = λA_yψ with
//! ψ = (λr, r_x, r_y)ᵀ, integrated over a grid, plus the traceless gauge and
//! the projective data carried by a solution.

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{JetField, JetSource};
use crate::error::{Error, Result};
use crate::fields::{same_grid, Grid2D, Jet3, Mat3, Point2, ScalarField2D};
use crate::sampling::Domain;
use crate::wdvv::Case;

/// Coefficient matrices of the frame equations at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaxPair {
    pub ax: Mat3,
    pub ay: Mat3,
}

/// Aₓ, A_y assembled from the third derivatives.
pub fn lax_matrices(j: &Jet3, case: Case) -> LaxPair {
    let (p, a, b, q) = (j.p, j.a, j.b, j.q);
    match case {
        Case::Hyperbolic => LaxPair {
            ax: Mat3::new(0.0, 1.0, 0.0, 0.0, a, p, 1.0, b, a),
            ay: Mat3::new(0.0, 0.0, 1.0, 1.0, b, a, 0.0, q, b),
        },
        Case::Convex => LaxPair {
            ax: Mat3::new(0.0, 1.0, 0.0, 1.0, p, a, 0.0, a, b),
            ay: Mat3::new(0.0, 0.0, 1.0, 0.0, a, b, 1.0, b, q),
        },
    }
}

/// Order in which the grid is swept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepOrder {
    /// Along the first row in x, then up every column in y.
    RowFirst,
    /// Up the first column in y, then along every row in x.
    ColumnFirst,
}

/// Frames ψ at every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameField {
    pub grid: Grid2D,
    pub lambda: f64,
    pub frames: Vec<Mat3>,
}

impl FrameField {
    pub fn at(&self, i: usize, j: usize) -> &Mat3 {
        &self.frames[self.grid.index(i, j)]
    }

    /// Entry (row, col) of every frame.
    pub fn entry(&self, row: usize, col: usize) -> ScalarField2D {
        ScalarField2D { grid: self.grid, values: self.frames.iter().map(|m| m[(row, col)]).collect() }
    }

    /// Position r = (first row of ψ)/λ; needs λ ≠ 0.
    pub fn position(&self) -> Result<[ScalarField2D; 3]> {
        if self.lambda == 0.0 {
            return Err(Error::InvalidParameter("position is not encoded in ψ at λ = 0".into()));
        }
        Ok([0, 1, 2].map(|c| self.entry(0, c).map(|v| v / self.lambda)))
    }
}

/// Output of [`integrate_frame`].
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub frame: FrameField,
    pub position: [ScalarField2D; 3],
    /// max over interior nodes of ‖D_y(λAₓψ) − D_x(λA_yψ)‖ (Frobenius).
    pub cross_defect: f64,
}

/// Sub-steps of the classical Runge–Kutta method per grid cell.
pub const SUBSTEPS: usize = 4;

#[derive(Clone, Copy)]
enum Dir {
    X,
    Y,
}

fn coefficient(src: &dyn JetSource, case: Case, lambda: f64, dir: Dir, pt: Point2) -> Result<Mat3> {
    let l = lax_matrices(&src.jet(pt)?, case);
    Ok(lambda
        * match dir {
            Dir::X => l.ax,
            Dir::Y => l.ay,
        })
}

/// RK4 along a straight line through `start` in direction `dir`: `cells`
/// cells of signed length `d`, each split into `sub` steps. Returns the
/// frame at every cell boundary.
#[allow(clippy::too_many_arguments)]
fn march(
    src: &dyn JetSource,
    case: Case,
    lambda: f64,
    dir: Dir,
    start: Point2,
    d: f64,
    cells: usize,
    sub: usize,
    psi0: Mat3,
) -> Result<Vec<Mat3>> {
    let at = |s: f64| match dir {
        Dir::X => Point2::new(start.x + s, start.y),
        Dir::Y => Point2::new(start.x, start.y + s),
    };
    let h = d / sub as f64;
    let mut out = Vec::with_capacity(cells + 1);
    let mut psi = psi0;
    out.push(psi);
    let mut a0 = coefficient(src, case, lambda, dir, at(0.0))?;
    for c in 0..cells {
        for k in 0..sub {
            // Recompute the node parameter from integers so the end of one
            // cell is bit-identical to the grid node.
            let s0 = c as f64 * d + k as f64 * h;
            let s1 = if k + 1 == sub { (c + 1) as f64 * d } else { s0 + h };
            let am = coefficient(src, case, lambda, dir, at(0.5 * (s0 + s1)))?;
            let a1 = coefficient(src, case, lambda, dir, at(s1))?;
            let k1 = a0 * psi;
            let k2 = am * (psi + 0.5 * h * k1);
            let k3 = am * (psi + 0.5 * h * k2);
            let k4 = a1 * (psi + h * k3);
            psi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            a0 = a1;
        }
        out.push(psi);
    }
    Ok(out)
}

fn check_start(psi0: &Mat3) -> Result<()> {
    let scale = psi0.norm().powi(3);
    if !(psi0.determinant().abs() > 1e-12 * scale) {
        return Err(Error::Singular("initial frame".into()));
    }
    Ok(())
}

/// Integrates the frame equations over `grid` starting from `psi0` at the
/// lower-left node. At λ = 0 the frame is constant and the surface is the
/// plane r = r₀ + (x − x₀)r_x + (y − y₀)r_y, where the first row of `psi0` is
/// read as r₀ itself.
pub fn integrate_frame(
    src: &dyn JetSource,
    case: Case,
    lambda: f64,
    grid: Grid2D,
    psi0: Mat3,
    order: SweepOrder,
) -> Result<Reconstruction> {
    check_start(&psi0)?;
    if lambda == 0.0 {
        let frame = FrameField { grid, lambda, frames: vec![psi0; grid.len()] };
        let position = [0, 1, 2].map(|c| {
            ScalarField2D::from_fn(grid, |pt| {
                psi0[(0, c)] + (pt.x - grid.x0) * psi0[(1, c)] + (pt.y - grid.y0) * psi0[(2, c)]
            })
        });
        return Ok(Reconstruction { frame, position, cross_defect: 0.0 });
    }
    let origin = grid.point(0, 0);
    let mut frames = vec![Mat3::zeros(); grid.len()];
    match order {
        SweepOrder::RowFirst => {
            let row = march(src, case, lambda, Dir::X, origin, grid.dx, grid.nx - 1, SUBSTEPS, psi0)?;
            let cols = row
                .par_iter()
                .enumerate()
                .map(|(i, &p)| march(src, case, lambda, Dir::Y, grid.point(i, 0), grid.dy, grid.ny - 1, SUBSTEPS, p))
                .collect::<Result<Vec<_>>>()?;
            for (i, col) in cols.into_iter().enumerate() {
                for (j, m) in col.into_iter().enumerate() {
                    frames[grid.index(i, j)] = m;
                }
            }
        }
        SweepOrder::ColumnFirst => {
            let col = march(src, case, lambda, Dir::Y, origin, grid.dy, grid.ny - 1, SUBSTEPS, psi0)?;
            let rows = col
                .par_iter()
                .enumerate()
                .map(|(j, &p)| march(src, case, lambda, Dir::X, grid.point(0, j), grid.dx, grid.nx - 1, SUBSTEPS, p))
                .collect::<Result<Vec<_>>>()?;
            for (j, row) in rows.into_iter().enumerate() {
                for (i, m) in row.into_iter().enumerate() {
                    frames[grid.index(i, j)] = m;
                }
            }
        }
    }
    let frame = FrameField { grid, lambda, frames };
    let position = frame.position()?;
    let jets = JetField::sample(src, grid)?;
    let cross_defect = cross_derivative_defect(&frame, &jets, case);
    Ok(Reconstruction { frame, position, cross_defect })
}

/// max over interior nodes of ‖D_y(λAₓψ) − D_x(λA_yψ)‖ with central differences.
pub fn cross_derivative_defect(frame: &FrameField, jets: &JetField, case: Case) -> f64 {
    let g = frame.grid;
    let l = frame.lambda;
    let fx: Vec<Mat3> = (0..g.len()).map(|k| l * lax_matrices(&jets.jets[k], case).ax * frame.frames[k]).collect();
    let fy: Vec<Mat3> = (0..g.len()).map(|k| l * lax_matrices(&jets.jets[k], case).ay * frame.frames[k]).collect();
    let mut worst = 0.0f64;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let dy = (fx[g.index(i, j + 1)] - fx[g.index(i, j - 1)]) / (2.0 * g.dy);
            let dx = (fy[g.index(i + 1, j)] - fy[g.index(i - 1, j)]) / (2.0 * g.dx);
            worst = worst.max((dy - dx).norm());
        }
    }
    worst
}

/// ‖ψ_loop − ψ_start‖/‖ψ_start‖ after transporting ψ counterclockwise around
/// the boundary of `rect` with `steps` RK4 steps per edge.
pub fn holonomy_defect(
    src: &dyn JetSource,
    case: Case,
    lambda: f64,
    rect: &Domain,
    steps: usize,
    psi0: Mat3,
) -> Result<f64> {
    rect.validate()?;
    check_start(&psi0)?;
    if steps == 0 {
        return Err(Error::InvalidParameter("holonomy needs at least one step per edge".into()));
    }
    let (w, h) = (rect.xmax - rect.xmin, rect.ymax - rect.ymin);
    let n = steps;
    let last = |v: Vec<Mat3>| *v.last().expect("non-empty");
    let p = last(march(src, case, lambda, Dir::X, Point2::new(rect.xmin, rect.ymin), w / n as f64, n, 1, psi0)?);
    let p = last(march(src, case, lambda, Dir::Y, Point2::new(rect.xmax, rect.ymin), h / n as f64, n, 1, p)?);
    let p = last(march(src, case, lambda, Dir::X, Point2::new(rect.xmax, rect.ymax), -w / n as f64, n, 1, p)?);
    let p = last(march(src, case, lambda, Dir::Y, Point2::new(rect.xmin, rect.ymax), -h / n as f64, n, 1, p)?);
    Ok((p - psi0).norm() / psi0.norm())
}

/// Exact frame of the trivial cubic (p = q = 1, a = b = 0, hyperbolic) with
/// ψ = ψ₀ at offset (0, 0): ψ = Σ_α e^{λ(αX + α²Y)} Π_α ψ₀ over α³ = 1, where
/// Π_α = (I + ᾱAₓ + ᾱ²Aₓ²)/3 projects onto the α-eigenline of Aₓ.
pub fn trivial_cubic_frame(lambda: f64, dx: f64, dy: f64, psi0: &Mat3) -> Mat3 {
    let ax = Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0);
    let ax2 = ax * ax;
    let mut out = Mat3::zeros();
    for k in 0..3 {
        let alpha = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 3.0);
        let e = (lambda * (alpha * dx + alpha * alpha * dy)).exp();
        let ab = alpha.conj();
        let ab2 = ab * ab;
        for r in 0..3 {
            for c in 0..3 {
                let id = if r == c { 1.0 } else { 0.0 };
                let proj = (Complex::new(id, 0.0) + ab * ax[(r, c)] + ab2 * ax2[(r, c)]) / 3.0;
                out[(r, c)] += (e * proj).re;
            }
        }
    }
    out * psi0
}

/// φ = e^{−(2/3)λ f_xy}ψ at every node.
pub fn traceless_gauge(frame: &FrameField, jets: &JetField) -> Result<FrameField> {
    if frame.grid != jets.grid {
        return Err(Error::GridMismatch);
    }
    let l = frame.lambda;
    let frames = frame.frames.iter().zip(&jets.jets).map(|(m, j)| (-2.0 / 3.0 * l * j.fxy).exp() * m).collect();
    Ok(FrameField { grid: frame.grid, lambda: l, frames })
}

/// Traceless connection matrices Mₓ = Aₓ − (2a/3)I, M_y = A_y − (2b/3)I.
pub fn traceless_matrices(j: &Jet3) -> LaxPair {
    let l = lax_matrices(j, Case::Hyperbolic);
    LaxPair { ax: l.ax - 2.0 * j.a / 3.0 * Mat3::identity(), ay: l.ay - 2.0 * j.b / 3.0 * Mat3::identity() }
}

/// max over interior nodes of ‖D_x φ·φ⁻¹ − λMₓ‖ and the same in y.
pub fn gauge_connection_defect(phi: &FrameField, jets: &JetField) -> Result<f64> {
    let g = phi.grid;
    if g != jets.grid {
        return Err(Error::GridMismatch);
    }
    let l = phi.lambda;
    let mut worst = 0.0f64;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let inv = phi.at(i, j).try_inverse().ok_or(Error::DegenerateFrame { i, j })?;
            let m = traceless_matrices(jets.at(i, j));
            let dx = (phi.at(i + 1, j) - phi.at(i - 1, j)) / (2.0 * g.dx);
            let dy = (phi.at(i, j + 1) - phi.at(i, j - 1)) / (2.0 * g.dy);
            worst = worst.max((dx * inv - l * m.ax).norm()).max((dy * inv - l * m.ay).norm());
        }
    }
    Ok(worst)
}

/// T swaps the second and third basis vectors.
fn swap_t() -> Mat3 {
    Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0)
}

/// Loop-algebra membership defect of A(λ) = λM for both traceless matrices:
/// max of ‖−TAᵗ(−λ)T − A(λ)‖ and |tr A(λ)|.
pub fn loop_algebra_check(j: &Jet3, lambda: f64) -> f64 {
    let m = traceless_matrices(j);
    loop_algebra_defect(&m.ax, lambda).max(loop_algebra_defect(&m.ay, lambda))
}

/// Defect of A(λ) = λm for a single matrix m.
pub fn loop_algebra_defect(m: &Mat3, lambda: f64) -> f64 {
    let t = swap_t();
    let a = |l: f64| l * m;
    let conj = -(t * a(-lambda).transpose() * t);
    (conj - a(lambda)).amax().max(a(lambda).trace().abs())
}

/// β, γ, V, W of the projective frame equations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveData {
    pub beta: f64,
    pub gamma: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "W")]
    pub w: f64,
}

pub fn projective_data(j: &Jet3) -> ProjectiveData {
    ProjectiveData {
        beta: j.p,
        gamma: j.q,
        v: 0.5 * j.a * j.a + j.p * j.b,
        w: 0.5 * j.b * j.b + j.q * j.a,
    }
}

/// Residuals of
/// β_yyy − 2β_yW − βW_y − (γ_xxx − 2γ_xV − γV_x),
/// W_x − 2γβ_y − βγ_y,
/// V_y − 2βγ_x − γβ_x,
/// β_yyy − γ_xxx.
pub fn projective_residual(
    beta: &ScalarField2D,
    gamma: &ScalarField2D,
    v: &ScalarField2D,
    w: &ScalarField2D,
) -> Result<[ScalarField2D; 4]> {
    let g = same_grid(&[beta, gamma, v, w])?;
    let (bx, by) = (beta.d_dx(), beta.d_dy());
    let (gx, gy) = (gamma.d_dx(), gamma.d_dy());
    let byyy = beta.d3_dy();
    let gxxx = gamma.d3_dx();
    let (vx, vy, wx, wy) = (v.d_dx(), v.d_dy(), w.d_dx(), w.d_dy());
    let n = g.len();
    let mut r = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for m in 0..n {
        let (b, c, vv, ww) = (beta.values[m], gamma.values[m], v.values[m], w.values[m]);
        r[0][m] = byyy.values[m] - 2.0 * by.values[m] * ww - b * wy.values[m]
            - (gxxx.values[m] - 2.0 * gx.values[m] * vv - c * vx.values[m]);
        r[1][m] = wx.values[m] - 2.0 * c * by.values[m] - b * gy.values[m];
        r[2][m] = vy.values[m] - 2.0 * b * gx.values[m] - c * bx.values[m];
        r[3][m] = byyy.values[m] - gxxx.values[m];
    }
    Ok(r.map(|values| ScalarField2D { grid: g, values }))
}

/// Projective residual fields of a solution sampled on a grid.
pub fn projective_residual_of(jets: &JetField) -> Result<[ScalarField2D; 4]> {
    let d: Vec<ProjectiveData> = jets.jets.iter().map(projective_data).collect();
    let field = |f: fn(&ProjectiveData) -> f64| ScalarField2D { grid: jets.grid, values: d.iter().map(f).collect() };
    projective_residual(&field(|d| d.beta), &field(|d| d.gamma), &field(|d| d.v), &field(|d| d.w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{eval_jet, OffShell, Solution};
    use crate::fields::observed_orders;
    use crate::invariants::invariants_from_position;

    #[test]
    fn lax_examples() {
        let t = lax_matrices(&Jet3::from_third(1.0, 0.0, 0.0, 1.0), Case::Hyperbolic);
        assert_eq!(t.ax, Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0));
        assert_eq!(t.ay, Mat3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0));
        let z = lax_matrices(&Jet3::default(), Case::Hyperbolic);
        assert_eq!(z.ax, Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0));
        let j = eval_jet("table1_f", &[], Point2::new(1.0, 2.0)).unwrap();
        let l = lax_matrices(&j, Case::Hyperbolic);
        assert_eq!((l.ax[(1, 0)], l.ax[(1, 1)], l.ax[(1, 2)]), (0.0, -0.25, 0.5));
    }

    fn zero_curvature(l: &LaxPair, lx: &LaxPair, ly: &LaxPair, lam: f64) -> f64 {
        // ∂_y Aₓ − ∂_x A_y + λ[Aₓ, A_y] for given derivative matrices.
        (ly.ax - lx.ay + lam * (l.ax * l.ay - l.ay * l.ax)).norm()
    }

    #[test]
    fn hyperbolic_zero_curvature_on_solutions() {
        // Derivatives of Aₓ, A_y only involve fourth derivatives of f, which
        // enter linearly: ∂_y Aₓ − ∂_x A_y vanishes when a_y = b_x etc.
        let sol = Solution::get("table1_f").unwrap();
        let pt = Point2::new(1.1, 1.9);
        let h = 1e-4;
        let at = |dx: f64, dy: f64| lax_matrices(&sol.eval_jet(Point2::new(pt.x + dx, pt.y + dy)).unwrap(), Case::Hyperbolic);
        let l = at(0.0, 0.0);
        let d = |f: &dyn Fn(f64) -> LaxPair| {
            let (p, m) = (f(h), f(-h));
            LaxPair { ax: (p.ax - m.ax) / (2.0 * h), ay: (p.ay - m.ay) / (2.0 * h) }
        };
        let lx = d(&|s| at(s, 0.0));
        let ly = d(&|s| at(0.0, s));
        assert!(zero_curvature(&l, &lx, &ly, 1.0) < 1e-6);
    }

    #[test]
    fn trivial_cubic_matches_exponential_oracle() {
        let sol = Solution::get("trivial_cubic").unwrap();
        let g = Grid2D::from_domain(0.0, 0.5, 0.0, 0.5, 64, 64).unwrap();
        let psi0 = Mat3::identity();
        let rec = integrate_frame(&sol, Case::Hyperbolic, 1.0, g, psi0, SweepOrder::RowFirst).unwrap();
        let mut worst = 0.0f64;
        for k in 0..g.len() {
            let (i, j) = g.node(k);
            let exact = trivial_cubic_frame(1.0, g.x(i), g.y(j), &psi0);
            worst = worst.max((rec.frame.frames[k] - exact).amax());
        }
        assert!(worst < 1e-6, "{worst}");
        // The oracle satisfies its own equations.
        let h = 1e-5;
        let d = (trivial_cubic_frame(1.0, 0.3 + h, 0.2, &psi0) - trivial_cubic_frame(1.0, 0.3 - h, 0.2, &psi0)) / (2.0 * h);
        let l = lax_matrices(&Jet3::from_third(1.0, 0.0, 0.0, 1.0), Case::Hyperbolic);
        assert!((d - l.ax * trivial_cubic_frame(1.0, 0.3, 0.2, &psi0)).amax() < 1e-8);
    }

    #[test]
    fn sweep_orders_agree_and_metric_recovered() {
        let sol = Solution::get("table1_f").unwrap();
        let g = Grid2D::from_domain(0.5, 1.5, 1.5, 2.5, 33, 33).unwrap();
        let a = integrate_frame(&sol, Case::Hyperbolic, 1.0, g, Mat3::identity(), SweepOrder::RowFirst).unwrap();
        let b = integrate_frame(&sol, Case::Hyperbolic, 1.0, g, Mat3::identity(), SweepOrder::ColumnFirst).unwrap();
        let diff = a.frame.frames.iter().zip(&b.frame.frames).fold(0.0f64, |m, (u, v)| m.max((u - v).amax()));
        assert!(diff < 1e-7, "{diff}");
        assert!(a.cross_defect < 1e-2, "{}", a.cross_defect);
        let m = invariants_from_position(&a.position).unwrap();
        assert!(m[0].norms().linf < 5e-3 && m[2].norms().linf < 5e-3);
        assert!(m[1].values.iter().filter(|v| v.is_finite()).all(|v| (v - 1.0).abs() < 5e-3));
    }

    #[test]
    fn dual_surface_keeps_metric() {
        let sol = Solution::get("table1_f").unwrap();
        let g = Grid2D::from_domain(0.5, 1.5, 1.5, 2.5, 33, 33).unwrap();
        let metric = |l: f64| {
            let r = integrate_frame(&sol, Case::Hyperbolic, l, g, Mat3::identity(), SweepOrder::RowFirst).unwrap();
            invariants_from_position(&r.position).unwrap()
        };
        let (m1, m2) = (metric(1.0), metric(-1.0));
        let d = m1[1].zip_with(&m2[1], |u, v| u - v).unwrap();
        assert!(d.norms().linf < 5e-3);
    }

    #[test]
    fn plane_at_lambda_zero() {
        let sol = Solution::get("table1_f").unwrap();
        let g = Grid2D::from_domain(0.5, 1.5, 1.5, 2.5, 9, 9).unwrap();
        let rec = integrate_frame(&sol, Case::Hyperbolic, 0.0, g, Mat3::identity(), SweepOrder::RowFirst).unwrap();
        assert_eq!(rec.position[0].values.iter().fold(0.0f64, |m, v| m.max(*v)), 1.0);
        assert!((rec.position[1].at(8, 0) - 1.0).abs() < 1e-15);
        assert!((rec.position[2].at(0, 8) - 1.0).abs() < 1e-15);
        let d = Domain::new(0.6, 1.4, 1.6, 2.4);
        assert_eq!(holonomy_defect(&sol, Case::Hyperbolic, 0.0, &d, 8, Mat3::identity()).unwrap(), 0.0);
    }

    #[test]
    fn holonomy_converges_on_shell_only() {
        let sol = Solution::get("trivial_cubic").unwrap();
        let d = Domain::new(-0.5, 0.5, -0.5, 0.5);
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| holonomy_defect(&sol, Case::Hyperbolic, 1.0, &d, n, Mat3::identity()).unwrap())
            .collect();
        assert!(errs[2] < 1e-8 && observed_orders(&errs).iter().all(|&o| o > 3.5), "{errs:?}");

        let t1 = Solution::get("table1_f").unwrap();
        let d = Domain::new(0.6, 1.4, 1.6, 2.4);
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| holonomy_defect(&t1, Case::Hyperbolic, 1.0, &d, n, Mat3::identity()).unwrap())
            .collect();
        assert!(observed_orders(&errs).iter().all(|&o| o > 3.5), "{errs:?}");
        let off = OffShell { inner: &t1, dq: 0.5 };
        let bad = holonomy_defect(&off, Case::Hyperbolic, 1.0, &d, 64, Mat3::identity()).unwrap();
        assert!(bad > 1e-3);
    }

    #[test]
    fn gauge_examples() {
        let sol = Solution::get("table1_f").unwrap();
        let g = Grid2D::from_domain(0.5, 1.5, 1.5, 2.5, 33, 33).unwrap();
        let rec = integrate_frame(&sol, Case::Hyperbolic, 1.0, g, Mat3::identity(), SweepOrder::RowFirst).unwrap();
        let jets = JetField::sample(&sol, g).unwrap();
        let phi = traceless_gauge(&rec.frame, &jets).unwrap();
        // f_xy(1, 2) = −1/8 for x³/(6y) + y⁴/24, so the factor is e^{1/12}.
        let j = sol.eval_jet(Point2::new(1.0, 2.0)).unwrap();
        assert!((j.fxy + 0.125).abs() < 1e-15);
        assert!(((-2.0 / 3.0 * j.fxy).exp() - (1.0f64 / 12.0).exp()).abs() < 1e-15);
        let (i, jj) = (16, 16);
        assert!((phi.at(i, jj) - (-2.0 / 3.0 * jets.at(i, jj).fxy).exp() * rec.frame.at(i, jj)).amax() < 1e-15);
        let d = gauge_connection_defect(&phi, &jets).unwrap();
        assert!(d < 1e-2, "{d}");
        let det0 = phi.frames[0].determinant();
        assert!(phi.frames.iter().all(|m| (m.determinant() - det0).abs() < 1e-6 * det0.abs()));
        for k in 0..g.len() {
            let m = traceless_matrices(&jets.jets[k]);
            assert!(m.ax.trace().abs() < 1e-14 && m.ay.trace().abs() < 1e-14);
        }
        let t = Solution::get("trivial_cubic").unwrap();
        let g = Grid2D::from_domain(0.0, 0.5, 0.0, 0.5, 9, 9).unwrap();
        let rec = integrate_frame(&t, Case::Hyperbolic, 1.0, g, Mat3::identity(), SweepOrder::RowFirst).unwrap();
        let phi = traceless_gauge(&rec.frame, &JetField::sample(&t, g).unwrap()).unwrap();
        assert_eq!(phi.frames, rec.frame.frames);
    }

    #[test]
    fn loop_algebra_and_corruption() {
        assert_eq!(loop_algebra_check(&Jet3::default(), 0.7), 0.0);
        let j = Jet3::from_third(1.3, -0.4, 2.2, 0.5);
        assert!(loop_algebra_check(&j, -1.7) < 1e-15);
        let mut m = traceless_matrices(&j).ax;
        m.swap((0, 1), (1, 0));
        assert!(loop_algebra_defect(&m, 1.0) > 0.1);
    }

    #[test]
    fn projective_examples() {
        let d = projective_data(&Jet3::from_third(1.0, 0.0, 0.0, 1.0));
        assert_eq!((d.beta, d.gamma, d.v, d.w), (1.0, 1.0, 0.0, 0.0));
        let g = Grid2D::from_domain(0.5, 1.5, 1.5, 2.5, 9, 9).unwrap();
        let r = projective_residual_of(&JetField::sample(&Solution::get("trivial_cubic").unwrap(), g).unwrap()).unwrap();
        assert!(r.iter().all(|f| f.norms().linf == 0.0));
        let zero = ScalarField2D::constant(g, 0.0);
        let r = projective_residual(&zero, &zero, &ScalarField2D::constant(g, 2.0), &ScalarField2D::constant(g, -1.0))
            .unwrap();
        assert!(r.iter().all(|f| f.norms().linf == 0.0));
    }

    #[test]
    fn projective_residual_converges() {
        let sol = Solution::get("table1_f").unwrap();
        let mut errs = vec![Vec::new(); 4];
        for n in [65, 129, 257] {
            let g = Grid2D::from_domain(0.5, 1.5, 1.5, 2.5, n, n).unwrap();
            let r = projective_residual_of(&JetField::sample(&sol, g).unwrap()).unwrap();
            let inner = Domain::new(0.6, 1.4, 1.6, 2.4);
            for k in 0..4 {
                errs[k].push(r[k].norms_within(&inner).linf);
            }
        }
        for e in &errs {
            assert!(e[2] < 1e-3 && observed_orders(e).iter().all(|&o| o > 1.9), "{e:?}");
        }
    }

    #[test]
    fn rarefaction_frame_relations() {
        // Q = r − cμ r_s with ∂s = ∂x − ∂y/c satisfies Q_x + Q_y/c = 0 and Q_s = 2μQ.
        let sol = Solution::get("rarefaction").unwrap();
        let (c, mu) = (sol.param("c").unwrap(), sol.param("mu").unwrap());
        let mut errs = Vec::new();
        for n in [33, 65] {
            let g = Grid2D::from_domain(0.0, 1.0, 0.0, 1.0, n, n).unwrap();
            let rec = integrate_frame(&sol, Case::Hyperbolic, 1.0, g, Mat3::identity(), SweepOrder::RowFirst).unwrap();
            let q: Vec<ScalarField2D> = (0..3)
                .map(|k| {
                    let f = &rec.frame;
                    ScalarField2D {
                        grid: g,
                        values: f.frames.iter().map(|m| m[(0, k)] - c * mu * (m[(1, k)] - m[(2, k)] / c)).collect(),
                    }
                })
                .collect();
            let mut worst = 0.0f64;
            for qk in &q {
                let (qx, qy) = (qk.d_dx(), qk.d_dy());
                let t = qx.zip_with(&qy, |u, v| u + v / c).unwrap();
                let s = qx.zip_with(&qy, |u, v| u - v / c).unwrap().zip_with(qk, |u, v| u - 2.0 * mu * v).unwrap();
                worst = worst.max(t.norms().linf).max(s.norms().linf);
            }
            errs.push(worst);
        }
        assert!(errs[1] < 1e-2 && errs[0] / errs[1] > 3.5, "{errs:?}");
    }
}
