//! Value types shared by every module: points, grids, third-order jets,
//! sampled scalar fields and one-forms, plus the finite-difference and
//! polynomial primitives the verification suite is built on.

use std::io::Write;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 3×3 real matrix, row-major in construction helpers.
pub type Mat3 = Matrix3<f64>;

/// A point in asymptotic coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }
}

/// Uniform rectangular grid. Node `(i, j)` sits at `(x0 + i dx, y0 + j dy)`
/// and is stored at index `j * nx + i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn new(x0: f64, y0: f64, dx: f64, dy: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::with_min_nodes(x0, y0, dx, dy, nx, ny, 5)
    }

    /// Like [`Grid2D::new`] with a custom node-count floor. Meshes only need 2×2.
    pub fn with_min_nodes(
        x0: f64,
        y0: f64,
        dx: f64,
        dy: f64,
        nx: usize,
        ny: usize,
        min_nodes: usize,
    ) -> Result<Self> {
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacings must be positive, got dx={dx}, dy={dy}")));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        if nx < min_nodes || ny < min_nodes {
            return Err(Error::InvalidGrid(format!(
                "need at least {min_nodes} nodes per direction, got {nx}×{ny}"
            )));
        }
        Ok(Grid2D { x0, y0, dx, dy, nx, ny })
    }

    /// Grid spanning `[xmin, xmax] × [ymin, ymax]` with the given node counts.
    pub fn from_domain(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 || !(xmax > xmin) || !(ymax > ymin) {
            return Err(Error::InvalidGrid(format!(
                "degenerate domain [{xmin}, {xmax}] × [{ymin}, {ymax}] with {nx}×{ny} nodes"
            )));
        }
        Self::new(xmin, ymin, (xmax - xmin) / (nx - 1) as f64, (ymax - ymin) / (ny - 1) as f64, nx, ny)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    pub fn point(&self, i: usize, j: usize) -> Point2 {
        Point2::new(self.x(i), self.y(j))
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Inverse of [`Grid2D::index`].
    pub fn node(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn xmax(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn ymax(&self) -> f64 {
        self.y(self.ny - 1)
    }

    /// True when `(i, j)` is at least `margin` nodes from every edge.
    pub fn is_interior(&self, i: usize, j: usize, margin: usize) -> bool {
        i >= margin && j >= margin && i + margin < self.nx && j + margin < self.ny
    }
}

/// Derivatives of a scalar potential through order three at one point.
/// `p, a, b, q` are `f_xxx, f_xxy, f_xyy, f_yyy`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Jet3 {
    pub f: f64,
    pub fx: f64,
    pub fy: f64,
    pub fxx: f64,
    pub fxy: f64,
    pub fyy: f64,
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub q: f64,
}

impl Jet3 {
    /// Jet with only the third-order slots set.
    pub const fn from_third(p: f64, a: f64, b: f64, q: f64) -> Self {
        Jet3 { f: 0.0, fx: 0.0, fy: 0.0, fxx: 0.0, fxy: 0.0, fyy: 0.0, p, a, b, q }
    }

    pub fn third(&self) -> [f64; 4] {
        [self.p, self.a, self.b, self.q]
    }

    pub fn to_array(&self) -> [f64; 10] {
        [self.f, self.fx, self.fy, self.fxx, self.fxy, self.fyy, self.p, self.a, self.b, self.q]
    }

    pub fn from_array(v: [f64; 10]) -> Self {
        Jet3 { f: v[0], fx: v[1], fy: v[2], fxx: v[3], fxy: v[4], fyy: v[5], p: v[6], a: v[7], b: v[8], q: v[9] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// L∞ and root-mean-square norms over the finite entries of a field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub linf: f64,
    pub l2: f64,
    pub nodes: usize,
}

impl FieldNorms {
    pub fn of(values: &[f64]) -> Self {
        let mut linf = 0.0f64;
        let mut sum = 0.0;
        let mut nodes = 0;
        for v in values.iter().filter(|v| v.is_finite()) {
            linf = linf.max(v.abs());
            sum += v * v;
            nodes += 1;
        }
        let l2 = if nodes > 0 { (sum / nodes as f64).sqrt() } else { 0.0 };
        FieldNorms { linf, l2, nodes }
    }
}

/// Scalar samples on a grid. Boundary rows that a stencil could not reach
/// hold NaN, which every norm skips.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField2D {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl ScalarField2D {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ScalarField2D { grid, values })
    }

    /// Samples `f` at every node, in parallel.
    pub fn from_fn<F>(grid: Grid2D, f: F) -> Self
    where
        F: Fn(Point2) -> f64 + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = grid.node(k);
                f(grid.point(i, j))
            })
            .collect();
        ScalarField2D { grid, values }
    }

    /// Fallible sampling; the first error in node order wins.
    pub fn try_from_fn<F>(grid: Grid2D, f: F) -> Result<Self>
    where
        F: Fn(Point2) -> Result<f64> + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = grid.node(k);
                f(grid.point(i, j))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(ScalarField2D { grid, values })
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        ScalarField2D { grid, values: vec![c; grid.len()] }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField2D { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Nodewise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_grid(&[self, other])?;
        Ok(ScalarField2D {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn norms(&self) -> FieldNorms {
        FieldNorms::of(&self.values)
    }

    /// Norms over nodes at least `margin` nodes from the boundary.
    pub fn interior_norms(&self, margin: usize) -> FieldNorms {
        let g = self.grid;
        let vals: Vec<f64> = (0..g.len())
            .filter(|&k| {
                let (i, j) = g.node(k);
                g.is_interior(i, j, margin)
            })
            .map(|k| self.values[k])
            .collect();
        FieldNorms::of(&vals)
    }

    /// Norms over nodes inside a fixed rectangle, so that refinement studies
    /// compare the same physical region.
    pub fn norms_within(&self, region: &crate::sampling::Domain) -> FieldNorms {
        let g = self.grid;
        let vals: Vec<f64> = (0..g.len())
            .filter(|&k| {
                let (i, j) = g.node(k);
                region.contains(g.point(i, j))
            })
            .map(|k| self.values[k])
            .collect();
        FieldNorms::of(&vals)
    }

    /// Central first difference in x; NaN on the boundary columns.
    pub fn d_dx(&self) -> Self {
        let g = self.grid;
        let values = (0..g.len())
            .map(|k| {
                let (i, j) = g.node(k);
                if i == 0 || i + 1 == g.nx {
                    f64::NAN
                } else {
                    (self.at(i + 1, j) - self.at(i - 1, j)) / (2.0 * g.dx)
                }
            })
            .collect();
        ScalarField2D { grid: g, values }
    }

    /// Central first difference in y; NaN on the boundary rows.
    pub fn d_dy(&self) -> Self {
        let g = self.grid;
        let values = (0..g.len())
            .map(|k| {
                let (i, j) = g.node(k);
                if j == 0 || j + 1 == g.ny {
                    f64::NAN
                } else {
                    (self.at(i, j + 1) - self.at(i, j - 1)) / (2.0 * g.dy)
                }
            })
            .collect();
        ScalarField2D { grid: g, values }
    }

    /// Five-point third difference in x; NaN within two columns of the boundary.
    pub fn d3_dx(&self) -> Self {
        let g = self.grid;
        let values = (0..g.len())
            .map(|k| {
                let (i, j) = g.node(k);
                if i < 2 || i + 2 >= g.nx {
                    f64::NAN
                } else {
                    (self.at(i + 2, j) - 2.0 * self.at(i + 1, j) + 2.0 * self.at(i - 1, j) - self.at(i - 2, j))
                        / (2.0 * g.dx.powi(3))
                }
            })
            .collect();
        ScalarField2D { grid: g, values }
    }

    /// Five-point third difference in y; NaN within two rows of the boundary.
    pub fn d3_dy(&self) -> Self {
        let g = self.grid;
        let values = (0..g.len())
            .map(|k| {
                let (i, j) = g.node(k);
                if j < 2 || j + 2 >= g.ny {
                    f64::NAN
                } else {
                    (self.at(i, j + 2) - 2.0 * self.at(i, j + 1) + 2.0 * self.at(i, j - 1) - self.at(i, j - 2))
                        / (2.0 * g.dy.powi(3))
                }
            })
            .collect();
        ScalarField2D { grid: g, values }
    }

    /// Central mixed difference ∂x∂y; NaN on the boundary ring.
    pub fn d_dxdy(&self) -> Self {
        let g = self.grid;
        let values = (0..g.len())
            .map(|k| {
                let (i, j) = g.node(k);
                if !g.is_interior(i, j, 1) {
                    f64::NAN
                } else {
                    (self.at(i + 1, j + 1) - self.at(i + 1, j - 1) - self.at(i - 1, j + 1)
                        + self.at(i - 1, j - 1))
                        / (4.0 * g.dx * g.dy)
                }
            })
            .collect();
        ScalarField2D { grid: g, values }
    }

    /// CSV with header `x,y,value`, row-major, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,value")?;
        for k in 0..self.grid.len() {
            let (i, j) = self.grid.node(k);
            writeln!(w, "{},{},{}", sig17(self.grid.x(i)), sig17(self.grid.y(j)), sig17(self.values[k]))?;
        }
        Ok(())
    }
}

/// Errors unless every field shares the first field's grid.
pub fn same_grid(fields: &[&ScalarField2D]) -> Result<Grid2D> {
    let g = fields.first().map(|f| f.grid).ok_or(Error::GridMismatch)?;
    if fields.iter().all(|f| f.grid == g) {
        Ok(g)
    } else {
        Err(Error::GridMismatch)
    }
}

/// `cx dx + cy dy` sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct OneFormField {
    pub cx: ScalarField2D,
    pub cy: ScalarField2D,
}

impl OneFormField {
    pub fn new(cx: ScalarField2D, cy: ScalarField2D) -> Result<Self> {
        same_grid(&[&cx, &cy])?;
        Ok(OneFormField { cx, cy })
    }

    pub fn grid(&self) -> Grid2D {
        self.cx.grid
    }

    /// The gradient of `g` by central differences.
    pub fn gradient(g: &ScalarField2D) -> Self {
        OneFormField { cx: g.d_dx(), cy: g.d_dy() }
    }

    /// Samples both coefficients from `f`, in parallel.
    pub fn from_fn<F>(grid: Grid2D, f: F) -> Self
    where
        F: Fn(Point2) -> (f64, f64) + Sync,
    {
        let pairs: Vec<(f64, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = grid.node(k);
                f(grid.point(i, j))
            })
            .collect();
        let (cx, cy) = pairs.into_iter().unzip();
        OneFormField { cx: ScalarField2D { grid, values: cx }, cy: ScalarField2D { grid, values: cy } }
    }
}

/// Coefficient of dx∧dy in the exterior derivative: ∂x(cy) − ∂y(cx).
pub fn exterior_derivative(form: &OneFormField) -> ScalarField2D {
    let g = form.grid();
    let values = (0..g.len())
        .map(|k| {
            let (i, j) = g.node(k);
            if !g.is_interior(i, j, 1) {
                return f64::NAN;
            }
            let dcy = (form.cy.at(i + 1, j) - form.cy.at(i - 1, j)) / (2.0 * g.dx);
            let dcx = (form.cx.at(i, j + 1) - form.cx.at(i, j - 1)) / (2.0 * g.dy);
            dcy - dcx
        })
        .collect();
    ScalarField2D { grid: g, values }
}

/// Second-order central jet of a sampled field at node `(i, j)`.
pub fn finite_diff_jet(field: &ScalarField2D, i: usize, j: usize) -> Result<Jet3> {
    let g = field.grid;
    if !g.is_interior(i, j, 2) {
        return Err(Error::BoundaryProximity { i, j });
    }
    let v = |di: isize, dj: isize| field.at((i as isize + di) as usize, (j as isize + dj) as usize);
    let (hx, hy) = (g.dx, g.dy);
    let d1 = |f: &dyn Fn(isize) -> f64, h: f64| (f(1) - f(-1)) / (2.0 * h);
    let d2 = |f: &dyn Fn(isize) -> f64, h: f64| (f(1) - 2.0 * f(0) + f(-1)) / (h * h);
    let d3 = |f: &dyn Fn(isize) -> f64, h: f64| (f(2) - 2.0 * f(1) + 2.0 * f(-1) - f(-2)) / (2.0 * h * h * h);

    let fx = d1(&|s| v(s, 0), hx);
    let fy = d1(&|s| v(0, s), hy);
    let fxx = d2(&|s| v(s, 0), hx);
    let fyy = d2(&|s| v(0, s), hy);
    let fxy = d1(&|t| d1(&|s| v(s, t), hx), hy);
    let p = d3(&|s| v(s, 0), hx);
    let q = d3(&|s| v(0, s), hy);
    let a = d1(&|t| d2(&|s| v(s, t), hx), hy);
    let b = d1(&|s| d2(&|t| v(s, t), hy), hx);
    Ok(Jet3 { f: v(0, 0), fx, fy, fxx, fxy, fyy, p, a, b, q })
}

/// Roots of `c3 z³ + c2 z² + c1 z + c0`, sorted by real part then imaginary
/// part. Each root gets one Newton step; roots with |Im| < 1e-9 are made real.
pub fn cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Result<[Complex64; 3]> {
    if c3 == 0.0 {
        return Err(Error::DegenerateLeadingCoefficient);
    }
    let (b, c, d) = (c2 / c3, c1 / c3, c0 / c3);
    // Depressed cubic t³ + pt + q with z = t − b/3.
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);

    let mut roots = [Complex64::new(0.0, 0.0); 3];
    if disc <= 0.0 && p < 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for (k, r) in roots.iter_mut().enumerate() {
            let t = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
            *r = Complex64::new(t - shift, 0.0);
        }
    } else {
        // One real root, chosen to avoid cancellation, then deflate.
        let sq = disc.max(0.0).sqrt();
        let u = (-q / 2.0 - q.signum() * sq).cbrt();
        let t = if u != 0.0 { u - p / (3.0 * u) } else { 0.0 };
        let r = t - shift;
        let bb = b + r;
        let cc = c + bb * r;
        let dq = bb * bb - 4.0 * cc;
        roots[0] = Complex64::new(r, 0.0);
        if dq >= 0.0 {
            let s = -0.5 * (bb + bb.signum() * dq.sqrt());
            let (r1, r2) = if s != 0.0 { (s, cc / s) } else { (0.0, 0.0) };
            roots[1] = Complex64::new(r1, 0.0);
            roots[2] = Complex64::new(r2, 0.0);
        } else {
            let im = 0.5 * (-dq).sqrt();
            roots[1] = Complex64::new(-0.5 * bb, im);
            roots[2] = Complex64::new(-0.5 * bb, -im);
        }
    }

    for r in roots.iter_mut() {
        let z = *r;
        let val = ((z + b) * z + c) * z + d;
        let der = (3.0 * z + 2.0 * b) * z + c;
        if der.norm() > 0.0 {
            let step = val / der;
            if step.is_finite() {
                *r = z - step;
            }
        }
        if r.im.abs() < 1e-9 {
            r.im = 0.0;
        }
    }
    roots.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(roots)
}

/// `log2(e_k / e_{k+1})` for a sequence of errors at halved step sizes.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Decimal with 17 significant digits.
pub(crate) fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}
