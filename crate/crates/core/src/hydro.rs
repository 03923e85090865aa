//! The quasilinear system (p, a, b)_y = U (p, a, b)_x obtained by eliminating
//! q = (1 + ab)/p, its eigenstructure, and a finite-difference evolution in y
//! checked against the rarefaction and revolution families.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{RarefactionParams, RevolutionParams};
use crate::error::{Error, Result};
use crate::fields::{cubic_roots, Mat3, Point2};

/// Uniform grid on a line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn from_interval(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 5 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidGrid(format!("need n ≥ 5 and lo < hi, got n = {n} on [{lo}, {hi}]")));
        }
        Ok(Grid1D { x0: lo, dx: (hi - lo) / (n - 1) as f64, n })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }
}

/// (p, a, b) on a line at one level y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydroState {
    pub grid: Grid1D,
    pub y: f64,
    pub w: Vec<[f64; 3]>,
}

impl HydroState {
    /// State sampled from `fields(x, y) -> (p, a, b, q)`.
    pub fn from_fn(grid: Grid1D, y: f64, fields: impl Fn(Point2) -> Result<[f64; 4]>) -> Result<Self> {
        let w = (0..grid.n)
            .map(|i| fields(Point2::new(grid.x(i), y)).map(|[p, a, b, _]| [p, a, b]))
            .collect::<Result<_>>()?;
        Ok(HydroState { grid, y, w })
    }

    /// q = (1 + ab)/p at every node.
    pub fn q(&self) -> Vec<f64> {
        self.w.iter().map(|&[p, a, b]| derived_q(p, a, b)).collect()
    }
}

fn derived_q(p: f64, a: f64, b: f64) -> f64 {
    (1.0 + a * b) / p
}

fn flux(w: [f64; 3]) -> [f64; 3] {
    [w[1], w[2], derived_q(w[0], w[1], w[2])]
}

/// Jacobian of (a, b, (1 + ab)/p) in (p, a, b).
pub fn flux_matrix(p: f64, a: f64, b: f64) -> Result<Mat3> {
    if p == 0.0 {
        return Err(Error::Singular("flux matrix needs p ≠ 0".into()));
    }
    Ok(Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -(1.0 + a * b) / (p * p), b / p, a / p))
}

/// Roots of pλ³ − aλ² − bλ + q, the eigenvalues of the flux matrix when
/// pq − ab = 1.
pub fn char_speeds(p: f64, a: f64, b: f64, q: f64) -> Result<[Complex64; 3]> {
    cubic_roots(p, -a, -b, q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Two-step Richtmyer Lax–Wendroff.
    Lw2,
    /// Central differences with Heun steps; mildly unstable without dissipation.
    Rk2c,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Extrapolate,
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydroConfig {
    pub scheme: Scheme,
    pub cfl: f64,
    pub boundary: Boundary,
    /// Coefficient of the fourth-difference damping applied after each step.
    pub dissipation: f64,
    pub p_floor: f64,
    /// Keep every k-th level; the initial and final levels are always kept.
    pub snapshot_every: usize,
}

impl Default for HydroConfig {
    fn default() -> Self {
        HydroConfig {
            scheme: Scheme::Lw2,
            cfl: 0.5,
            boundary: Boundary::Extrapolate,
            dissipation: 0.0,
            p_floor: 1e-8,
            snapshot_every: 0,
        }
    }
}

/// Output of [`evolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<HydroState>,
    pub steps: usize,
    /// Largest residual of p_y = a_x, a_y = b_x, b_y = q_x over all steps,
    /// estimated from consecutive levels away from the boundary.
    pub conservation_defect: [f64; 3],
    /// max |p q − a b − 1| over the final level; zero up to round-off since q
    /// is derived.
    pub constraint_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &HydroState {
        self.snapshots.last().expect("trajectory holds the initial level")
    }

    /// Rows `y,x,p,a,b,q` for every snapshot.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "y,x,p,a,b,q")?;
        for s in &self.snapshots {
            for (i, (w, q)) in s.w.iter().zip(s.q()).enumerate() {
                writeln!(out, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", s.y, s.grid.x(i), w[0], w[1], w[2], q)?;
            }
        }
        Ok(())
    }
}

fn at(w: &[[f64; 3]], i: isize, boundary: Boundary) -> [f64; 3] {
    let n = w.len() as isize;
    let k = match boundary {
        Boundary::Extrapolate => i.clamp(0, n - 1),
        Boundary::Periodic => i.rem_euclid(n - 1),
    };
    w[k as usize]
}

fn axpy(a: [f64; 3], s: f64, b: [f64; 3]) -> [f64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn max_speed(w: &[[f64; 3]]) -> Result<f64> {
    w.par_iter()
        .map(|&[p, a, b]| {
            let r = char_speeds(p, a, b, derived_q(p, a, b))?;
            Ok(r.iter().fold(0.0f64, |m, z| m.max(z.re.abs())))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Central difference of the flux.
fn central_rhs(w: &[[f64; 3]], dx: f64, boundary: Boundary) -> Vec<[f64; 3]> {
    (0..w.len() as isize)
        .into_par_iter()
        .map(|i| {
            let d = sub(flux(at(w, i + 1, boundary)), flux(at(w, i - 1, boundary)));
            d.map(|v| v / (2.0 * dx))
        })
        .collect()
}

fn step(w: &[[f64; 3]], dx: f64, dy: f64, cfg: &HydroConfig) -> Vec<[f64; 3]> {
    let bc = cfg.boundary;
    let mut next: Vec<[f64; 3]> = match cfg.scheme {
        Scheme::Lw2 => {
            let r = dy / dx;
            // Half-step values at i + 1/2 for i = −1..n−1.
            let half: Vec<[f64; 3]> = (-1..w.len() as isize)
                .into_par_iter()
                .map(|i| {
                    let (l, rr) = (at(w, i, bc), at(w, i + 1, bc));
                    let avg = [0.5 * (l[0] + rr[0]), 0.5 * (l[1] + rr[1]), 0.5 * (l[2] + rr[2])];
                    axpy(avg, 0.5 * r, sub(flux(rr), flux(l)))
                })
                .collect();
            (0..w.len())
                .into_par_iter()
                .map(|i| axpy(w[i], r, sub(flux(half[i + 1]), flux(half[i]))))
                .collect()
        }
        Scheme::Rk2c => {
            let k1 = central_rhs(w, dx, bc);
            let mid: Vec<[f64; 3]> = w.iter().zip(&k1).map(|(u, k)| axpy(*u, dy, *k)).collect();
            let k2 = central_rhs(&mid, dx, bc);
            (0..w.len()).map(|i| axpy(w[i], 0.5 * dy, [k1[i][0] + k2[i][0], k1[i][1] + k2[i][1], k1[i][2] + k2[i][2]])).collect()
        }
    };
    if bc == Boundary::Periodic {
        let n = next.len();
        next[n - 1] = next[0];
    }
    if cfg.dissipation != 0.0 {
        let e = cfg.dissipation;
        let src = next.clone();
        next.par_iter_mut().enumerate().for_each(|(i, v)| {
            let i = i as isize;
            for c in 0..3 {
                let d4 = at(&src, i + 2, bc)[c] - 4.0 * at(&src, i + 1, bc)[c] + 6.0 * src[i as usize][c]
                    - 4.0 * at(&src, i - 1, bc)[c]
                    + at(&src, i - 2, bc)[c];
                v[c] -= e * d4;
            }
        });
    }
    next
}

/// Residuals of p_y = a_x, a_y = b_x, b_y = q_x between two levels, with
/// the x-derivative averaged over both levels; nodes within `margin` of the
/// boundary are skipped.
fn level_defect(old: &[[f64; 3]], new: &[[f64; 3]], dx: f64, dy: f64, margin: usize) -> [f64; 3] {
    let n = old.len();
    let mut out = [0.0f64; 3];
    for i in margin.max(1)..n.saturating_sub(margin.max(1)) {
        let fx = |w: &[[f64; 3]]| sub(flux(w[i + 1]), flux(w[i - 1])).map(|v| v / (2.0 * dx));
        let (f0, f1) = (fx(old), fx(new));
        for c in 0..3 {
            let r = (new[i][c] - old[i][c]) / dy - 0.5 * (f0[c] + f1[c]);
            out[c] = out[c].max(r.abs());
        }
    }
    out
}

/// Advances `state0` to `y_end` with Δy = cfl·Δx/max|Re λ|, shortening the
/// last step to land on `y_end`. Complex speeds are allowed; the solution
/// may then grow.
pub fn evolve(state0: &HydroState, y_end: f64, cfg: &HydroConfig) -> Result<Trajectory> {
    if !(cfg.cfl > 0.0 && cfg.cfl <= 1.0) {
        return Err(Error::InvalidParameter(format!("cfl must lie in (0, 1], got {}", cfg.cfl)));
    }
    if !(y_end >= state0.y) || !y_end.is_finite() {
        return Err(Error::InvalidParameter(format!("y_end = {y_end} precedes the initial level {}", state0.y)));
    }
    if state0.w.len() != state0.grid.n {
        return Err(Error::GridMismatch);
    }
    let g = state0.grid;
    let check_floor = |w: &[[f64; 3]], y: f64| match w.iter().position(|v| !(v[0].abs() >= cfg.p_floor)) {
        Some(i) => Err(Error::PFloor { x: g.x(i), y }),
        None => Ok(()),
    };
    check_floor(&state0.w, state0.y)?;
    let margin = match cfg.boundary {
        Boundary::Extrapolate => g.n / 10 + 2,
        Boundary::Periodic => 1,
    };
    let mut snapshots = vec![state0.clone()];
    let mut w = state0.w.clone();
    let mut y = state0.y;
    let mut steps = 0;
    let mut defect = [0.0f64; 3];
    while y < y_end {
        let speed = max_speed(&w)?.max(1e-12);
        let mut dy = cfg.cfl * g.dx / speed;
        let last = y + dy >= y_end * (1.0 - 1e-14);
        if last {
            dy = y_end - y;
        }
        let next = step(&w, g.dx, dy, cfg);
        let y_next = if last { y_end } else { y + dy };
        check_floor(&next, y_next)?;
        let d = level_defect(&w, &next, g.dx, dy, margin);
        for c in 0..3 {
            defect[c] = defect[c].max(d[c]);
        }
        w = next;
        y = y_next;
        steps += 1;
        if cfg.snapshot_every > 0 && steps % cfg.snapshot_every == 0 && !last {
            snapshots.push(HydroState { grid: g, y, w: w.clone() });
        }
    }
    let constraint_drift = w.iter().fold(0.0f64, |m, &[p, a, b]| m.max((p * derived_q(p, a, b) - a * b - 1.0).abs()));
    if steps > 0 {
        snapshots.push(HydroState { grid: g, y, w });
    }
    Ok(Trajectory { snapshots, steps, conservation_defect: defect, constraint_drift })
}

/// (p, a, b, q) of the rarefaction family.
pub fn rarefaction_eval(params: &RarefactionParams, pt: Point2) -> Result<[f64; 4]> {
    params.validate()?;
    params.fields(pt).ok_or(Error::DomainViolation { id: "rarefaction".into(), x: pt.x, y: pt.y })
}

/// (p, a, b, q) of the revolution family.
pub fn revolution_eval(params: &RevolutionParams, pt: Point2) -> Result<[f64; 4]> {
    params.fields(pt)
}

/// Max over interior nodes of |evolved − exact| in (p, a, b) at the final
/// level, for x in `[lo, hi]`.
pub fn oracle_error(traj: &Trajectory, exact: impl Fn(Point2) -> Result<[f64; 4]>, lo: f64, hi: f64) -> Result<f64> {
    let s = traj.last();
    let mut err = 0.0f64;
    for (i, w) in s.w.iter().enumerate() {
        let x = s.grid.x(i);
        if x < lo || x > hi {
            continue;
        }
        let e = exact(Point2::new(x, s.y))?;
        for c in 0..3 {
            err = err.max((w[c] - e[c]).abs());
        }
    }
    Ok(err)
}

/// One row of a refinement study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub dx: f64,
    pub steps: usize,
    pub linf: f64,
    /// log2 of the error ratio to the previous row.
    pub order: Option<f64>,
}

/// Evolves data sampled from `exact` on [lo, hi] from y = y0 to `y_end`
/// for each node count and measures the error against `exact` on `interior`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    exact: &(dyn Fn(Point2) -> Result<[f64; 4]> + Sync),
    (lo, hi): (f64, f64),
    y0: f64,
    nodes: &[usize],
    y_end: f64,
    cfg: &HydroConfig,
    interior: (f64, f64),
) -> Result<(Vec<ConvergenceRow>, Trajectory)> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut finest = None;
    for &n in nodes {
        let g = Grid1D::from_interval(lo, hi, n)?;
        let s0 = HydroState::from_fn(g, y0, exact)?;
        let traj = evolve(&s0, y_end, cfg)?;
        let linf = oracle_error(&traj, exact, interior.0, interior.1)?;
        let order = rows.last().map(|r| (r.linf / linf).ln() / (r.dx / g.dx).ln());
        rows.push(ConvergenceRow { n, dx: g.dx, steps: traj.steps, linf, order });
        finest = Some(traj);
    }
    let finest = finest.ok_or_else(|| Error::InvalidParameter("convergence study needs at least one grid".into()))?;
    Ok((rows, finest))
}

/// [`convergence_study`] for the rarefaction family from y = 0.
pub fn rarefaction_convergence(
    params: &RarefactionParams,
    range: (f64, f64),
    nodes: &[usize],
    y_end: f64,
    cfg: &HydroConfig,
    interior: (f64, f64),
) -> Result<Vec<ConvergenceRow>> {
    let exact = |pt: Point2| rarefaction_eval(params, pt);
    Ok(convergence_study(&exact, range, 0.0, nodes, y_end, cfg, interior)?.0)
}

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> Result<()> {
    writeln!(out, "n,dx,steps,linf,order")?;
    for r in rows {
        let o = r.order.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(out, "{},{:.12e},{},{:.12e},{}", r.n, r.dx, r.steps, r.linf, o)?;
    }
    Ok(())
}

/// G'' and H'' of the closed-form revolution root.
fn revolution_second(params: &RevolutionParams, xi: f64) -> Result<(f64, f64)> {
    let (e, n, m) = (params.epsilon, params.nu, params.mu);
    let d = (e * xi + n) / (xi * xi);
    let d1 = -e / (xi * xi) - 2.0 * n / xi.powi(3);
    let d2 = 2.0 * e / xi.powi(3) + 6.0 * n / xi.powi(4);
    let p = (m - xi) / (2.0 * xi * xi);
    let p1 = -m / xi.powi(3) + 1.0 / (2.0 * xi * xi);
    let p2 = 3.0 * m / xi.powi(4) - 1.0 / xi.powi(3);
    let disc = d * d + 4.0 * p;
    if xi == 0.0 || !(disc > 0.0) {
        return Err(Error::DomainViolation { id: "revolution".into(), x: xi, y: f64::NAN });
    }
    let disc1 = 2.0 * d * d1 + 4.0 * p1;
    let disc2 = 2.0 * d1 * d1 + 2.0 * d * d2 + 4.0 * p2;
    let sq = disc.sqrt();
    let sq2 = disc2 / (2.0 * sq) - disc1 * disc1 / (4.0 * disc * sq);
    let g2 = 0.5 * (-d2 + params.branch.sign() * sq2);
    Ok((g2, g2 + d2))
}

/// α′ − 3ρ − ξρ′, (α + ξα′) − (β + ξβ′), β′ − 3γ − ξγ′ and ξ³ργ − ξαβ − 1
/// at `xi`, with α = 2G + ξG′, β = 2H + ξH′, ρ = G′, γ = H′.
pub fn revolution_ode_residuals(params: &RevolutionParams, xi: f64) -> Result<[f64; 4]> {
    let r = params.root(xi)?;
    let (g2, h2) = revolution_second(params, xi)?;
    let alpha = 2.0 * r.g + xi * r.gp;
    let beta = 2.0 * r.h + xi * r.hp;
    let (rho, gamma) = (r.gp, r.hp);
    let (alpha1, beta1) = (3.0 * r.gp + xi * g2, 3.0 * r.hp + xi * h2);
    Ok([
        alpha1 - 3.0 * rho - xi * g2,
        (alpha + xi * alpha1) - (beta + xi * beta1),
        beta1 - 3.0 * gamma - xi * h2,
        xi.powi(3) * rho * gamma - xi * alpha * beta - 1.0,
    ])
}

/// Constants in H = F″ + r₁/ξ − r₂/ξ², G = F″ + s₁/ξ − s₂/ξ² and the
/// integration constant s of the quadratic for F″.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialConstants {
    pub s1: f64,
    pub s2: f64,
    pub r1: f64,
    pub r2: f64,
    pub s: f64,
}

impl PotentialConstants {
    /// Constants with s₁ = s₂ = 0 matching `params`.
    pub fn gauge(params: &RevolutionParams) -> Self {
        PotentialConstants { s1: 0.0, s2: 0.0, r1: params.epsilon, r2: -params.nu, s: -0.5 * params.mu }
    }

    /// (ε, ν, μ) = (r₁ − s₁, s₂ − r₂, 2(r₁s₁ − s)).
    pub fn revolution_constants(&self) -> (f64, f64, f64) {
        (self.r1 - self.s1, self.s2 - self.r2, 2.0 * (self.r1 * self.s1 - self.s))
    }
}

/// Residual of ξ²(F″)² + (r₁+s₁)ξF″ − (r₂+s₂)F″ − (r₁s₂+r₂s₁)/ξ + r₂s₂/ξ² + ξ/2 + s
/// at each ξ, with F″ recovered from G, together with the mismatch of F″
/// recovered from H.
pub fn revolution_potential_check(params: &RevolutionParams, k: &PotentialConstants, xis: &[f64]) -> Result<Vec<f64>> {
    let (e, n, m) = k.revolution_constants();
    let scale = 1.0 + params.epsilon.abs() + params.nu.abs() + params.mu.abs();
    if (e - params.epsilon).abs() + (n - params.nu).abs() + (m - params.mu).abs() > 1e-12 * scale {
        return Err(Error::InvalidParameter(format!(
            "constants give (ε, ν, μ) = ({e}, {n}, {m}), expected ({}, {}, {})",
            params.epsilon, params.nu, params.mu
        )));
    }
    xis.iter()
        .map(|&xi| {
            let r = params.root(xi)?;
            let f2 = r.g - k.s1 / xi + k.s2 / (xi * xi);
            let f2h = r.h - k.r1 / xi + k.r2 / (xi * xi);
            let quad = xi * xi * f2 * f2 + (k.r1 + k.s1) * xi * f2 - (k.r2 + k.s2) * f2 - (k.r1 * k.s2 + k.r2 * k.s1) / xi
                + k.r2 * k.s2 / (xi * xi)
                + xi / 2.0
                + k.s;
            Ok(quad.abs().max((f2 - f2h).abs()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Branch, Phi};
    use crate::fields::{observed_orders, Grid2D, ScalarField2D};
    use crate::wdvv::residual_hydro0;
    use proptest::prelude::*;

    fn rarefaction(c: f64, mu: f64) -> RarefactionParams {
        RarefactionParams { c, mu, phi: Phi::Affine { k0: 2.0, k1: 0.25 } }
    }

    #[test]
    fn flux_matrix_examples() {
        let u = flux_matrix(1.0, 0.0, 0.0).unwrap();
        assert_eq!([u[(2, 0)], u[(2, 1)], u[(2, 2)]], [-1.0, 0.0, 0.0]);
        let r = char_speeds(1.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(r.iter().filter(|z| z.im == 0.0).count(), 1);
        assert!(r.iter().any(|z| z.im == 0.0 && (z.re + 1.0).abs() < 1e-14));
        let r = char_speeds(6.0, 3.0, -1.0 / 3.0, 0.0).unwrap();
        let mut re: Vec<f64> = r.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        let disc = (9.0f64 - 8.0).sqrt();
        assert!(r.iter().all(|z| z.im == 0.0));
        assert!(re[0].abs() < 1e-14 && (re[1] - (3.0 - disc) / 12.0).abs() < 1e-14 && (re[2] - (3.0 + disc) / 12.0).abs() < 1e-14);
        assert!(flux_matrix(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn constant_data_is_a_fixed_point() {
        let g = Grid1D::from_interval(0.0, 1.0, 33).unwrap();
        let s0 = HydroState::from_fn(g, 0.0, |_| Ok([1.0, 0.0, 0.0, 1.0])).unwrap();
        for scheme in [Scheme::Lw2, Scheme::Rk2c] {
            let t = evolve(&s0, 0.2, &HydroConfig { scheme, ..Default::default() }).unwrap();
            assert!(t.last().w.iter().all(|w| *w == [1.0, 0.0, 0.0]));
            assert_eq!(t.last().y, 0.2);
        }
    }

    #[test]
    fn lw2_is_exact_on_affine_rarefaction() {
        // Affine φ makes the data affine in (x, y), which the scheme reproduces.
        for mu in [1.0, -1.0] {
            let rows = rarefaction_convergence(&rarefaction(1.0, mu), (0.0, 1.0), &[129, 1025], 0.1, &HydroConfig::default(), (0.3, 0.7)).unwrap();
            assert!(rows.iter().all(|r| r.linf < 1e-12), "{rows:?}");
        }
    }

    #[test]
    fn lw2_converges_to_rarefaction() {
        for mu in [1.0, -1.0] {
            let p = RarefactionParams { c: 1.0, mu, phi: Phi::Exp { k0: 2.0, k1: 1.0 } };
            let rows = rarefaction_convergence(&p, (0.0, 1.0), &[129, 257, 513, 1025], 0.1, &HydroConfig::default(), (0.3, 0.7)).unwrap();
            let errs: Vec<f64> = rows.iter().map(|r| r.linf).collect();
            assert!(observed_orders(&errs).iter().all(|&o| o >= 1.8), "{rows:?}");
        }
    }

    #[test]
    fn evolved_state_satisfies_conservation_laws() {
        let p = RarefactionParams { c: 1.0, mu: 1.0, phi: Phi::Exp { k0: 2.0, k1: 1.0 } };
        let mut d = Vec::new();
        for n in [129, 257, 513] {
            let g = Grid1D::from_interval(0.0, 1.0, n).unwrap();
            let s0 = HydroState::from_fn(g, 0.0, |pt| rarefaction_eval(&p, pt)).unwrap();
            let t = evolve(&s0, 0.05, &HydroConfig::default()).unwrap();
            assert!(t.constraint_drift < 1e-13);
            d.push(t.conservation_defect.iter().fold(0.0f64, |m, v| m.max(*v)));
        }
        assert!(observed_orders(&d).iter().all(|&o| o > 1.7), "{d:?}");
    }

    #[test]
    fn p_floor_halts_with_location() {
        let g = Grid1D::from_interval(0.0, 1.0, 17).unwrap();
        let s0 = HydroState::from_fn(g, 0.0, |pt| Ok([pt.x - 0.5, 0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(evolve(&s0, 0.1, &HydroConfig::default()), Err(Error::PFloor { y, .. }) if y == 0.0));
    }

    #[test]
    fn periodic_boundaries_preserve_totals() {
        let g = Grid1D::from_interval(0.0, 1.0, 65).unwrap();
        let tau = std::f64::consts::TAU;
        let s0 = HydroState::from_fn(g, 0.0, |pt| Ok([2.0 + 0.1 * (tau * pt.x).sin(), 1.0, 0.3, 0.0])).unwrap();
        let cfg = HydroConfig { boundary: Boundary::Periodic, dissipation: 0.01, snapshot_every: 1, ..Default::default() };
        let t = evolve(&s0, 0.05, &cfg).unwrap();
        let total = |s: &HydroState| s.w[..g.n - 1].iter().map(|w| w[0]).sum::<f64>();
        assert!((total(t.last()) - total(&s0)).abs() < 1e-10);
        assert!(t.snapshots.len() > 2);
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("y,x,p,a,b,q\n"));
        assert_eq!(text.lines().count(), 1 + 65 * t.snapshots.len());
    }

    #[test]
    fn revolution_identities() {
        for branch in [Branch::Plus, Branch::Minus] {
            for (e, n, m) in [(0.0, 0.0, 1.0), (0.3, -0.1, 1.5)] {
                let rp = RevolutionParams { epsilon: e, nu: n, mu: m, branch };
                for k in 1..20 {
                    let xi = 0.05 * k as f64 + 0.01;
                    if let Ok(r) = revolution_ode_residuals(&rp, xi) {
                        assert!(r.iter().all(|v| v.abs() < 1e-8), "{r:?} at ξ = {xi}");
                    }
                }
            }
        }
        let rp = RevolutionParams { epsilon: 0.0, nu: 0.0, mu: 1.0, branch: Branch::Plus };
        let xis: Vec<f64> = (1..100).map(|k| k as f64 / 100.0).collect();
        let res = revolution_potential_check(&rp, &PotentialConstants::gauge(&rp), &xis).unwrap();
        assert!(res.iter().all(|v| *v < 1e-8));
        assert!(revolution_potential_check(&rp, &PotentialConstants::gauge(&rp), &[1.5]).is_err());
        let bad = PotentialConstants { s: 0.3, ..PotentialConstants::gauge(&rp) };
        assert!(revolution_potential_check(&rp, &bad, &xis).is_err());
        // Gauge with s₁ ≠ 0 for the same (ε, ν, μ).
        let shifted = PotentialConstants { s1: 0.2, s2: 0.1, r1: 0.2, r2: 0.1, s: 0.04 - 0.5 };
        assert!(revolution_potential_check(&rp, &shifted, &xis).unwrap().iter().all(|v| *v < 1e-8));
    }

    #[test]
    fn revolution_fields_solve_hydro0() {
        let rp = RevolutionParams { epsilon: 0.0, nu: 0.0, mu: 1.0, branch: Branch::Plus };
        let mut errs = Vec::new();
        for n in [33, 65, 129] {
            let g = Grid2D::from_domain(0.4, 0.8, 0.4, 0.8, n, n).unwrap();
            let comp = |c: usize| ScalarField2D::try_from_fn(g, |pt| Ok(revolution_eval(&rp, pt)?[c])).unwrap();
            let r = residual_hydro0(&comp(0), &comp(1), &comp(2), &comp(3)).unwrap();
            assert!(r[3].norms().linf < 1e-10);
            errs.push(r[..3].iter().fold(0.0f64, |m, f| m.max(f.interior_norms(1).linf)));
        }
        assert!(observed_orders(&errs).iter().all(|&o| o > 1.9), "{errs:?}");
    }

    proptest! {
        #[test]
        fn eigenvalues_match_polynomial(p in 0.2..3.0f64, a in -2.0..2.0f64, b in -2.0..2.0f64) {
            let q = (1.0 + a * b) / p;
            let poly = char_speeds(p, a, b, q).unwrap();
            let eig = flux_matrix(p, a, b).unwrap().complex_eigenvalues();
            for u in &poly {
                let d = eig.iter().fold(f64::INFINITY, |m, v| m.min((u - v).norm()));
                prop_assert!(d < 1e-9 * (1.0 + u.norm()), "{poly:?} {eig:?}");
            }
        }

        #[test]
        fn rarefaction_identity(c in -2.0..2.0f64, mu in 0.2..3.0f64, s in prop::bool::ANY, k0 in -3.0..3.0f64, x in -1.0..1.0f64, y in -1.0..1.0f64) {
            let mu = if s { mu } else { -mu };
            let rp = RarefactionParams { c, mu, phi: Phi::Affine { k0, k1: 0.5 } };
            let [p, a, b, q] = rarefaction_eval(&rp, Point2::new(x, y)).unwrap();
            prop_assert!((p * q - a * b - 1.0).abs() < 1e-10 * (1.0 + (p * q).abs()));
        }
    }
}
