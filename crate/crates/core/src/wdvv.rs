//! Residuals of the associativity equations and the pointwise Frobenius
//! algebra built from a flat metric and third derivatives of a potential.
//!
//! The prepotential is normalised as F = (u⁰)³/6 + ½ η_ij u⁰uⁱuʲ + f, so that
//! ∂₀∂ᵢ∂ⱼF = η_ij and the block metric is blockdiag(1, η).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{same_grid, FieldNorms, Grid2D, Jet3, ScalarField2D};

/// `pq − ab − 1`.
pub fn residual_ass1(j: &Jet3) -> f64 {
    j.p * j.q - j.a * j.b - 1.0
}

/// `a² + b² − pb − qa − 1`.
pub fn residual_ass2(j: &Jet3) -> f64 {
    j.a * j.a + j.b * j.b - j.p * j.b - j.q * j.a - 1.0
}

/// `F_ttt − F_tyy² + F_tty F_yyy` for a jet of F(t, y) with t in the x slot.
pub fn residual_ass3(j: &Jet3) -> f64 {
    j.p - j.b * j.b + j.a * j.q
}

/// `(p_y − a_x, a_y − b_x, b_y − q_x, pq − ab − 1)` by central differences.
pub fn residual_hydro0(
    p: &ScalarField2D,
    a: &ScalarField2D,
    b: &ScalarField2D,
    q: &ScalarField2D,
) -> Result<[ScalarField2D; 4]> {
    same_grid(&[p, a, b, q])?;
    let r1 = p.d_dy().zip_with(&a.d_dx(), |u, v| u - v)?;
    let r2 = a.d_dy().zip_with(&b.d_dx(), |u, v| u - v)?;
    let r3 = b.d_dy().zip_with(&q.d_dx(), |u, v| u - v)?;
    let values = (0..p.values.len())
        .map(|k| p.values[k] * q.values[k] - a.values[k] * b.values[k] - 1.0)
        .collect();
    let r4 = ScalarField2D { grid: p.grid, values };
    Ok([r1, r2, r3, r4])
}

/// Signature class of the flat metric on a surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// η = 2 dx dy
    Hyperbolic,
    /// η = dx² + dy²
    Convex,
}

/// Constant nondegenerate metric η_ij on ℝⁿ, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatMetric {
    n: usize,
    g: Vec<f64>,
    inv: Vec<f64>,
}

impl FlatMetric {
    pub fn new(n: usize, g: Vec<f64>) -> Result<Self> {
        if n == 0 || g.len() != n * n {
            return Err(Error::InvalidParameter(format!("metric needs {} entries", n * n)));
        }
        for i in 0..n {
            for j in 0..n {
                if g[i * n + j] != g[j * n + i] {
                    return Err(Error::InvalidParameter("metric must be symmetric".into()));
                }
            }
        }
        let m = DMatrix::from_row_slice(n, n, &g);
        let det = m.determinant();
        let scale = g.iter().fold(0.0f64, |s, v| s.max(v.abs())).powi(n as i32);
        if det.abs() <= 1e-14 * scale || scale == 0.0 {
            return Err(Error::Singular("flat metric is degenerate".into()));
        }
        let inv = m.try_inverse().ok_or_else(|| Error::Singular("flat metric is degenerate".into()))?;
        let inv = (0..n * n).map(|k| inv[(k / n, k % n)]).collect();
        Ok(FlatMetric { n, g, inv })
    }

    /// η for a surface in the given case.
    pub fn eta2(case: Case) -> Self {
        let g = match case {
            Case::Hyperbolic => vec![0.0, 1.0, 1.0, 0.0],
            Case::Convex => vec![1.0, 0.0, 0.0, 1.0],
        };
        FlatMetric::new(2, g).expect("constant metrics are nondegenerate")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.n + j]
    }

    pub fn inv(&self, i: usize, j: usize) -> f64 {
        self.inv[i * self.n + j]
    }
}

/// The four distinct third derivatives of a surface potential as a
/// symmetric tensor f_ijk, index `(i·2 + j)·2 + k`.
pub fn third_tensor(j: &Jet3) -> Vec<f64> {
    let mut t = vec![0.0; 8];
    for i in 0..2 {
        for k in 0..2 {
            for l in 0..2 {
                t[(i * 2 + k) * 2 + l] = match i + k + l {
                    0 => j.p,
                    1 => j.a,
                    2 => j.b,
                    _ => j.q,
                };
            }
        }
    }
    t
}

/// h^s_ij = η^{sk} f_ijk, index `(s·n + i)·n + j`.
pub fn raise_index(eta: &FlatMetric, f3: &[f64]) -> Result<Vec<f64>> {
    let n = eta.dim();
    if f3.len() != n * n * n {
        return Err(Error::InvalidParameter(format!("third-derivative tensor needs {} entries", n * n * n)));
    }
    let mut h = vec![0.0; n * n * n];
    for s in 0..n {
        for i in 0..n {
            for j in 0..n {
                h[(s * n + i) * n + j] = (0..n).map(|k| eta.inv(s, k) * f3[(i * n + j) * n + k]).sum();
            }
        }
    }
    Ok(h)
}

/// c^α_βγ for α, β, γ ∈ {0, …, n}, index `(α·m + β)·m + γ` with m = n + 1.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureConstants {
    pub n: usize,
    pub c: Vec<f64>,
}

impl StructureConstants {
    pub fn get(&self, alpha: usize, beta: usize, gamma: usize) -> f64 {
        let m = self.n + 1;
        self.c[(alpha * m + beta) * m + gamma]
    }
}

/// c⁰₀₀ = 1, c⁰ᵢⱼ = η_ij, cⁱ₀ⱼ = cⁱⱼ₀ = δⁱⱼ, cⁱⱼₖ = hⁱⱼₖ, all others zero.
pub fn build_structure_constants(eta: &FlatMetric, h: &[f64]) -> Result<StructureConstants> {
    let n = eta.dim();
    if h.len() != n * n * n {
        return Err(Error::InvalidParameter(format!("h tensor needs {} entries", n * n * n)));
    }
    let m = n + 1;
    let mut c = vec![0.0; m * m * m];
    let idx = |a: usize, b: usize, g: usize| (a * m + b) * m + g;
    c[idx(0, 0, 0)] = 1.0;
    for i in 0..n {
        c[idx(i + 1, 0, i + 1)] = 1.0;
        c[idx(i + 1, i + 1, 0)] = 1.0;
        for j in 0..n {
            c[idx(0, i + 1, j + 1)] = eta.g(i, j);
            for k in 0..n {
                c[idx(i + 1, j + 1, k + 1)] = h[(i * n + j) * n + k];
            }
        }
    }
    Ok(StructureConstants { n, c })
}

/// Structure constants of a surface potential's jet in the given case.
pub fn structure_constants_from_jet(case: Case, j: &Jet3) -> StructureConstants {
    let eta = FlatMetric::eta2(case);
    let h = raise_index(&eta, &third_tensor(j)).expect("sizes match for n = 2");
    build_structure_constants(&eta, &h).expect("sizes match for n = 2")
}

/// max |Σₑ c^e_αβ c^δ_eγ − c^e_αγ c^δ_eβ| over all index tuples.
pub fn associativity_residual(c: &StructureConstants) -> f64 {
    let m = c.n + 1;
    let mut worst = 0.0f64;
    for al in 0..m {
        for be in 0..m {
            for ga in 0..m {
                for de in 0..m {
                    let s: f64 = (0..m)
                        .map(|e| c.get(e, al, be) * c.get(de, e, ga) - c.get(e, al, ga) * c.get(de, e, be))
                        .sum();
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    worst
}

/// Max-norm defect of h^p_ij h^s_pk − h^p_ik h^s_pj = η_ik δ^s_j − η_ij δ^s_k.
pub fn comp3_curvature_residual(eta: &FlatMetric, h: &[f64]) -> f64 {
    let n = eta.dim();
    let at = |s: usize, i: usize, j: usize| h[(s * n + i) * n + j];
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for s in 0..n {
                    let lhs: f64 = (0..n).map(|p| at(p, i, j) * at(s, p, k) - at(p, i, k) * at(s, p, j)).sum();
                    let rhs = eta.g(i, k) * delta(s, j) - eta.g(i, j) * delta(s, k);
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    worst
}

/// Residual-norm summary written as JSON by the command-line tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub solution: String,
    pub grid: Grid2D,
    #[serde(rename = "Linf")]
    pub linf: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub nodes_evaluated: usize,
}

impl ResidualReport {
    pub fn new(solution: &str, field: &ScalarField2D) -> Self {
        let FieldNorms { linf, l2, nodes } = field.norms();
        ResidualReport { solution: solution.to_string(), grid: field.grid, linf, l2, nodes_evaluated: nodes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{eval_jet, Solution};
    use crate::fields::Point2;

    #[test]
    fn residual_examples() {
        let t1 = eval_jet("table1_f", &[], Point2::new(1.0, 2.0)).unwrap();
        assert_eq!(residual_ass1(&t1), 0.0);
        let tc = Jet3::from_third(1.0, 0.0, 0.0, 1.0);
        assert_eq!(residual_ass1(&tc), 0.0);
        assert_eq!(residual_ass1(&Jet3::default()), -1.0);

        assert_eq!(residual_ass2(&Jet3::from_third(0.0, 1.0, 0.0, 0.0)), 0.0);
        assert_eq!(residual_ass2(&Jet3::default()), -1.0);
        assert_eq!(residual_ass2(&tc), -1.0);

        let f1 = eval_jet("table1_F", &[], Point2::new(1.0, 2.0)).unwrap();
        assert_eq!((f1.p, f1.b, f1.a, f1.q), (1.0, 1.0, 2.0, 0.0));
        assert_eq!(residual_ass3(&f1), 0.0);
        let f2 = eval_jet("table2_F", &[], Point2::new(0.3, -1.2)).unwrap();
        assert!(residual_ass3(&f2).abs() < 1e-15);
        assert_eq!(residual_ass3(&Jet3::default()), 0.0);
    }

    #[test]
    fn hydro0_constant_fields() {
        let g = Grid2D::from_domain(0.0, 1.0, 0.0, 1.0, 9, 9).unwrap();
        let one = ScalarField2D::constant(g, 1.0);
        let r = residual_hydro0(&one, &one, &one, &one).unwrap();
        for k in 0..3 {
            assert_eq!(r[k].norms().linf, 0.0);
        }
        assert!(r[3].values.iter().all(|&v| v == -1.0));
        let other = ScalarField2D::constant(Grid2D::from_domain(0.0, 2.0, 0.0, 1.0, 9, 9).unwrap(), 1.0);
        assert_eq!(residual_hydro0(&one, &one, &other, &one).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn trivial_cubic_constants() {
        let c = structure_constants_from_jet(Case::Hyperbolic, &Jet3::from_third(1.0, 0.0, 0.0, 1.0));
        let mut nonzero = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                for g in 0..3 {
                    if c.get(a, b, g) != 0.0 {
                        nonzero.push((a, b, g, c.get(a, b, g)));
                    }
                }
            }
        }
        let expected = vec![
            (0, 0, 0, 1.0),
            (0, 1, 2, 1.0),
            (0, 2, 1, 1.0),
            (1, 0, 1, 1.0),
            (1, 1, 0, 1.0),
            (1, 2, 2, 1.0),
            (2, 0, 2, 1.0),
            (2, 1, 1, 1.0),
            (2, 2, 0, 1.0),
        ];
        assert_eq!(nonzero, expected);
        assert_eq!(associativity_residual(&c), 0.0);
    }

    #[test]
    fn table1_constants() {
        let j = eval_jet("table1_f", &[], Point2::new(1.0, 2.0)).unwrap();
        let c = structure_constants_from_jet(Case::Hyperbolic, &j);
        // h¹_ij = f_ijy, h²_ij = f_ijx under η^{12} = 1.
        assert_eq!(c.get(2, 1, 1), 0.5);
        assert_eq!(c.get(1, 1, 1), -0.25);
        assert_eq!(c.get(1, 2, 2), 31.0 / 16.0);
        assert!(associativity_residual(&c) < 1e-15);
    }

    #[test]
    fn zero_potential_fails_by_eta_terms() {
        let eta = FlatMetric::eta2(Case::Hyperbolic);
        let h = vec![0.0; 8];
        let c = build_structure_constants(&eta, &h).unwrap();
        assert_eq!(associativity_residual(&c), 1.0);
        assert_eq!(comp3_curvature_residual(&eta, &h), 1.0);
    }

    #[test]
    fn convex_solution_is_associative() {
        let j = Solution::get("convex_trivial").unwrap().eval_jet(Point2::new(0.3, 0.4)).unwrap();
        let c = structure_constants_from_jet(Case::Convex, &j);
        assert!(associativity_residual(&c) < 1e-15);
        let eta = FlatMetric::eta2(Case::Convex);
        let h = raise_index(&eta, &third_tensor(&j)).unwrap();
        assert!(comp3_curvature_residual(&eta, &h) < 1e-15);
    }

    #[test]
    fn singular_metric_rejected() {
        assert!(matches!(FlatMetric::new(2, vec![1.0, 1.0, 1.0, 1.0]), Err(Error::Singular(_))));
        assert!(FlatMetric::new(2, vec![1.0, 2.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn report_json_keys() {
        let g = Grid2D::from_domain(0.0, 1.0, 0.0, 1.0, 5, 5).unwrap();
        let f = ScalarField2D::constant(g, -2.0);
        let r = ResidualReport::new("x", &f);
        assert_eq!((r.linf, r.l2, r.nodes_evaluated), (2.0, 2.0, 25));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn comp3_measures_ass1(p in -3.0..3.0f64, a in -3.0..3.0f64, b in -3.0..3.0f64, q in -3.0..3.0f64) {
                let j = Jet3::from_third(p, a, b, q);
                let eta = FlatMetric::eta2(Case::Hyperbolic);
                let h = raise_index(&eta, &third_tensor(&j)).unwrap();
                let r = comp3_curvature_residual(&eta, &h);
                prop_assert!((r - residual_ass1(&j).abs()).abs() < 1e-12 * (1.0 + r));
            }

            #[test]
            fn comp3_measures_ass2(p in -3.0..3.0f64, a in -3.0..3.0f64, b in -3.0..3.0f64, q in -3.0..3.0f64) {
                let j = Jet3::from_third(p, a, b, q);
                let eta = FlatMetric::eta2(Case::Convex);
                let h = raise_index(&eta, &third_tensor(&j)).unwrap();
                let r = comp3_curvature_residual(&eta, &h);
                prop_assert!((r - residual_ass2(&j).abs()).abs() < 1e-12 * (1.0 + r));
            }

            #[test]
            fn associativity_iff_comp3_on_shell(a in -3.0..3.0f64, b in -3.0..3.0f64, p in 0.2..3.0f64) {
                // q solves pq − ab = 1
                let j = Jet3::from_third(p, a, b, (1.0 + a * b) / p);
                let c = structure_constants_from_jet(Case::Hyperbolic, &j);
                let scale = 1.0 + [p, a, b, j.q].iter().fold(0.0f64, |m, v| m.max(v.abs())).powi(2);
                prop_assert!(associativity_residual(&c) < 1e-13 * scale);
                let off = Jet3::from_third(p, a, b, j.q + 0.5);
                let c = structure_constants_from_jet(Case::Hyperbolic, &off);
                prop_assert!(associativity_residual(&c) > 0.1);
            }
        }
    }
}
