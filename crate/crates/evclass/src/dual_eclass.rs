//! The dual e-class and its finite-scale optimality oracle.
//!
//! For a hypothesis with tight constraint `phi'` and slack constraint `phi''`
//! the dual e-class consists of the affine e-variables
//!
//! ```text
//!     E_lambda(x) = 1 - lambda' . phi'(x) - lambda'' . phi''(x),
//! ```
//!
//! with `lambda'' >= 0` componentwise and `E_lambda >= 0` on the whole sample
//! space — equivalently `sup_x lambda . phi(x) <= 1`. Two families admit
//! exact feasibility sets that override grid suprema:
//!
//! * unit-interval mean `mu`: the interval `[1/(mu-1), 1/mu]`;
//! * heavy-tail mean `mu` with unit second moment: the ellipse
//!   `alpha^2 + 4 mu alpha beta + 4 beta^2 - 4 beta <= 0`.
//!
//! On finite grids the dual class is certified optimal constructively: every
//! e-variable is majorized by the output of a sequence of coordinate LPs
//! (maximize one grid value at a time subject to the vertex expectations of
//! the hypothesis polytope staying at most one), and the resulting maximal
//! e-variable lands back in the span of the constraint, which is checked by
//! a least-squares fit with a hard residual threshold.

use thiserror::Error;

use crate::config::{DUAL_RESIDUAL_TOL, ORACLE_MAX_CONSTRAINTS, ORACLE_MAX_GRID};
use crate::geometry::{dot, gauss_solve, independent_rows, solve_lp_with, LpProblem};
use crate::hypothesis::{Classification, ClosedForm, Hypothesis, ProbWeights};

#[derive(Debug, Error)]
pub enum DualError {
    #[error("not an e-variable: some vertex expectation exceeds one by {0:.3e}")]
    NotAnEVariable(f64),
}

/// A candidate dual parameter `(lambda', lambda'')`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaVector {
    lam_tight: Vec<f64>,
    lam_slack: Vec<f64>,
}

impl LambdaVector {
    /// Slack multipliers must be non-negative.
    pub fn new(lam_tight: Vec<f64>, lam_slack: Vec<f64>) -> Self {
        assert!(
            lam_slack.iter().all(|&l| l >= 0.0),
            "slack multipliers must be non-negative, got {lam_slack:?}"
        );
        Self {
            lam_tight,
            lam_slack,
        }
    }

    pub fn zeros(m_tight: usize, m_slack: usize) -> Self {
        Self {
            lam_tight: vec![0.0; m_tight],
            lam_slack: vec![0.0; m_slack],
        }
    }

    pub fn tight_only(lam_tight: Vec<f64>) -> Self {
        Self::new(lam_tight, Vec::new())
    }

    pub fn lam_tight(&self) -> &[f64] {
        &self.lam_tight
    }

    pub fn lam_slack(&self) -> &[f64] {
        &self.lam_slack
    }

    /// Joint vector `(lambda', lambda'')`.
    pub fn joint(&self) -> Vec<f64> {
        let mut v = self.lam_tight.clone();
        v.extend_from_slice(&self.lam_slack);
        v
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.lam_tight.len(), self.lam_slack.len())
    }

    /// Convex combination `(1-t) self + t other`; keeps slack non-negative.
    pub fn mix(&self, other: &LambdaVector, t: f64) -> LambdaVector {
        assert_eq!(self.dims(), other.dims());
        let blend = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(x, y)| (1.0 - t) * x + t * y)
                .collect()
        };
        LambdaVector {
            lam_tight: blend(&self.lam_tight, &other.lam_tight),
            lam_slack: blend(&self.lam_slack, &other.lam_slack)
                .into_iter()
                .map(|v| v.max(0.0))
                .collect(),
        }
    }
}

/// An e-variable tabulated on the grid; carries its dual parameter when it is
/// known to lie in the dual class.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedEVariable {
    pub values: Vec<f64>,
    pub lambda: Option<LambdaVector>,
}

impl TabulatedEVariable {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(
            values.iter().all(|&v| v >= 0.0),
            "e-variable values must be non-negative"
        );
        Self {
            values,
            lambda: None,
        }
    }

    pub fn constant(value: f64, len: usize) -> Self {
        Self::new(vec![value; len])
    }
}

// ---------------------------------------------------------------------------
// Feasibility
// ---------------------------------------------------------------------------

/// `sup_x lambda . phi(x)` over the sample space: exact for registered closed
/// forms, the tabulation maximum otherwise.
pub fn lambda_sup(lam: &LambdaVector, hypothesis: &Hypothesis) -> f64 {
    let constraint = hypothesis.constraint();
    assert_eq!(
        lam.dims(),
        (constraint.m_tight(), constraint.m_slack()),
        "lambda dimension mismatch"
    );
    match hypothesis.closed_form() {
        ClosedForm::UnitIntervalMean { mu } => {
            // sup_{x in [0,1]} lambda (mu - x)
            let l = lam.lam_tight[0];
            if l >= 0.0 {
                l * mu
            } else {
                l * (mu - 1.0)
            }
        }
        ClosedForm::HeavyTailMean { mu } => {
            // E = 1 + alpha (x - mu) + beta (x^2 - 1) with alpha = lambda',
            // beta = lambda''; sup lambda . phi = 1 - inf E.
            let alpha = lam.lam_tight[0];
            let beta = lam.lam_slack[0];
            heavy_tail_sup(alpha, beta, *mu)
        }
        ClosedForm::None => {
            let joint = lam.joint();
            constraint
                .tabulation()
                .iter()
                .map(|row| dot(&joint, row))
                .fold(f64::NEG_INFINITY, f64::max)
        }
    }
}

/// `sup_x [alpha (mu - x) + beta (1 - x^2)]` on the real line.
fn heavy_tail_sup(alpha: f64, beta: f64, mu: f64) -> f64 {
    if beta > 0.0 {
        // Downward parabola in x; maximum at x* = -alpha / (2 beta).
        alpha * mu + beta + alpha * alpha / (4.0 * beta)
    } else if beta == 0.0 {
        if alpha == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        f64::INFINITY
    }
}

/// Whether the e-variable `1 - lambda . phi` is non-negative on the sample
/// space, i.e. `sup_x lambda . phi(x) <= 1 + tol`, with slack multipliers
/// non-negative.
pub fn lambda_feasible(lam: &LambdaVector, hypothesis: &Hypothesis, tol: f64) -> bool {
    if lam.lam_slack.iter().any(|&l| l < 0.0) {
        return false;
    }
    lambda_sup(lam, hypothesis) <= 1.0 + tol
}

/// `E_lambda(x) = 1 - lambda' . phi'(x) - lambda'' . phi''(x)`.
pub fn evaluate_e(lam: &LambdaVector, hypothesis: &Hypothesis, x: &[f64]) -> f64 {
    let phi = hypothesis.constraint_at(x);
    let joint = lam.joint();
    assert_eq!(joint.len(), phi.len(), "lambda dimension mismatch");
    1.0 - dot(&joint, &phi)
}

/// The feasible lambda interval `[1/(mu-1), 1/mu]` for the mean-`mu`
/// hypothesis on the unit interval with constraint `mu - x`.
pub fn lambda_interval_unit(mu: f64) -> (f64, f64) {
    assert!(mu > 0.0 && mu < 1.0, "mu must lie in (0,1), got {mu}");
    (1.0 / (mu - 1.0), 1.0 / mu)
}

/// Closed-form membership in the heavy-tail feasibility ellipse:
/// `beta >= 0` and `alpha^2 + 4 mu alpha beta + 4 beta^2 - 4 beta <= 0`.
pub fn heavy_tail_feasible(alpha: f64, beta: f64, mu: f64) -> bool {
    assert!(mu > -1.0 && mu < 1.0, "mu must lie in (-1,1), got {mu}");
    beta >= 0.0 && heavy_tail_ellipse_value(alpha, beta, mu) <= 0.0
}

/// The quadratic form whose zero sublevel set is the heavy-tail ellipse.
pub fn heavy_tail_ellipse_value(alpha: f64, beta: f64, mu: f64) -> f64 {
    alpha * alpha + 4.0 * mu * alpha * beta + 4.0 * beta * beta - 4.0 * beta
}

// ---------------------------------------------------------------------------
// Vertex enumeration oracle
// ---------------------------------------------------------------------------

/// All vertices (basic feasible solutions) of the hypothesis polytope
/// `{w >= 0, sum w = 1, sum w phi = 0}`, deduplicated within 1e-9.
///
/// Desk-scale only: panics beyond [`ORACLE_MAX_GRID`] points or
/// [`ORACLE_MAX_CONSTRAINTS`] tight components, and requires `m'' = 0`.
pub fn enumerate_vertices(hypothesis: &Hypothesis) -> Vec<ProbWeights> {
    let d = hypothesis.grid().len();
    let constraint = hypothesis.constraint();
    assert!(
        d <= ORACLE_MAX_GRID,
        "vertex enumeration capped at {ORACLE_MAX_GRID} grid points, got {d}"
    );
    assert!(
        constraint.m_tight() <= ORACLE_MAX_CONSTRAINTS,
        "vertex enumeration capped at {ORACLE_MAX_CONSTRAINTS} constraint components"
    );
    assert_eq!(constraint.m_slack(), 0, "vertex enumeration requires m'' = 0");
    let tol = hypothesis.tolerances();

    // System rows: one per tight component plus the stochasticity row.
    let m = constraint.m_tight();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut rhs: Vec<f64> = Vec::with_capacity(m + 1);
    for k in 0..m {
        rows.push((0..d).map(|i| constraint.tab_row(i)[k]).collect());
        rhs.push(0.0);
    }
    rows.push(vec![1.0; d]);
    rhs.push(1.0);

    let row_basis = independent_rows(&rows, tol);
    let r = row_basis.len();

    let mut vertices: Vec<Vec<f64>> = Vec::new();
    for cols in combinations(d, r) {
        let a: Vec<Vec<f64>> = row_basis
            .iter()
            .map(|&ri| cols.iter().map(|&c| rows[ri][c]).collect())
            .collect();
        let b: Vec<f64> = row_basis.iter().map(|&ri| rhs[ri]).collect();
        let Some(wb) = gauss_solve(&a, &b, tol) else {
            continue;
        };
        if wb.iter().any(|&w| w < -1e-9) {
            continue;
        }
        let mut w = vec![0.0; d];
        for (&c, &v) in cols.iter().zip(&wb) {
            w[c] = v.max(0.0);
        }
        // Dropped (dependent) rows must also be satisfied.
        let consistent = rows
            .iter()
            .zip(&rhs)
            .all(|(row, &b)| (dot(row, &w) - b).abs() <= 1e-9);
        if !consistent {
            continue;
        }
        let duplicate = vertices.iter().any(|v| {
            v.iter()
                .zip(&w)
                .all(|(a, b)| (a - b).abs() <= 1e-9)
        });
        if !duplicate {
            vertices.push(w);
        }
    }
    vertices
        .into_iter()
        .map(|w| ProbWeights::new(w).expect("vertex weights are a distribution"))
        .collect()
}

/// Lexicographic k-subsets of {0..n-1}.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Maximal majorizer
// ---------------------------------------------------------------------------

/// Majorizes `e0` by a maximal e-variable via one coordinate LP per grid
/// point, taken in ascending index order.
///
/// At step `i` the LP maximizes `E(x_i)` over all `E` that majorize the
/// current iterate and keep `<P, E> <= 1` at every vertex `P` of the
/// hypothesis polytope (which bounds the expectation under the whole
/// hypothesis, by convexity). Only the maximized coordinate is updated; the
/// pointwise-minimal argmax is itself a valid choice, and using it makes the
/// output independent of LP tie-breaking.
pub fn maximal_majorizer(
    e0: &TabulatedEVariable,
    hypothesis: &Hypothesis,
) -> Result<TabulatedEVariable, DualError> {
    assert_eq!(
        hypothesis.classification(),
        Classification::Proper,
        "the maximality oracle requires a proper hypothesis"
    );
    let d = hypothesis.grid().len();
    assert_eq!(e0.values.len(), d, "e-variable length must match the grid");
    let tol = hypothesis.tolerances();
    let vertices = enumerate_vertices(hypothesis);
    debug_assert!(!vertices.is_empty(), "a proper hypothesis has vertices");

    // Vertex expectations of the input must not exceed one.
    let mut worst: f64 = 0.0;
    for v in &vertices {
        worst = worst.max(dot(v.as_slice(), &e0.values) - 1.0);
    }
    if worst > 1e-9 {
        return Err(DualError::NotAnEVariable(worst));
    }

    let mut current = e0.values.clone();
    for i in 0..d {
        let mut objective = vec![0.0; d];
        objective[i] = 1.0;
        let mut problem = LpProblem::maximize(objective).with_lower(current.clone());
        for v in &vertices {
            problem = problem.le_row(v.as_slice().to_vec(), 1.0);
        }
        let (value, _) = solve_lp_with(&problem, tol)
            .expect_optimal("coordinate LP of the maximal majorizer");
        current[i] = value.max(current[i]);
    }

    let fit = verify_in_dual_class_values(&current, hypothesis);
    let lambda = fit.in_dual_class.then_some(fit.lambda);
    Ok(TabulatedEVariable {
        values: current.into_iter().map(|v| v.max(0.0)).collect(),
        lambda,
    })
}

/// Re-solves the coordinate LP at `index` against `e` itself; maximality
/// means the optimum does not move. Exposed for verification suites.
pub fn coordinate_resolve(
    e: &TabulatedEVariable,
    hypothesis: &Hypothesis,
    index: usize,
) -> f64 {
    let d = hypothesis.grid().len();
    let vertices = enumerate_vertices(hypothesis);
    let mut objective = vec![0.0; d];
    objective[index] = 1.0;
    let mut problem = LpProblem::maximize(objective).with_lower(e.values.clone());
    for v in &vertices {
        problem = problem.le_row(v.as_slice().to_vec(), 1.0);
    }
    let (value, _) = solve_lp_with(&problem, hypothesis.tolerances())
        .expect_optimal("coordinate re-solve");
    value
}

// ---------------------------------------------------------------------------
// Dual-class membership
// ---------------------------------------------------------------------------

/// Result of fitting `E - 1` onto the span of the tabulated constraint.
#[derive(Debug, Clone)]
pub struct DualFit {
    /// Least-squares dual parameter (zero entries on dependent components).
    pub lambda: LambdaVector,
    /// Largest absolute misfit of `1 - lambda . phi` against `E` on the grid.
    pub residual: f64,
    /// Declared membership: residual at most 1e-8 and the fitted lambda
    /// feasible.
    pub in_dual_class: bool,
}

/// Least-squares fit of `(E - 1)` onto the column span of the tabulated
/// tight constraint. Requires `m'' = 0`.
pub fn verify_in_dual_class(e: &TabulatedEVariable, hypothesis: &Hypothesis) -> DualFit {
    verify_in_dual_class_values(&e.values, hypothesis)
}

fn verify_in_dual_class_values(values: &[f64], hypothesis: &Hypothesis) -> DualFit {
    let constraint = hypothesis.constraint();
    assert_eq!(constraint.m_slack(), 0, "dual-class fit requires m'' = 0");
    let d = hypothesis.grid().len();
    let m = constraint.m_tight();
    assert_eq!(values.len(), d);
    let tol = hypothesis.tolerances();

    let y: Vec<f64> = values.iter().map(|&v| v - 1.0).collect();
    let columns: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..d).map(|i| constraint.tab_row(i)[j]).collect())
        .collect();
    let mut lambda = vec![0.0; m];
    if m > 0 {
        let keep = independent_rows(&columns, tol);
        if !keep.is_empty() {
            let k = keep.len();
            // Normal equations G l = -A^T y on the independent columns.
            let mut g = vec![vec![0.0; k]; k];
            let mut rhs = vec![0.0; k];
            for (a, &ca) in keep.iter().enumerate() {
                for (b, &cb) in keep.iter().enumerate() {
                    g[a][b] = dot(&columns[ca], &columns[cb]);
                }
                rhs[a] = -dot(&columns[ca], &y);
            }
            if let Some(sol) = gauss_solve(&g, &rhs, tol) {
                for (&slot, &c) in sol.iter().zip(&keep) {
                    lambda[c] = slot;
                }
            }
        }
    }
    let mut residual: f64 = 0.0;
    for i in 0..d {
        let fitted: f64 = (0..m).map(|j| columns[j][i] * lambda[j]).sum();
        residual = residual.max((y[i] + fitted).abs());
    }
    let lam = LambdaVector::tight_only(lambda);
    let in_dual_class =
        residual <= DUAL_RESIDUAL_TOL && lambda_feasible(&lam, hypothesis, tol.feasibility);
    DualFit {
        lambda: lam,
        residual,
        in_dual_class,
    }
}

// ---------------------------------------------------------------------------
// Euclidean projection onto the heavy-tail ellipse
// ---------------------------------------------------------------------------

/// Euclidean projection of `(alpha, beta)` onto the closed convex set
/// `{alpha^2 + 4 mu alpha beta + 4 beta^2 - 4 beta <= 0}`.
///
/// The set is the sublevel set of `(v - v0)^T Q (v - v0) <= r^2` with
/// `Q = [[1, 2 mu], [2 mu, 4]]`; the projection solves the secular equation
/// of the KKT system by safeguarded Newton in the eigenbasis of `Q`.
pub fn project_onto_heavy_tail_ellipse(mu: f64, alpha: f64, beta: f64) -> (f64, f64) {
    debug_assert!(mu > -1.0 && mu < 1.0);
    if heavy_tail_ellipse_value(alpha, beta, mu) <= 0.0 {
        return (alpha, beta);
    }
    // Center and radius: v^T Q v - (0,4).v = (v-v0)^T Q (v-v0) - r^2.
    let det = 4.0 - 4.0 * mu * mu;
    let v0 = (-4.0 * mu / det, 2.0 / det);
    let r2 = {
        let (a, b) = v0;
        a * a + 4.0 * mu * a * b + 4.0 * b * b
    };

    // Eigendecomposition of Q = [[1, 2mu], [2mu, 4]].
    let (q11, q12, q22) = (1.0, 2.0 * mu, 4.0);
    let tr = q11 + q22;
    let disc = ((q11 - q22) * (q11 - q22) + 4.0 * q12 * q12).sqrt();
    let d1 = 0.5 * (tr - disc);
    let d2 = 0.5 * (tr + disc);
    // Eigenvector for d1: (q12, d1 - q11) unless degenerate.
    let (ex, ey) = if q12.abs() > 1e-300 {
        let v = (q12, d1 - q11);
        let n = (v.0 * v.0 + v.1 * v.1).sqrt();
        (v.0 / n, v.1 / n)
    } else {
        (1.0, 0.0)
    };
    // Rotation: columns (e1, e2) with e2 perpendicular.
    let rot = [[ex, -ey], [ey, ex]];

    let z = (alpha - v0.0, beta - v0.1);
    let zt = (
        rot[0][0] * z.0 + rot[1][0] * z.1,
        rot[0][1] * z.0 + rot[1][1] * z.1,
    );
    let d = [d1, d2];
    let zt = [zt.0, zt.1];

    // phi(nu) = sum d_i zt_i^2 / (1 + nu d_i)^2 - r^2, strictly decreasing.
    let phi = |nu: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            let denom = 1.0 + nu * d[i];
            s += d[i] * zt[i] * zt[i] / (denom * denom);
        }
        s - r2
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while phi(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e18 {
            break;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    let ut = [zt[0] / (1.0 + nu * d[0]), zt[1] / (1.0 + nu * d[1])];
    let u = (
        rot[0][0] * ut[0] + rot[0][1] * ut[1],
        rot[1][0] * ut[0] + rot[1][1] * ut[1],
    );
    (v0.0 + u.0, (v0.1 + u.1).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::expr::Expr;
    use crate::hypothesis::{ConstraintSpec, SampleGrid};
    use proptest::prelude::*;

    fn mean_half_desk() -> Hypothesis {
        let grid = SampleGrid::explicit_scalar(&[0.0, 0.5, 1.0]).unwrap();
        let constraint =
            ConstraintSpec::from_exprs(vec![Expr::mean_constraint(0.5)], Vec::new(), &grid)
                .unwrap();
        Hypothesis::new(grid, constraint, ClosedForm::None, Tolerances::default()).unwrap()
    }

    fn mean_half_unit() -> Hypothesis {
        Hypothesis::bounded_mean(0.5, 0.001).unwrap()
    }

    // -- lambda_feasible / evaluate_e --

    #[test]
    fn zero_lambda_is_always_feasible() {
        let h = mean_half_unit();
        let lam = LambdaVector::zeros(1, 0);
        assert!(lambda_feasible(&lam, &h, 1e-9));
        assert_eq!(evaluate_e(&lam, &h, &[0.3]), 1.0);
    }

    #[test]
    fn unit_interval_box_edges() {
        let h = mean_half_unit();
        assert!(lambda_feasible(&LambdaVector::tight_only(vec![2.0]), &h, 1e-9));
        assert!(lambda_feasible(&LambdaVector::tight_only(vec![-2.0]), &h, 1e-9));
        assert!(!lambda_feasible(&LambdaVector::tight_only(vec![2.01]), &h, 1e-9));
        assert!(!lambda_feasible(&LambdaVector::tight_only(vec![-2.01]), &h, 1e-9));
    }

    #[test]
    fn grid_sup_agrees_with_box_for_unregistered_hypothesis() {
        let h = mean_half_desk(); // no closed form; sup taken over the grid
        assert!(lambda_feasible(&LambdaVector::tight_only(vec![2.0]), &h, 1e-9));
        assert!(!lambda_feasible(&LambdaVector::tight_only(vec![2.01]), &h, 1e-9));
    }

    #[test]
    fn heavy_tail_alpha_without_beta_is_infeasible() {
        let h = Hypothesis::heavy_tail_mean_default(0.0).unwrap();
        // (alpha, beta) = (2, 0): E = 1 + 2x is negative below x = -0.5.
        let lam = LambdaVector::new(vec![2.0], vec![0.0]);
        assert!(!lambda_feasible(&lam, &h, 1e-9));
    }

    #[test]
    fn evaluate_e_examples() {
        let h = mean_half_unit();
        // E(x) = 1 + 2 (x - 0.5) corresponds to lambda = 2 against mu - x.
        let lam = LambdaVector::tight_only(vec![2.0]);
        assert!((evaluate_e(&lam, &h, &[1.0]) - 2.0).abs() < 1e-12);

        let ht = Hypothesis::heavy_tail_mean_default(0.0).unwrap();
        // E = 1 + alpha (x - mu) + beta (x^2 - 1) with (alpha, beta) = (1, 0.5):
        // alpha = lambda', beta = lambda''.
        let lam = LambdaVector::new(vec![1.0], vec![0.5]);
        assert!((evaluate_e(&lam, &ht, &[0.0]) - 0.5).abs() < 1e-12);
        assert!((evaluate_e(&lam, &ht, &[1.0]) - 2.0).abs() < 1e-12);
        assert!(lambda_feasible(&lam, &ht, 1e-9));
    }

    // -- closed-form intervals --

    #[test]
    fn lambda_interval_values() {
        let (lo, hi) = lambda_interval_unit(0.5);
        assert!((lo + 2.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
        let (lo, hi) = lambda_interval_unit(0.25);
        assert!((lo + 4.0 / 3.0).abs() < 1e-12 && (hi - 4.0).abs() < 1e-12);
        let (lo, hi) = lambda_interval_unit(0.8);
        assert!((lo + 5.0).abs() < 1e-9 && (hi - 1.25).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "mu must lie in (0,1)")]
    fn lambda_interval_rejects_bad_mu() {
        lambda_interval_unit(1.0);
    }

    #[test]
    fn heavy_tail_feasible_examples() {
        assert!(heavy_tail_feasible(0.0, 0.0, 0.0)); // E == 1
        assert!(heavy_tail_feasible(1.0, 0.5, 0.0)); // boundary: 1 + 1 - 2 = 0
        assert!(!heavy_tail_feasible(0.0, 1.5, 0.0)); // 9 - 6 = 3 > 0
        assert!(!heavy_tail_feasible(0.1, -0.1, 0.0)); // negative beta
    }

    // -- enumerate_vertices --

    #[test]
    fn vertices_of_mean_half() {
        let h = mean_half_desk();
        let vs = enumerate_vertices(&h);
        assert_eq!(vs.len(), 2);
        let found_mid = vs
            .iter()
            .any(|v| (v.get(1) - 1.0).abs() < 1e-9);
        let found_ends = vs
            .iter()
            .any(|v| (v.get(0) - 0.5).abs() < 1e-9 && (v.get(2) - 0.5).abs() < 1e-9);
        assert!(found_mid && found_ends);
    }

    #[test]
    fn vertices_of_two_point_mean() {
        let grid = SampleGrid::explicit_scalar(&[0.0, 1.0]).unwrap();
        let c = ConstraintSpec::from_exprs(vec![Expr::mean_constraint(0.5)], Vec::new(), &grid)
            .unwrap();
        let h = Hypothesis::new(grid, c, ClosedForm::None, Tolerances::default()).unwrap();
        let vs = enumerate_vertices(&h);
        assert_eq!(vs.len(), 1);
        assert!((vs[0].get(0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn vertices_of_unconstrained_simplex() {
        let grid = SampleGrid::explicit_scalar(&[0.0, 1.0]).unwrap();
        let c = ConstraintSpec::from_exprs(vec![Expr::parse("0").unwrap()], Vec::new(), &grid)
            .unwrap();
        let h = Hypothesis::new(grid, c, ClosedForm::None, Tolerances::default()).unwrap();
        let vs = enumerate_vertices(&h);
        assert_eq!(vs.len(), 2);
    }

    // -- maximal_majorizer --

    #[test]
    fn majorizer_from_half() {
        let h = mean_half_desk();
        let e0 = TabulatedEVariable::constant(0.5, 3);
        let m = maximal_majorizer(&e0, &h).unwrap();
        let want = [1.5, 1.0, 0.5];
        for (got, want) in m.values.iter().zip(want) {
            assert!((got - want).abs() < 1e-9, "got {:?}", m.values);
        }
        let lam = m.lambda.expect("maximal element lies in the dual class");
        assert!((lam.lam_tight()[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn majorizer_fixes_constant_one() {
        let h = mean_half_desk();
        let e0 = TabulatedEVariable::constant(1.0, 3);
        let m = maximal_majorizer(&e0, &h).unwrap();
        for v in &m.values {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn majorizer_from_zero() {
        let h = mean_half_desk();
        let e0 = TabulatedEVariable::constant(0.0, 3);
        let m = maximal_majorizer(&e0, &h).unwrap();
        let want = [2.0, 1.0, 0.0];
        for (got, want) in m.values.iter().zip(want) {
            assert!((got - want).abs() < 1e-9, "got {:?}", m.values);
        }
        let lam = m.lambda.expect("in dual class");
        assert!((lam.lam_tight()[0] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn majorizer_rejects_non_evariables() {
        let h = mean_half_desk();
        let e0 = TabulatedEVariable::constant(1.5, 3);
        assert!(matches!(
            maximal_majorizer(&e0, &h),
            Err(DualError::NotAnEVariable(_))
        ));
    }

    // -- verify_in_dual_class --

    #[test]
    fn exact_span_members_fit_with_zero_residual() {
        let h = mean_half_desk();
        let e = TabulatedEVariable::new(vec![1.5, 1.0, 0.5]);
        let fit = verify_in_dual_class(&e, &h);
        assert!(fit.residual < 1e-12);
        assert!(fit.in_dual_class);
        assert!((fit.lambda.lam_tight()[0] + 1.0).abs() < 1e-9);

        let e = TabulatedEVariable::new(vec![2.0, 1.0, 0.0]);
        let fit = verify_in_dual_class(&e, &h);
        assert!(fit.residual < 1e-12);
        assert!((fit.lambda.lam_tight()[0] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn off_span_variables_are_rejected() {
        let h = mean_half_desk();
        let e = TabulatedEVariable::new(vec![1.0, 0.9, 1.0]);
        let fit = verify_in_dual_class(&e, &h);
        assert!(fit.residual > 0.05, "residual {:.3}", fit.residual);
        assert!(!fit.in_dual_class);
    }

    // -- expectation-one identity --

    #[test]
    fn dual_evariables_have_unit_expectation_under_witnesses() {
        let h = mean_half_desk();
        let w = h.matching_witness(&[0, 1, 2]).unwrap();
        for lam_val in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let lam = LambdaVector::tight_only(vec![lam_val]);
            assert!(lambda_feasible(&lam, &h, 1e-9));
            let expectation: f64 = h
                .grid()
                .points()
                .iter()
                .zip(w.as_slice())
                .map(|(x, &wi)| wi * evaluate_e(&lam, &h, x))
                .sum();
            assert!((expectation - 1.0).abs() < 1e-9);
        }
    }

    // -- ellipse projection --

    #[test]
    fn projection_fixes_interior_points() {
        let (a, b) = project_onto_heavy_tail_ellipse(0.0, 0.1, 0.3);
        assert_eq!((a, b), (0.1, 0.3));
    }

    #[test]
    fn projection_lands_on_boundary() {
        for &mu in &[-0.5, 0.0, 0.5] {
            for &(a0, b0) in &[(2.0, 0.0), (0.0, 2.0), (-1.5, 1.5), (3.0, 3.0)] {
                let (a, b) = project_onto_heavy_tail_ellipse(mu, a0, b0);
                let g = heavy_tail_ellipse_value(a, b, mu);
                assert!(g <= 1e-7, "projection not feasible: g = {g:.3e}");
                // The projection moves no farther than the origin does.
                let d_proj = ((a - a0).powi(2) + (b - b0).powi(2)).sqrt();
                let d_zero = (a0 * a0 + b0 * b0).sqrt();
                assert!(d_proj <= d_zero + 1e-9);
            }
        }
    }

    // -- properties --

    proptest! {
        /// The feasibility region is convex: mixtures of feasible lambdas are
        /// feasible.
        #[test]
        fn lambda_region_is_convex(
            l1 in -2.0f64..2.0,
            l2 in -2.0f64..2.0,
            t in 0.0f64..1.0,
        ) {
            let h = mean_half_unit();
            let a = LambdaVector::tight_only(vec![l1]);
            let b = LambdaVector::tight_only(vec![l2]);
            if lambda_feasible(&a, &h, 1e-9) && lambda_feasible(&b, &h, 1e-9) {
                let mid = a.mix(&b, t);
                prop_assert!(lambda_feasible(&mid, &h, 1e-9));
            }
        }

        /// Majorizer output majorizes the input, survives coordinate
        /// re-solves, and fits in the dual class.
        #[test]
        fn majorizer_is_maximal_on_random_inputs(
            raw in proptest::collection::vec(0.0f64..1.0, 3),
            scale in 0.1f64..1.0,
        ) {
            let h = mean_half_desk();
            let vertices = enumerate_vertices(&h);
            let mut e0 = raw;
            let worst = vertices
                .iter()
                .map(|v| dot(v.as_slice(), &e0))
                .fold(0.0f64, f64::max);
            if worst > 0.0 {
                for v in e0.iter_mut() {
                    *v *= scale / worst;
                }
            }
            let e0 = TabulatedEVariable::new(e0);
            let m = maximal_majorizer(&e0, &h).unwrap();
            for (a, b) in m.values.iter().zip(&e0.values) {
                prop_assert!(a + 1e-9 >= *b);
            }
            for i in 0..3 {
                let resolved = coordinate_resolve(&m, &h, i);
                prop_assert!((resolved - m.values[i]).abs() <= 1e-9);
            }
            let fit = verify_in_dual_class(&m, &h);
            prop_assert!(fit.residual <= 1e-8);
        }

        /// Ellipse projection output is always feasible.
        #[test]
        fn ellipse_projection_feasible(
            mu in -0.9f64..0.9,
            a in -10.0f64..10.0,
            b in -2.0f64..10.0,
        ) {
            let (pa, pb) = project_onto_heavy_tail_ellipse(mu, a, b);
            prop_assert!(heavy_tail_ellipse_value(pa, pb, mu) <= 1e-6);
            prop_assert!(pb >= 0.0);
        }
    }
}
