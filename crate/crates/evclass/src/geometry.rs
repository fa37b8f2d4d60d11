//! Dense linear programming and finite convex-geometry primitives.
//!
//! Everything here is deliberately small-scale: problems have at most a few
//! hundred variables, so a dense two-phase simplex with Bland's anti-cycling
//! rule (lowest eligible index enters; ties in the ratio test broken by the
//! lowest basic-variable index) is both fast enough and, more importantly,
//! deterministic. Degenerate and redundant systems are handled by driving
//! artificial variables out of the basis and dropping redundant rows.
//!
//! On top of the solver sit the convex-hull utilities used by the hypothesis
//! machinery: convex-combination weights with Carathéodory support bounds,
//! the relative-interior test for the origin, and rank-revealing selection of
//! independent rows.

use crate::config::Tolerances;

/// A dense LP in the form
///
/// ```text
///     maximize    objective . x
///     subject to  eq_mat  x  = eq_rhs
///                 le_mat  x <= le_rhs
///                 x[i] >= lower[i]      (lower[i] may be -inf: free variable)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub eq_mat: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub le_mat: Vec<Vec<f64>>,
    pub le_rhs: Vec<f64>,
    pub lower: Vec<f64>,
}

impl LpProblem {
    /// A problem with the given objective, no constraints yet, and all
    /// variables bounded below by zero.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            eq_mat: Vec::new(),
            eq_rhs: Vec::new(),
            le_mat: Vec::new(),
            le_rhs: Vec::new(),
            lower: vec![0.0; n],
        }
    }

    pub fn eq_row(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        assert_eq!(coeffs.len(), self.objective.len(), "eq row length mismatch");
        self.eq_mat.push(coeffs);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn le_row(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        assert_eq!(coeffs.len(), self.objective.len(), "le row length mismatch");
        self.le_mat.push(coeffs);
        self.le_rhs.push(rhs);
        self
    }

    /// Marks variable `i` as unbounded below.
    pub fn free_var(mut self, i: usize) -> Self {
        self.lower[i] = f64::NEG_INFINITY;
        self
    }

    pub fn with_lower(mut self, lower: Vec<f64>) -> Self {
        assert_eq!(lower.len(), self.objective.len(), "lower bound length mismatch");
        self.lower = lower;
        self
    }

    fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) {
        let n = self.num_vars();
        assert!(n > 0, "LP must have at least one variable");
        assert_eq!(self.eq_mat.len(), self.eq_rhs.len());
        assert_eq!(self.le_mat.len(), self.le_rhs.len());
        assert_eq!(self.lower.len(), n);
        for row in self.eq_mat.iter().chain(self.le_mat.iter()) {
            assert_eq!(row.len(), n, "constraint row length mismatch");
        }
    }
}

/// Outcome of [`solve_lp`]. Infeasible and unbounded are ordinary statuses.
#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpSolution {
    /// Panics unless optimal; convenient for LPs known feasible and bounded.
    pub fn expect_optimal(self, what: &str) -> (f64, Vec<f64>) {
        match self {
            LpSolution::Optimal { value, x } => (value, x),
            other => panic!("{what}: expected optimal LP solution, got {other:?}"),
        }
    }
}

/// Solves with the default tolerances.
pub fn solve_lp(problem: &LpProblem) -> LpSolution {
    solve_lp_with(problem, &Tolerances::default())
}

/// Two-phase dense simplex, Bland's rule throughout.
pub fn solve_lp_with(problem: &LpProblem, tol: &Tolerances) -> LpSolution {
    problem.validate();
    let n = problem.num_vars();

    // Shift variables to u >= 0. Finite lower bound l: x = u + l (one column).
    // Free variable: x = u_plus - u_minus (two columns).
    let mut col_of_var = Vec::with_capacity(n); // (plus column, optional minus column)
    let mut ncols = 0;
    for &l in &problem.lower {
        if l.is_finite() {
            col_of_var.push((ncols, None));
            ncols += 1;
        } else {
            col_of_var.push((ncols, Some(ncols + 1)));
            ncols += 2;
        }
    }
    let n_struct = ncols;
    let m = problem.eq_mat.len() + problem.le_mat.len();
    if m == 0 {
        // No constraints: optimum is at the lower bounds unless some objective
        // coefficient points away from its bound.
        let mut value = 0.0;
        let mut x = vec![0.0; n];
        for i in 0..n {
            let c = problem.objective[i];
            let l = problem.lower[i];
            if c > tol.rank || (c.abs() > tol.rank && !l.is_finite()) {
                return LpSolution::Unbounded;
            }
            x[i] = if l.is_finite() { l } else { 0.0 };
            value += c * x[i];
        }
        return LpSolution::Optimal { value, x };
    }

    // Assemble rows over the shifted variables; slacks for <= rows.
    let n_slack = problem.le_mat.len();
    let total = n_struct + n_slack; // artificials appended later
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    let mut slack_col_of_row: Vec<Option<usize>> = Vec::with_capacity(m);

    let emit = |mat_row: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; total];
        for (i, &a) in mat_row.iter().enumerate() {
            let (cp, cm) = col_of_var[i];
            r[cp] += a;
            if let Some(cm) = cm {
                r[cm] -= a;
            }
        }
        r
    };
    let shift = |mat_row: &[f64], b: f64| -> f64 {
        let mut adj = b;
        for (i, &a) in mat_row.iter().enumerate() {
            if problem.lower[i].is_finite() {
                adj -= a * problem.lower[i];
            }
        }
        adj
    };

    for (row, &b) in problem.eq_mat.iter().zip(&problem.eq_rhs) {
        rows.push(emit(row));
        rhs.push(shift(row, b));
        slack_col_of_row.push(None);
    }
    for (k, (row, &b)) in problem.le_mat.iter().zip(&problem.le_rhs).enumerate() {
        let mut r = emit(row);
        let sc = n_struct + k;
        r[sc] = 1.0;
        rows.push(r);
        rhs.push(shift(row, b));
        slack_col_of_row.push(Some(sc));
    }

    // Normalize rhs >= 0 (flips slack signs where applied).
    for r in 0..m {
        if rhs[r] < 0.0 {
            for a in rows[r].iter_mut() {
                *a = -*a;
            }
            rhs[r] = -rhs[r];
            slack_col_of_row[r] = None; // slack coefficient is now -1
        }
    }

    // Initial basis: slack column where it survived normalization with +1,
    // artificial otherwise.
    let mut tab = Tableau::new(rows, rhs, total);
    let mut basis: Vec<usize> = vec![usize::MAX; m];
    let mut art_cols: Vec<usize> = Vec::new();
    for r in 0..m {
        match slack_col_of_row[r] {
            Some(sc) => basis[r] = sc,
            None => {
                let col = tab.push_artificial(r);
                basis[r] = col;
                art_cols.push(col);
            }
        }
    }
    tab.basis = basis;

    if !art_cols.is_empty() {
        // Phase 1: maximize -(sum of artificials).
        let mut c1 = vec![0.0; tab.ncols];
        for &c in &art_cols {
            c1[c] = -1.0;
        }
        let status = tab.optimize(&c1, tol);
        debug_assert!(!matches!(status, PivotOutcome::Unbounded), "phase 1 is bounded");
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &bv)| bv >= tab.art_start)
            .map(|(r, _)| tab.rhs(r).max(0.0))
            .sum();
        if infeas > tol.feasibility {
            return LpSolution::Infeasible;
        }
        tab.drive_out_artificials(tol);
    }

    // Phase 2 over the true objective on shifted columns.
    let mut c2 = vec![0.0; tab.ncols];
    for i in 0..n {
        let (cp, cm) = col_of_var[i];
        c2[cp] += problem.objective[i];
        if let Some(cm) = cm {
            c2[cm] -= problem.objective[i];
        }
    }
    if let PivotOutcome::Unbounded = tab.optimize(&c2, tol) {
        return LpSolution::Unbounded;
    }

    // Recover x in the original coordinates.
    let u = tab.basic_values(n_struct);
    let mut x = vec![0.0; n];
    for i in 0..n {
        let (cp, cm) = col_of_var[i];
        x[i] = match cm {
            None => u[cp] + problem.lower[i],
            Some(cm) => u[cp] - u[cm],
        };
    }
    let value = problem
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();
    LpSolution::Optimal { value, x }
}

enum PivotOutcome {
    Optimal,
    Unbounded,
}

/// Row-major dense tableau with an explicit basis. Artificial columns are
/// appended on demand; `art_start` marks where they begin so they can be
/// barred from re-entering.
struct Tableau {
    m: usize,
    ncols: usize,
    art_start: usize,
    data: Vec<f64>, // m rows of (ncols + 1); last entry per row is rhs
    basis: Vec<usize>,
}

impl Tableau {
    fn new(rows: Vec<Vec<f64>>, rhs: Vec<f64>, ncols: usize) -> Self {
        let m = rows.len();
        let mut data = Vec::with_capacity(m * (ncols + 1));
        for (row, b) in rows.into_iter().zip(rhs) {
            data.extend_from_slice(&row);
            data.push(b);
        }
        Self {
            m,
            ncols,
            art_start: ncols,
            data,
            basis: Vec::new(),
        }
    }

    #[inline]
    fn stride(&self) -> usize {
        self.ncols + 1
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.stride() + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.stride() + self.ncols]
    }

    fn push_artificial(&mut self, row: usize) -> usize {
        let old_stride = self.stride();
        let col = self.ncols;
        self.ncols += 1;
        let new_stride = self.stride();
        let mut data = Vec::with_capacity(self.m * new_stride);
        for r in 0..self.m {
            let base = r * old_stride;
            data.extend_from_slice(&self.data[base..base + old_stride - 1]);
            data.push(if r == row { 1.0 } else { 0.0 });
            data.push(self.data[base + old_stride - 1]);
        }
        self.data = data;
        col
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let stride = self.stride();
        let p = self.at(r, c);
        let base = r * stride;
        let inv = 1.0 / p;
        for j in 0..stride {
            self.data[base + j] *= inv;
        }
        self.data[base + c] = 1.0;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.at(i, c);
            if f == 0.0 {
                continue;
            }
            let ibase = i * stride;
            for j in 0..stride {
                self.data[ibase + j] -= f * self.data[base + j];
            }
            self.data[ibase + c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Bland's rule simplex over the objective `c` (maximization). Artificial
    /// columns never re-enter.
    fn optimize(&mut self, c: &[f64], tol: &Tolerances) -> PivotOutcome {
        let max_iter = 200 * (self.m + self.ncols) + 10_000;
        for _ in 0..max_iter {
            let reduced = self.reduced_costs(c);
            // Entering: lowest index with strictly positive reduced cost.
            let mut entering = None;
            for (j, &d) in reduced.iter().enumerate() {
                if j >= self.art_start {
                    break;
                }
                if d > tol.rank {
                    entering = Some(j);
                    break;
                }
            }
            let Some(e) = entering else {
                return PivotOutcome::Optimal;
            };
            // Leaving: min ratio; ties by lowest basic-variable index.
            let mut best: Option<(f64, usize, usize)> = None; // (ratio, basic var, row)
            for r in 0..self.m {
                let a = self.at(r, e);
                if a > tol.rank {
                    let ratio = self.rhs(r).max(0.0) / a;
                    let key = (ratio, self.basis[r]);
                    match best {
                        None => best = Some((key.0, key.1, r)),
                        Some((br, bv, _)) if key < (br, bv) => {
                            best = Some((key.0, key.1, r))
                        }
                        _ => {}
                    }
                }
            }
            match best {
                None => return PivotOutcome::Unbounded,
                Some((_, _, r)) => self.pivot(r, e),
            }
        }
        panic!("simplex iteration limit exceeded; Bland's rule should terminate");
    }

    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        // d_j = c_j - sum_r c_basis(r) * T[r][j]
        let mut d = c[..self.ncols].to_vec();
        for r in 0..self.m {
            let cb = c[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let base = r * self.stride();
            for j in 0..self.ncols {
                d[j] -= cb * self.data[base + j];
            }
        }
        d
    }

    /// After phase 1, replaces basic artificials by structural columns where
    /// possible; rows where none is available are redundant and get zeroed.
    fn drive_out_artificials(&mut self, tol: &Tolerances) {
        for r in 0..self.m {
            if self.basis[r] < self.art_start {
                continue;
            }
            // Largest-magnitude eligible pivot, lowest index on ties.
            let mut pick: Option<(f64, usize)> = None;
            for j in 0..self.art_start {
                let a = self.at(r, j).abs();
                if a > tol.rank && pick.map_or(true, |(pa, _)| a > pa) {
                    pick = Some((a, j));
                }
            }
            match pick {
                Some((_, j)) => self.pivot(r, j),
                None => {
                    // Redundant row: clear it so it can never bind.
                    let stride = self.stride();
                    let base = r * stride;
                    for v in &mut self.data[base..base + stride] {
                        *v = 0.0;
                    }
                }
            }
        }
    }

    fn basic_values(&self, n_struct: usize) -> Vec<f64> {
        let mut u = vec![0.0; self.ncols.max(n_struct)];
        for r in 0..self.m {
            let bv = self.basis[r];
            if bv < self.ncols {
                u[bv] = self.rhs(r).max(0.0);
            }
        }
        u.truncate(n_struct.max(self.ncols));
        u
    }
}

/// Finite set of points in R^m, rows are points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        assert!(!points.is_empty(), "point cloud must be non-empty");
        let dim = points[0].len();
        assert!(dim > 0, "points must have dimension at least one");
        for p in &points {
            assert_eq!(p.len(), dim, "all points must share one dimension");
        }
        Self { points, dim }
    }

    pub fn from_scalars(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

/// Convex-combination weights reproducing `target`, when it lies in the hull.
///
/// The returned weights are a basic feasible solution of the membership LP,
/// so at most `dim + 1` of them are strictly positive (the Carathéodory
/// bound). Returns `None` when no convex combination exists.
pub fn caratheodory_weights(cloud: &PointCloud, target: &[f64]) -> Option<Vec<f64>> {
    caratheodory_weights_with(cloud, target, &Tolerances::default())
}

pub fn caratheodory_weights_with(
    cloud: &PointCloud,
    target: &[f64],
    tol: &Tolerances,
) -> Option<Vec<f64>> {
    assert_eq!(target.len(), cloud.dim(), "target dimension mismatch");
    let d = cloud.len();
    let mut problem = LpProblem::maximize(vec![0.0; d]);
    for k in 0..cloud.dim() {
        let coeffs: Vec<f64> = cloud.points().iter().map(|p| p[k]).collect();
        problem = problem.eq_row(coeffs, target[k]);
    }
    problem = problem.eq_row(vec![1.0; d], 1.0);
    match solve_lp_with(&problem, tol) {
        LpSolution::Optimal { x, .. } => Some(x.into_iter().map(|w| w.max(0.0)).collect()),
        LpSolution::Infeasible => None,
        LpSolution::Unbounded => unreachable!("feasibility LP cannot be unbounded"),
    }
}

/// Location of the origin relative to the convex hull of a finite point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelintLocation {
    /// A full-support convex representation of zero exists; `min_weight` is
    /// the best attainable smallest weight.
    Interior { min_weight: f64 },
    /// Zero is in the hull but every representation kills some weight.
    Boundary,
    /// Zero is not in the hull at all.
    Outside,
}

/// Tests `0 in relint(conv(points))` for a finite cloud.
///
/// Solves `max eps  s.t.  sum w_i p_i = 0, sum w_i = 1, w_i >= eps >= 0`
/// after the substitution `w = u + eps`, which leaves only equality rows.
/// For a finite set, a full-support convex representation of the origin is
/// equivalent to relative-interior membership.
pub fn zero_in_relint(cloud: &PointCloud) -> RelintLocation {
    zero_in_relint_with(cloud, &Tolerances::default())
}

pub fn zero_in_relint_with(cloud: &PointCloud, tol: &Tolerances) -> RelintLocation {
    let d = cloud.len();
    // Variables: u_0..u_{d-1}, eps. All bounded below by zero.
    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;
    let mut problem = LpProblem::maximize(objective);
    for k in 0..cloud.dim() {
        let mut coeffs: Vec<f64> = cloud.points().iter().map(|p| p[k]).collect();
        let col_sum: f64 = coeffs.iter().sum();
        coeffs.push(col_sum);
        problem = problem.eq_row(coeffs, 0.0);
    }
    let mut stoch = vec![1.0; d];
    stoch.push(d as f64);
    problem = problem.eq_row(stoch, 1.0);
    match solve_lp_with(&problem, tol) {
        LpSolution::Optimal { value, .. } => {
            if value > tol.rank {
                RelintLocation::Interior { min_weight: value }
            } else {
                RelintLocation::Boundary
            }
        }
        LpSolution::Infeasible => RelintLocation::Outside,
        LpSolution::Unbounded => unreachable!("eps <= 1/d keeps the LP bounded"),
    }
}

/// Indices of a maximal linearly independent subset of the rows, greedily
/// keeping the lowest indices first (modified Gram-Schmidt with the rank
/// threshold as pivot cutoff).
pub fn independent_rows(rows: &[Vec<f64>], tol: &Tolerances) -> Vec<usize> {
    assert!(!rows.is_empty(), "matrix must be non-empty");
    let n = rows[0].len();
    let mut kept = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), n, "row length mismatch");
        let scale = norm2(row).max(1.0);
        let mut v = row.clone();
        for b in &basis {
            let proj = dot(&v, b);
            for (vj, bj) in v.iter_mut().zip(b) {
                *vj -= proj * bj;
            }
        }
        let r = norm2(&v);
        if r > tol.rank * scale {
            for vj in v.iter_mut() {
                *vj /= r;
            }
            basis.push(v);
            kept.push(i);
        }
    }
    kept
}

/// Dimension of the affine hull of the cloud: rank of `{p_i - p_0}`.
pub fn affine_dimension(cloud: &PointCloud, tol: &Tolerances) -> usize {
    if cloud.len() == 1 {
        return 0;
    }
    let p0 = &cloud.points()[0];
    let diffs: Vec<Vec<f64>> = cloud.points()[1..]
        .iter()
        .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
        .collect();
    independent_rows(&diffs, tol).len()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when the matrix is numerically singular.
pub(crate) fn gauss_solve(a: &[Vec<f64>], b: &[f64], tol: &Tolerances) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_abs <= tol.rank {
            return None;
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}
