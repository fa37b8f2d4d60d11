//! Sample grids, constrained hypotheses, and their classification.
//!
//! A hypothesis here is the set of probability measures `P` on a sample grid
//! satisfying `E_P[tight] = 0` componentwise, and `E_P[slack] >= 0` when
//! slack components are present. The classification follows from where the
//! origin sits relative to the convex hull of the tabulated constraint image:
//!
//! * `Proper` — origin in the relative interior (tight only): mass can be put
//!   on every grid point, and the dual e-class is optimal;
//! * `FinitelyNonProper` — origin on the relative boundary (tight only): the
//!   hypothesis lives on a strict subset of the grid, recovered by
//!   [`Hypothesis::support_restriction`];
//! * `LooseProper` / `LooseNonProper` — the same dichotomy for the joint
//!   (tight, slack) image when slack components are present.
//!
//! Continuous sample spaces are represented by grids plus closed forms: the
//! grid is the computable stand-in, and where an exact feasibility set is
//! known (unit-interval mean box, heavy-tail ellipse) the closed form
//! registered on the hypothesis overrides grid checks.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Tolerances, DEFAULT_TRUNCATION};
use crate::expr::{Expr, ExprError};
use crate::geometry::{
    independent_rows, solve_lp_with, zero_in_relint_with, LpProblem, LpSolution, PointCloud,
    RelintLocation,
};

#[derive(Debug, Error)]
pub enum HypothesisError {
    #[error("empty hypothesis: the origin lies outside the convex hull of the constraint image")]
    EmptyHypothesis,
    #[error("no witness: the matching LP cannot keep all required weights positive")]
    NoWitness,
    #[error("grid error: {0}")]
    Grid(String),
    #[error("constraint expression error: {0}")]
    Expr(#[from] ExprError),
    #[error("closed form does not match the tabulated constraint: {0}")]
    ClosedFormMismatch(String),
    #[error("invalid probability weights: {0}")]
    InvalidWeights(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

// ---------------------------------------------------------------------------
// Sample grids
// ---------------------------------------------------------------------------

/// Metadata present when the grid discretizes a continuous set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Continuum {
    /// Grid spacing `h > 0`; observations within `h/2` of a grid point count
    /// as on-grid.
    pub spacing: f64,
    /// Truncation radius when the underlying space is unbounded.
    pub truncation: Option<f64>,
}

/// Finite ordered list of distinct points in `R^n`, optionally standing in
/// for a continuum.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    points: Vec<Vec<f64>>,
    dim: usize,
    continuum: Option<Continuum>,
}

impl SampleGrid {
    pub fn explicit(points: Vec<Vec<f64>>) -> Result<Self, HypothesisError> {
        Self::build(points, None)
    }

    pub fn explicit_scalar(values: &[f64]) -> Result<Self, HypothesisError> {
        Self::explicit(values.iter().map(|&v| vec![v]).collect())
    }

    /// Uniform one-dimensional grid over `[start, end]` with the given step.
    pub fn interval(start: f64, end: f64, step: f64) -> Result<Self, HypothesisError> {
        Self::interval_impl(start, end, step, None)
    }

    /// Uniform grid over `[-radius, radius]` standing in for an unbounded
    /// one-dimensional space.
    pub fn truncated_line(radius: f64, step: f64) -> Result<Self, HypothesisError> {
        Self::interval_impl(-radius, radius, step, Some(radius))
    }

    fn interval_impl(
        start: f64,
        end: f64,
        step: f64,
        truncation: Option<f64>,
    ) -> Result<Self, HypothesisError> {
        if !(step > 0.0) || !(end > start) {
            return Err(HypothesisError::Grid(format!(
                "interval grid needs end > start and step > 0, got [{start}, {end}] step {step}"
            )));
        }
        let count = ((end - start) / step).round() as usize;
        if count == 0 {
            return Err(HypothesisError::Grid(
                "interval grid must contain at least two points".into(),
            ));
        }
        let mut points = Vec::with_capacity(count + 1);
        for i in 0..=count {
            let x = if i == count { end } else { start + i as f64 * step };
            points.push(vec![x]);
        }
        Self::build(
            points,
            Some(Continuum {
                spacing: step,
                truncation,
            }),
        )
    }

    fn build(
        points: Vec<Vec<f64>>,
        continuum: Option<Continuum>,
    ) -> Result<Self, HypothesisError> {
        if points.is_empty() {
            return Err(HypothesisError::Grid("grid must be non-empty".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(HypothesisError::Grid(
                "grid points must have dimension at least one".into(),
            ));
        }
        for p in &points {
            if p.len() != dim {
                return Err(HypothesisError::Grid(
                    "all grid points must share one dimension".into(),
                ));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(HypothesisError::Grid("grid points must be finite".into()));
            }
        }
        // Distinctness: sort an index permutation lexicographically and look
        // at neighbours.
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points[a]
                .iter()
                .zip(&points[b])
                .find_map(|(x, y)| {
                    let c = x.total_cmp(y);
                    (c != std::cmp::Ordering::Equal).then_some(c)
                })
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in order.windows(2) {
            if points[w[0]] == points[w[1]] {
                return Err(HypothesisError::Grid(format!(
                    "grid points must be distinct; {:?} appears twice",
                    points[w[0]]
                )));
            }
        }
        Ok(Self {
            points,
            dim,
            continuum,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn continuum(&self) -> Option<&Continuum> {
        self.continuum.as_ref()
    }

    /// Distance within which an observation counts as lying on the grid:
    /// half the spacing for continuum grids, exact for explicit grids.
    pub fn snap_tolerance(&self) -> f64 {
        match &self.continuum {
            Some(c) => c.spacing / 2.0,
            None => 0.0,
        }
    }

    /// Index of the grid point nearest to `x` (sup-norm), with the distance.
    /// Uniform one-dimensional grids are answered in O(1).
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        assert_eq!(x.len(), self.dim, "observation dimension mismatch");
        if self.dim == 1 {
            if let Some(c) = &self.continuum {
                let start = self.points[0][0];
                let idx = ((x[0] - start) / c.spacing).round();
                let idx = (idx.max(0.0) as usize).min(self.points.len() - 1);
                // The rounded slot or one of its neighbours is nearest.
                let mut best = (idx, (self.points[idx][0] - x[0]).abs());
                for j in [idx.saturating_sub(1), (idx + 1).min(self.points.len() - 1)] {
                    let d = (self.points[j][0] - x[0]).abs();
                    if d < best.1 {
                        best = (j, d);
                    }
                }
                return best;
            }
        }
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = p
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Sub-grid keeping the given indices, preserving continuum metadata.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, HypothesisError> {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        Self::build(points, self.continuum)
    }
}

// ---------------------------------------------------------------------------
// Constraints
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum ConstraintMaps {
    /// Evaluable anywhere via parsed expressions.
    Exprs { tight: Vec<Expr>, slack: Vec<Expr> },
    /// Defined only on the grid (used by oracle-scale tests that work with
    /// raw tabulations).
    TabulationOnly,
}

/// A tight/slack constraint pair together with its tabulation on a grid.
///
/// Rows of the tabulation correspond to grid points; the first `m_tight`
/// columns are the tight components, the rest the slack ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    maps: ConstraintMaps,
    m_tight: usize,
    m_slack: usize,
    tab: Vec<Vec<f64>>,
}

impl ConstraintSpec {
    pub fn from_exprs(
        tight: Vec<Expr>,
        slack: Vec<Expr>,
        grid: &SampleGrid,
    ) -> Result<Self, HypothesisError> {
        for e in tight.iter().chain(&slack) {
            if e.dimension() > grid.dim() {
                return Err(HypothesisError::Grid(format!(
                    "expression {e} references a variable beyond the grid dimension {}",
                    grid.dim()
                )));
            }
        }
        let m_tight = tight.len();
        let m_slack = slack.len();
        let tab = grid
            .points()
            .iter()
            .map(|x| {
                tight
                    .iter()
                    .chain(&slack)
                    .map(|e| e.eval(x))
                    .collect::<Vec<f64>>()
            })
            .collect();
        Ok(Self {
            maps: ConstraintMaps::Exprs { tight, slack },
            m_tight,
            m_slack,
            tab,
        })
    }

    /// Builds a grid-only constraint from a raw tabulation (rows = grid
    /// points). The first `m_tight` columns are tight, the rest slack.
    pub fn from_tabulation(tab: Vec<Vec<f64>>, m_tight: usize, grid: &SampleGrid) -> Self {
        assert_eq!(tab.len(), grid.len(), "tabulation rows must match the grid");
        let cols = tab.first().map_or(m_tight, Vec::len);
        assert!(m_tight <= cols, "m_tight exceeds tabulation width");
        for row in &tab {
            assert_eq!(row.len(), cols, "ragged tabulation");
        }
        Self {
            maps: ConstraintMaps::TabulationOnly,
            m_tight,
            m_slack: cols - m_tight,
            tab,
        }
    }

    pub fn m_tight(&self) -> usize {
        self.m_tight
    }

    pub fn m_slack(&self) -> usize {
        self.m_slack
    }

    pub fn m_total(&self) -> usize {
        self.m_tight + self.m_slack
    }

    pub fn tabulation(&self) -> &[Vec<f64>] {
        &self.tab
    }

    pub fn tab_row(&self, i: usize) -> &[f64] {
        &self.tab[i]
    }

    /// True when the constraint can be evaluated off the grid.
    pub fn has_exprs(&self) -> bool {
        matches!(self.maps, ConstraintMaps::Exprs { .. })
    }

    pub fn tight_exprs(&self) -> Option<&[Expr]> {
        match &self.maps {
            ConstraintMaps::Exprs { tight, .. } => Some(tight),
            ConstraintMaps::TabulationOnly => None,
        }
    }

    /// Evaluates the joint (tight, slack) vector at a point. Grid-only
    /// constraints require `x` to match a grid point exactly.
    pub fn eval(&self, grid: &SampleGrid, x: &[f64]) -> Vec<f64> {
        match &self.maps {
            ConstraintMaps::Exprs { tight, slack } => {
                tight.iter().chain(slack).map(|e| e.eval(x)).collect()
            }
            ConstraintMaps::TabulationOnly => {
                let (idx, dist) = grid.nearest(x);
                assert!(
                    dist <= grid.snap_tolerance().max(1e-12),
                    "grid-only constraint evaluated at off-grid point {x:?}"
                );
                self.tab[idx].clone()
            }
        }
    }

    /// Keeps a subset of the tight columns (used by minimal reduction).
    fn select_tight(&self, keep: &[usize]) -> Self {
        assert_eq!(self.m_slack, 0, "minimal reduction applies to tight-only constraints");
        let maps = match &self.maps {
            ConstraintMaps::Exprs { tight, .. } => ConstraintMaps::Exprs {
                tight: keep.iter().map(|&j| tight[j].clone()).collect(),
                slack: Vec::new(),
            },
            ConstraintMaps::TabulationOnly => ConstraintMaps::TabulationOnly,
        };
        let tab = self
            .tab
            .iter()
            .map(|row| keep.iter().map(|&j| row[j]).collect())
            .collect();
        Self {
            maps,
            m_tight: keep.len(),
            m_slack: 0,
            tab,
        }
    }

    /// Restriction of the tabulation to a subset of grid rows.
    fn select_rows(&self, keep: &[usize]) -> Self {
        Self {
            maps: self.maps.clone(),
            m_tight: self.m_tight,
            m_slack: self.m_slack,
            tab: keep.iter().map(|&i| self.tab[i].clone()).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Proper,
    FinitelyNonProper,
    LooseProper,
    LooseNonProper,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::Proper => "proper",
            Classification::FinitelyNonProper => "finitely_non_proper",
            Classification::LooseProper => "loose_proper",
            Classification::LooseNonProper => "loose_non_proper",
        };
        f.write_str(s)
    }
}

/// Classifies a constraint on a grid from where the origin sits relative to
/// the convex hull of the (joint) tabulated image.
pub fn classify(
    constraint: &ConstraintSpec,
    grid: &SampleGrid,
    tol: &Tolerances,
) -> Result<Classification, HypothesisError> {
    assert_eq!(
        constraint.tabulation().len(),
        grid.len(),
        "tabulation must cover the grid"
    );
    if constraint.m_total() == 0 {
        // No constraints at all: the hypothesis is the whole simplex.
        return Ok(Classification::Proper);
    }
    let cloud = PointCloud::new(constraint.tabulation().to_vec());
    let location = zero_in_relint_with(&cloud, tol);
    if constraint.m_slack() == 0 {
        match location {
            RelintLocation::Interior { .. } => Ok(Classification::Proper),
            RelintLocation::Boundary => Ok(Classification::FinitelyNonProper),
            RelintLocation::Outside => Err(HypothesisError::EmptyHypothesis),
        }
    } else {
        match location {
            RelintLocation::Interior { .. } => Ok(Classification::LooseProper),
            RelintLocation::Boundary => Ok(Classification::LooseNonProper),
            RelintLocation::Outside => Err(HypothesisError::EmptyHypothesis),
        }
    }
}

// ---------------------------------------------------------------------------
// Probability weights
// ---------------------------------------------------------------------------

/// Non-negative weights over grid points summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbWeights {
    weights: Vec<f64>,
}

impl ProbWeights {
    /// Accepts LP output: clips feasibility-level negative dust to zero and
    /// renormalizes so the sum is one to machine precision.
    pub fn new(raw: Vec<f64>) -> Result<Self, HypothesisError> {
        let mut weights = raw;
        for w in weights.iter_mut() {
            if *w < 0.0 {
                if *w < -1e-9 {
                    return Err(HypothesisError::InvalidWeights(format!(
                        "negative weight {w}"
                    )));
                }
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(HypothesisError::InvalidWeights(
                "weights sum to zero".into(),
            ));
        }
        for w in weights.iter_mut() {
            *w /= sum;
        }
        Ok(Self { weights })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// Exact feasibility sets known in closed form for specific hypothesis
/// families. When registered, these override grid checks: the grid only
/// approximates suprema over continua, while the closed form is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    None,
    /// Mean-`mu` hypothesis on `[0,1]` with tight constraint `mu - x`; the
    /// feasible lambda interval is `[1/(mu-1), 1/mu]`.
    UnitIntervalMean { mu: f64 },
    /// Mean-`mu`, unit-second-moment hypothesis on the real line with tight
    /// `mu - x` and slack `1 - x^2`; the feasible set is the ellipse
    /// `alpha^2 + 4 mu alpha beta + 4 beta^2 - 4 beta <= 0`.
    HeavyTailMean { mu: f64 },
}

// ---------------------------------------------------------------------------
// Hypothesis
// ---------------------------------------------------------------------------

/// Restriction of a hypothesis to the support set `X0` (the union of the
/// supports of its members, computed grid point by grid point).
#[derive(Debug, Clone)]
pub struct SupportRestriction {
    /// Grid indices kept in `X0`, in ascending order.
    pub kept_indices: Vec<usize>,
    /// The hypothesis restricted to `X0`; classifies as proper.
    pub restricted: Hypothesis,
}

/// A constraint spec on a grid together with its classification.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    grid: SampleGrid,
    constraint: ConstraintSpec,
    classification: Classification,
    closed_form: ClosedForm,
    tolerances: Tolerances,
}

impl Hypothesis {
    pub fn new(
        grid: SampleGrid,
        constraint: ConstraintSpec,
        closed_form: ClosedForm,
        tolerances: Tolerances,
    ) -> Result<Self, HypothesisError> {
        if constraint.tabulation().len() != grid.len() {
            return Err(HypothesisError::Grid(
                "tabulation rows must match the grid length".into(),
            ));
        }
        validate_closed_form(&closed_form, &constraint, &grid)?;
        let classification = classify(&constraint, &grid, &tolerances)?;
        Ok(Self {
            grid,
            constraint,
            classification,
            closed_form,
            tolerances,
        })
    }

    /// Mean-`mu` hypothesis on `[0,1]`, discretized at `step`, with the
    /// closed-form lambda interval registered.
    pub fn bounded_mean(mu: f64, step: f64) -> Result<Self, HypothesisError> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(HypothesisError::Grid(format!(
                "bounded mean requires mu in (0,1), got {mu}"
            )));
        }
        let grid = SampleGrid::interval(0.0, 1.0, step)?;
        let constraint =
            ConstraintSpec::from_exprs(vec![Expr::mean_constraint(mu)], Vec::new(), &grid)?;
        Self::new(
            grid,
            constraint,
            ClosedForm::UnitIntervalMean { mu },
            Tolerances::default(),
        )
    }

    /// Mean-`mu`, unit-second-moment hypothesis on the real line, discretized
    /// on `[-radius, radius]` at `step`, with the closed-form ellipse
    /// registered.
    pub fn heavy_tail_mean(mu: f64, step: f64, radius: f64) -> Result<Self, HypothesisError> {
        if !(mu > -1.0 && mu < 1.0) {
            return Err(HypothesisError::Grid(format!(
                "heavy-tail mean requires mu in (-1,1), got {mu}"
            )));
        }
        let grid = SampleGrid::truncated_line(radius, step)?;
        let constraint = ConstraintSpec::from_exprs(
            vec![Expr::mean_constraint(mu)],
            vec![Expr::unit_second_moment_slack()],
            &grid,
        )?;
        Self::new(
            grid,
            constraint,
            ClosedForm::HeavyTailMean { mu },
            Tolerances::default(),
        )
    }

    /// Heavy-tail hypothesis with the default truncation radius and a coarse
    /// tabulation; the closed form carries the exact semantics.
    pub fn heavy_tail_mean_default(mu: f64) -> Result<Self, HypothesisError> {
        Self::heavy_tail_mean(mu, 0.1, DEFAULT_TRUNCATION)
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn constraint(&self) -> &ConstraintSpec {
        &self.constraint
    }

    pub fn classification(&self) -> Classification {
        self.classification
    }

    pub fn closed_form(&self) -> &ClosedForm {
        &self.closed_form
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    /// Joint constraint value at an observation (off-grid points allowed for
    /// expression-backed constraints).
    pub fn constraint_at(&self, x: &[f64]) -> Vec<f64> {
        self.constraint.eval(&self.grid, x)
    }

    /// Reduces a proper tight constraint to a minimal one by keeping a
    /// maximal linearly independent subset of components. The selected
    /// components span the same function space, so the hypothesis is
    /// unchanged.
    pub fn reduce_to_minimal(&self) -> ConstraintSpec {
        assert_eq!(
            self.classification,
            Classification::Proper,
            "minimal reduction requires a proper classification"
        );
        assert_eq!(self.constraint.m_slack(), 0, "minimal reduction requires m'' = 0");
        let d = self.grid.len();
        let m = self.constraint.m_tight();
        // Columns as vectors over the grid.
        let columns: Vec<Vec<f64>> = (0..m)
            .map(|j| (0..d).map(|i| self.constraint.tab_row(i)[j]).collect())
            .collect();
        let keep = independent_rows(&columns, &self.tolerances);
        self.constraint.select_tight(&keep)
    }

    /// Computes `X0`, the union of supports of hypothesis members, and the
    /// restriction to it. A grid point is kept when some member puts mass on
    /// it, i.e. the LP `max w_x` over the hypothesis has a positive optimum.
    pub fn support_restriction(&self) -> Result<SupportRestriction, HypothesisError> {
        assert!(
            matches!(
                self.classification,
                Classification::Proper | Classification::FinitelyNonProper
            ),
            "support restriction applies to tight-only hypotheses"
        );
        let d = self.grid.len();
        let mut kept = Vec::new();
        for i in 0..d {
            match self.max_weight_at(i)? {
                w if w > self.tolerances.rank => kept.push(i),
                _ => {}
            }
        }
        if kept.is_empty() {
            return Err(HypothesisError::EmptyHypothesis);
        }
        let subgrid = self.grid.subset(&kept)?;
        let subconstraint = self.constraint.select_rows(&kept);
        let restricted = Hypothesis::new(
            subgrid,
            subconstraint,
            ClosedForm::None,
            self.tolerances,
        )?;
        debug_assert_eq!(restricted.classification(), Classification::Proper);
        Ok(SupportRestriction {
            kept_indices: kept,
            restricted,
        })
    }

    /// A member of the hypothesis putting strictly positive mass on every
    /// required grid index, found by maximizing the smallest required weight.
    pub fn matching_witness(&self, required: &[usize]) -> Result<ProbWeights, HypothesisError> {
        let d = self.grid.len();
        for &i in required {
            assert!(i < d, "required index {i} out of range");
        }
        // Variables: w_0..w_{d-1}, t. Maximize t subject to membership and
        // w_i >= t for required i.
        let mut objective = vec![0.0; d + 1];
        objective[d] = 1.0;
        let mut problem = LpProblem::maximize(objective);
        problem = self.add_membership_rows(problem, d + 1);
        for &i in required {
            let mut row = vec![0.0; d + 1];
            row[i] = -1.0;
            row[d] = 1.0;
            problem = problem.le_row(row, 0.0); // t - w_i <= 0
        }
        match solve_lp_with(&problem, &self.tolerances) {
            LpSolution::Optimal { value, mut x } => {
                if !required.is_empty() && value <= self.tolerances.rank {
                    return Err(HypothesisError::NoWitness);
                }
                x.truncate(d);
                ProbWeights::new(x)
            }
            LpSolution::Infeasible => Err(HypothesisError::NoWitness),
            LpSolution::Unbounded => unreachable!("witness LP is bounded by t <= 1"),
        }
    }

    /// `1 / sup_P P({x_i})`: an upper bound satisfied by every e-variable at
    /// the grid point. Finite for proper hypotheses.
    pub fn e_upper_bound(&self, index: usize) -> Result<f64, HypothesisError> {
        let w = self.max_weight_at(index)?;
        if w <= self.tolerances.rank {
            return Ok(f64::INFINITY);
        }
        Ok(1.0 / w)
    }

    /// LP `max w_index` over the hypothesis.
    fn max_weight_at(&self, index: usize) -> Result<f64, HypothesisError> {
        let d = self.grid.len();
        let mut objective = vec![0.0; d];
        objective[index] = 1.0;
        let mut problem = LpProblem::maximize(objective);
        problem = self.add_membership_rows(problem, d);
        match solve_lp_with(&problem, &self.tolerances) {
            LpSolution::Optimal { value, .. } => Ok(value),
            LpSolution::Infeasible => Err(HypothesisError::EmptyHypothesis),
            LpSolution::Unbounded => unreachable!("weights are bounded by one"),
        }
    }

    /// Appends the hypothesis-membership rows for weight variables occupying
    /// the first `grid.len()` columns of an LP with `width` columns total:
    /// `sum w = 1`, tight rows as equalities, slack rows as `>= 0`.
    fn add_membership_rows(&self, mut problem: LpProblem, width: usize) -> LpProblem {
        let d = self.grid.len();
        for k in 0..self.constraint.m_tight() {
            let mut row = vec![0.0; width];
            for i in 0..d {
                row[i] = self.constraint.tab_row(i)[k];
            }
            problem = problem.eq_row(row, 0.0);
        }
        for k in 0..self.constraint.m_slack() {
            let mut row = vec![0.0; width];
            for i in 0..d {
                // sum w * slack >= 0  <=>  -(sum w * slack) <= 0
                row[i] = -self.constraint.tab_row(i)[self.constraint.m_tight() + k];
            }
            problem = problem.le_row(row, 0.0);
        }
        let mut ones = vec![0.0; width];
        for slot in ones.iter_mut().take(d) {
            *slot = 1.0;
        }
        problem.eq_row(ones, 1.0)
    }
}

fn validate_closed_form(
    closed_form: &ClosedForm,
    constraint: &ConstraintSpec,
    grid: &SampleGrid,
) -> Result<(), HypothesisError> {
    let check_tab = |expect: &dyn Fn(&[f64]) -> Vec<f64>| -> Result<(), HypothesisError> {
        for (p, row) in grid.points().iter().zip(constraint.tabulation()) {
            let want = expect(p);
            if row.len() != want.len()
                || row
                    .iter()
                    .zip(&want)
                    .any(|(a, b)| (a - b).abs() > 1e-9)
            {
                return Err(HypothesisError::ClosedFormMismatch(format!(
                    "at grid point {p:?}: tabulated {row:?}, closed form expects {want:?}"
                )));
            }
        }
        Ok(())
    };
    match closed_form {
        ClosedForm::None => Ok(()),
        ClosedForm::UnitIntervalMean { mu } => {
            if grid.dim() != 1 || constraint.m_tight() != 1 || constraint.m_slack() != 0 {
                return Err(HypothesisError::ClosedFormMismatch(
                    "unit-interval mean needs a scalar grid and a single tight component".into(),
                ));
            }
            if grid
                .points()
                .iter()
                .any(|p| p[0] < -1e-12 || p[0] > 1.0 + 1e-12)
            {
                return Err(HypothesisError::ClosedFormMismatch(
                    "unit-interval mean needs a grid inside [0,1]".into(),
                ));
            }
            let mu = *mu;
            check_tab(&move |p: &[f64]| vec![mu - p[0]])
        }
        ClosedForm::HeavyTailMean { mu } => {
            if grid.dim() != 1 || constraint.m_tight() != 1 || constraint.m_slack() != 1 {
                return Err(HypothesisError::ClosedFormMismatch(
                    "heavy-tail mean needs a scalar grid, one tight and one slack component"
                        .into(),
                ));
            }
            let mu = *mu;
            check_tab(&move |p: &[f64]| vec![mu - p[0], 1.0 - p[0] * p[0]])
        }
    }
}

// ---------------------------------------------------------------------------
// Hypothesis definition files
// ---------------------------------------------------------------------------

/// On-disk grid description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Explicit {
        points: Vec<Vec<f64>>,
    },
    Interval {
        start: f64,
        end: f64,
        step: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClosedFormSpec {
    UnitIntervalMean { mu: f64 },
    HeavyTailMean { mu: f64 },
}

/// JSON schema of a hypothesis definition file: a grid, tight constraint
/// expressions, optional slack expressions, and an optional closed form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisFile {
    pub grid: GridSpec,
    pub tight: Vec<String>,
    #[serde(default)]
    pub slack: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedFormSpec>,
}

impl HypothesisFile {
    pub fn into_hypothesis(self, tolerances: Tolerances) -> Result<Hypothesis, HypothesisError> {
        let grid = match self.grid {
            GridSpec::Explicit { points } => SampleGrid::explicit(points)?,
            GridSpec::Interval {
                start,
                end,
                step,
                truncation,
            } => SampleGrid::interval_impl(start, end, step, truncation)?,
        };
        let tight = self
            .tight
            .iter()
            .map(|s| Expr::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        let slack = self
            .slack
            .iter()
            .map(|s| Expr::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        let constraint = ConstraintSpec::from_exprs(tight, slack, &grid)?;
        let closed_form = match self.closed_form {
            None => ClosedForm::None,
            Some(ClosedFormSpec::UnitIntervalMean { mu }) => ClosedForm::UnitIntervalMean { mu },
            Some(ClosedFormSpec::HeavyTailMean { mu }) => ClosedForm::HeavyTailMean { mu },
        };
        Hypothesis::new(grid, constraint, closed_form, tolerances)
    }
}

impl Hypothesis {
    pub fn from_json_str(json: &str, tolerances: Tolerances) -> Result<Self, HypothesisError> {
        let file: HypothesisFile = serde_json::from_str(json)?;
        file.into_hypothesis(tolerances)
    }

    pub fn from_file(path: &Path, tolerances: Tolerances) -> Result<Self, HypothesisError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, tolerances)
    }
}
