//! Sequential hypothesis testing by betting with dual e-classes.
//!
//! This crate implements, on finite sample grids, the machinery of testing
//! finitely constrained nonparametric hypotheses with affine e-variables:
//!
//! * [`geometry`] — a deterministic dense simplex (Bland's rule) plus the
//!   convex-hull primitives every higher layer leans on;
//! * [`hypothesis`] — sample grids, tight/slack constraints, classification
//!   (proper / finitely non-proper / loose), support restriction, matching
//!   witnesses;
//! * [`dual_eclass`] — the dual class `1 - lambda . phi`, closed-form
//!   feasibility sets (coin-betting interval, heavy-tail ellipse), vertex
//!   enumeration, and the maximality oracle that certifies optimality of the
//!   dual class at finite scale;
//! * [`betting`] — constant / fixed / wealth-mixture / follow-the-leader
//!   strategies;
//! * [`game`] — the testing loop with the `log(1/delta)` rejection threshold
//!   and automatic rejection outside the support set;
//! * [`meanest`] — anytime-valid confidence sequences for bounded and
//!   heavy-tailed mean estimation;
//! * [`stream`] / [`sim`] — observation sources and seeded Monte Carlo
//!   drivers.

pub mod betting;
pub mod config;
pub mod dual_eclass;
pub mod expr;
pub mod game;
pub mod geometry;
pub mod hypothesis;
pub mod meanest;
pub mod sim;
pub mod stream;

pub use betting::{make_strategy, next_lambda, update, StrategySpec, StrategyState};
pub use config::Tolerances;
pub use dual_eclass::{
    enumerate_vertices, evaluate_e, heavy_tail_feasible, lambda_feasible, lambda_interval_unit,
    maximal_majorizer, verify_in_dual_class, LambdaVector, TabulatedEVariable,
};
pub use expr::Expr;
pub use game::{play_round, run_test, ville_reject, GameState, TestRun, Verdict};
pub use geometry::{
    affine_dimension, caratheodory_weights, independent_rows, solve_lp, zero_in_relint,
    LpProblem, LpSolution, PointCloud, RelintLocation,
};
pub use hypothesis::{
    classify, Classification, ClosedForm, ConstraintSpec, Hypothesis, ProbWeights, SampleGrid,
};
pub use meanest::{
    boundary_set_u, bounded_mean_cs, heavy_tail_cs, BoundarySet, ConfidenceSequence, CsOptions,
    MuGrid,
};
pub use stream::GeneratorSpec;
