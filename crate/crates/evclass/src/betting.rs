//! Betting strategies: how the player picks `lambda_t` from the feasible set
//! each round, using only past observations.
//!
//! Four families cover the verification needs:
//!
//! * `constant` — always `lambda = 0` (the do-nothing baseline, `E == 1`);
//! * `fixed` — a single feasible `lambda` for every round;
//! * `grid_mixture` — a finite portfolio of feasible `lambda`s, combined by
//!   current wealth. Because `E` is affine in `lambda` and the feasible set
//!   is convex, the wealth-weighted average `lambda` reproduces the mixture
//!   martingale exactly;
//! * `ftl` — follow the leader: maximize the hindsight log-wealth
//!   `sum_{s<t} log E_lambda(x_s)` by projected gradient ascent with a fixed
//!   budget (200 iterations, step `0.1/sqrt(k)`), keeping an iterate only
//!   when it improves the objective, so the objective trace is non-decreasing
//!   by construction. Projection uses the closed-form feasible set when one
//!   is registered and alternating halfspace clipping against the grid
//!   supremum otherwise. No regret guarantee is claimed.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{FTL_ITERATIONS, FTL_STEP};
use crate::dual_eclass::{
    evaluate_e, lambda_feasible, lambda_interval_unit, project_onto_heavy_tail_ellipse,
    LambdaVector,
};
use crate::geometry::dot;
use crate::hypothesis::{ClosedForm, Hypothesis};

#[derive(Debug, Error)]
pub enum BettingError {
    #[error("infeasible lambda parameter {0:?} for this hypothesis")]
    InfeasibleLambda(Vec<f64>),
    #[error("invalid strategy spec: {0}")]
    InvalidSpec(String),
}

/// Direction of the extreme bet for [`StrategySpec::FixedEdge`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeDirection {
    /// Bet that observations exceed the candidate mean (`lambda = 1/mu`).
    Up,
    /// Bet that observations fall below it (`lambda = 1/(mu-1)`).
    Down,
}

/// Serializable lambda parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaParam {
    pub lam_tight: Vec<f64>,
    #[serde(default)]
    pub lam_slack: Vec<f64>,
}

impl LambdaParam {
    fn to_lambda(&self) -> Result<LambdaVector, BettingError> {
        if self.lam_slack.iter().any(|&l| l < 0.0) {
            let mut joint = self.lam_tight.clone();
            joint.extend_from_slice(&self.lam_slack);
            return Err(BettingError::InfeasibleLambda(joint));
        }
        Ok(LambdaVector::new(
            self.lam_tight.clone(),
            self.lam_slack.clone(),
        ))
    }
}

/// On-disk strategy description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    Constant,
    Fixed {
        lam_tight: Vec<f64>,
        #[serde(default)]
        lam_slack: Vec<f64>,
    },
    /// A fixed bet at the closed-form interval edge, resolved per hypothesis;
    /// only meaningful for families with a registered one-dimensional
    /// interval (the unit-interval mean box).
    FixedEdge { direction: EdgeDirection },
    GridMixture { lams: Vec<LambdaParam> },
    Ftl,
}

#[derive(Debug, Clone)]
enum StrategyKind {
    Constant,
    Fixed(LambdaVector),
    GridMixture {
        lams: Vec<LambdaVector>,
        log_wealths: Vec<f64>,
    },
    Ftl {
        current: LambdaVector,
        history: Vec<Vec<f64>>,
    },
}

/// Strategy state: everything the player remembers between rounds.
#[derive(Debug, Clone)]
pub struct StrategyState {
    kind: StrategyKind,
    round: usize,
}

impl StrategyState {
    pub fn round(&self) -> usize {
        self.round
    }

    /// Component log-wealths of a mixture strategy; empty otherwise.
    pub fn mixture_log_wealths(&self) -> &[f64] {
        match &self.kind {
            StrategyKind::GridMixture { log_wealths, .. } => log_wealths,
            _ => &[],
        }
    }
}

/// Builds the round-0 state, validating every lambda parameter against the
/// hypothesis's feasible set.
pub fn make_strategy(
    spec: &StrategySpec,
    hypothesis: &Hypothesis,
) -> Result<StrategyState, BettingError> {
    let constraint = hypothesis.constraint();
    let dims = (constraint.m_tight(), constraint.m_slack());
    let feas_tol = hypothesis.tolerances().feasibility;
    let check = |lam: LambdaVector| -> Result<LambdaVector, BettingError> {
        if lam.dims() != dims {
            return Err(BettingError::InvalidSpec(format!(
                "lambda dimensions {:?} do not match the constraint {:?}",
                lam.dims(),
                dims
            )));
        }
        if !lambda_feasible(&lam, hypothesis, feas_tol) {
            return Err(BettingError::InfeasibleLambda(lam.joint()));
        }
        Ok(lam)
    };
    let kind = match spec {
        StrategySpec::Constant => StrategyKind::Constant,
        StrategySpec::Fixed {
            lam_tight,
            lam_slack,
        } => {
            let lam = LambdaParam {
                lam_tight: lam_tight.clone(),
                lam_slack: lam_slack.clone(),
            }
            .to_lambda()?;
            StrategyKind::Fixed(check(lam)?)
        }
        StrategySpec::FixedEdge { direction } => {
            let ClosedForm::UnitIntervalMean { mu } = hypothesis.closed_form() else {
                return Err(BettingError::InvalidSpec(
                    "fixed_edge requires the unit-interval mean closed form".into(),
                ));
            };
            let (lo, hi) = lambda_interval_unit(*mu);
            let lam = match direction {
                EdgeDirection::Up => vec![hi],
                EdgeDirection::Down => vec![lo],
            };
            StrategyKind::Fixed(check(LambdaVector::tight_only(lam))?)
        }
        StrategySpec::GridMixture { lams } => {
            if lams.is_empty() {
                return Err(BettingError::InvalidSpec(
                    "grid_mixture needs at least one lambda".into(),
                ));
            }
            let lams = lams
                .iter()
                .map(|p| p.to_lambda().and_then(&check))
                .collect::<Result<Vec<_>, _>>()?;
            let log_wealths = vec![0.0; lams.len()];
            StrategyKind::GridMixture { lams, log_wealths }
        }
        StrategySpec::Ftl => StrategyKind::Ftl {
            current: LambdaVector::zeros(dims.0, dims.1),
            history: Vec::new(),
        },
    };
    Ok(StrategyState { kind, round: 0 })
}

/// The lambda the strategy plays this round; a pure function of the state,
/// which holds only observations from strictly earlier rounds.
pub fn next_lambda(state: &StrategyState, hypothesis: &Hypothesis) -> LambdaVector {
    let constraint = hypothesis.constraint();
    let dims = (constraint.m_tight(), constraint.m_slack());
    match &state.kind {
        StrategyKind::Constant => LambdaVector::zeros(dims.0, dims.1),
        StrategyKind::Fixed(lam) => lam.clone(),
        StrategyKind::GridMixture { lams, log_wealths } => {
            mixture_lambda(lams, log_wealths, dims)
        }
        StrategyKind::Ftl { current, history } => {
            if history.is_empty() {
                LambdaVector::zeros(dims.0, dims.1)
            } else {
                ftl_argmax(hypothesis, history, current).0
            }
        }
    }
}

/// Folds the observation into the state: mixture wealths are updated with the
/// realized log-rewards of every component, follow-the-leader appends the
/// observation, and the round counter advances.
pub fn update(mut state: StrategyState, hypothesis: &Hypothesis, x: &[f64]) -> StrategyState {
    match &mut state.kind {
        StrategyKind::Constant | StrategyKind::Fixed(_) => {}
        StrategyKind::GridMixture { lams, log_wealths } => {
            for (lam, lw) in lams.iter().zip(log_wealths.iter_mut()) {
                let e = evaluate_e(lam, hypothesis, x).max(0.0);
                *lw += e.ln(); // ln(0) = -inf is absorbing
            }
        }
        StrategyKind::Ftl { history, .. } => {
            history.push(x.to_vec());
        }
    }
    state.round += 1;
    state
}

/// Wealth-weighted average lambda of a mixture. Valid because the feasible
/// set is convex and `E` is affine in `lambda`, so the average's e-variable
/// equals the wealth-weighted average of the component e-variables.
fn mixture_lambda(
    lams: &[LambdaVector],
    log_wealths: &[f64],
    dims: (usize, usize),
) -> LambdaVector {
    let max_lw = log_wealths
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max_lw.is_finite() {
        return LambdaVector::zeros(dims.0, dims.1);
    }
    let weights: Vec<f64> = log_wealths.iter().map(|lw| (lw - max_lw).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut tight = vec![0.0; dims.0];
    let mut slack = vec![0.0; dims.1];
    for (lam, w) in lams.iter().zip(&weights) {
        let w = w / total;
        for (acc, v) in tight.iter_mut().zip(lam.lam_tight()) {
            *acc += w * v;
        }
        for (acc, v) in slack.iter_mut().zip(lam.lam_slack()) {
            *acc += w * v;
        }
    }
    for s in slack.iter_mut() {
        *s = s.max(0.0);
    }
    LambdaVector::new(tight, slack)
}

// ---------------------------------------------------------------------------
// Follow the leader
// ---------------------------------------------------------------------------

/// Hindsight objective and its gradient evaluated over a run-length-encoded
/// history: observations are grouped by their constraint value, so each
/// gradient pass costs O(unique values) instead of O(t).
struct HindsightObjective {
    rows: Vec<(Vec<f64>, f64)>, // (phi value, multiplicity)
}

impl HindsightObjective {
    fn build(hypothesis: &Hypothesis, history: &[Vec<f64>]) -> Self {
        let mut table: HashMap<Vec<u64>, (Vec<f64>, f64)> = HashMap::new();
        for x in history {
            let phi = hypothesis.constraint_at(x);
            let key: Vec<u64> = phi.iter().map(|v| v.to_bits()).collect();
            table
                .entry(key)
                .and_modify(|(_, c)| *c += 1.0)
                .or_insert((phi, 1.0));
        }
        let mut rows: Vec<(Vec<f64>, f64)> = table.into_values().collect();
        // Deterministic iteration order regardless of hash state.
        rows.sort_by(|a, b| {
            a.0.iter()
                .zip(&b.0)
                .find_map(|(x, y)| {
                    let c = x.total_cmp(y);
                    (c != std::cmp::Ordering::Equal).then_some(c)
                })
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Self { rows }
    }

    /// `sum_s log(1 - lambda . phi(x_s))`, or -inf when some term dies.
    fn value(&self, joint: &[f64]) -> f64 {
        let mut total = 0.0;
        for (phi, count) in &self.rows {
            let e = 1.0 - dot(joint, phi);
            if e <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += count * e.ln();
        }
        total
    }

    /// Gradient with respect to the joint lambda vector.
    fn gradient(&self, joint: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; joint.len()];
        for (phi, count) in &self.rows {
            let e = 1.0 - dot(joint, phi);
            let scale = -count / e;
            for (gj, pj) in g.iter_mut().zip(phi) {
                *gj += scale * pj;
            }
        }
        g
    }
}

/// Projects the joint vector onto the feasible set.
fn project(hypothesis: &Hypothesis, joint: &mut [f64]) {
    let m_tight = hypothesis.constraint().m_tight();
    match hypothesis.closed_form() {
        ClosedForm::UnitIntervalMean { mu } => {
            let (lo, hi) = lambda_interval_unit(*mu);
            joint[0] = joint[0].clamp(lo, hi);
        }
        ClosedForm::HeavyTailMean { mu } => {
            let (alpha, beta) = project_onto_heavy_tail_ellipse(*mu, joint[0], joint[1]);
            joint[0] = alpha;
            joint[1] = beta;
        }
        ClosedForm::None => project_by_grid_clipping(hypothesis, joint, m_tight),
    }
}

/// Alternating clipping: clamp slack multipliers non-negative and project
/// onto the most violated grid halfspace `lambda . phi(x) <= 1`, repeating
/// until feasible. Falls back to shrinking toward zero (always feasible) if
/// the sweep stalls.
fn project_by_grid_clipping(hypothesis: &Hypothesis, joint: &mut [f64], m_tight: usize) {
    let tab = hypothesis.constraint().tabulation();
    let clamp_slack = |joint: &mut [f64]| {
        for s in joint[m_tight..].iter_mut() {
            *s = s.max(0.0);
        }
    };
    let worst_row = |joint: &[f64]| -> Option<(usize, f64)> {
        let mut worst: Option<(usize, f64)> = None;
        for (i, row) in tab.iter().enumerate() {
            let v = dot(joint, row);
            if v > 1.0 && worst.map_or(true, |(_, wv)| v > wv) {
                worst = Some((i, v));
            }
        }
        worst
    };
    clamp_slack(joint);
    for _ in 0..100 {
        let Some((i, v)) = worst_row(joint) else {
            return;
        };
        let row = &tab[i];
        let denom = dot(row, row);
        if denom <= 0.0 {
            break;
        }
        let step = (v - 1.0) / denom;
        for (j, r) in joint.iter_mut().zip(row) {
            *j -= step * r;
        }
        clamp_slack(joint);
    }
    if worst_row(joint).is_some() {
        // Shrink toward zero, which is always feasible.
        let original = joint.to_vec();
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            let scaled: Vec<f64> = original.iter().map(|v| v * mid).collect();
            let feasible = tab.iter().all(|row| dot(&scaled, row) <= 1.0);
            if feasible {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for (j, v) in joint.iter_mut().zip(&original) {
            *j = v * lo;
        }
        clamp_slack(joint);
    }
}

/// Projected gradient ascent on the hindsight log-wealth, with the iterate
/// kept only when the objective improves. Returns the final lambda and the
/// objective trace (initial value plus one entry per iteration).
pub fn ftl_argmax(
    hypothesis: &Hypothesis,
    history: &[Vec<f64>],
    start: &LambdaVector,
) -> (LambdaVector, Vec<f64>) {
    let m_tight = hypothesis.constraint().m_tight();
    let objective = HindsightObjective::build(hypothesis, history);
    let mut joint = start.joint();
    project(hypothesis, &mut joint);
    let mut best = objective.value(&joint);
    debug_assert!(best.is_finite(), "start of FTL ascent must be feasible");
    let mut trace = Vec::with_capacity(FTL_ITERATIONS + 1);
    trace.push(best);
    for k in 1..=FTL_ITERATIONS {
        let step = FTL_STEP / (k as f64).sqrt();
        let grad = objective.gradient(&joint);
        let mut candidate: Vec<f64> = joint
            .iter()
            .zip(&grad)
            .map(|(j, g)| j + step * g)
            .collect();
        project(hypothesis, &mut candidate);
        let value = objective.value(&candidate);
        if value > best {
            joint = candidate;
            best = value;
        }
        trace.push(best);
    }
    let (tight, slack) = joint.split_at(m_tight);
    let lam = LambdaVector::new(
        tight.to_vec(),
        slack.iter().map(|&s| s.max(0.0)).collect(),
    );
    (lam, trace)
}
