//! Anytime-valid confidence sequences for the mean.
//!
//! Both families invert a family of testing games over a grid of candidate
//! means: candidate `mu` stays in the confidence set at round `t` while its
//! game's log-wealth has not crossed `log(1/delta)`. Because each game
//! latches its rejection, the sets are nested, and Ville's inequality makes
//! the sequence time-uniformly valid at level `delta`.
//!
//! * Bounded case: observations in `[0,1]`, per-candidate hypothesis
//!   `E[X] = mu` with the coin-betting interval as feasible set. Candidate
//!   means on the boundary of `[0,1]` carry no game: they survive exactly
//!   while every observation sits on that boundary point (the support-set
//!   semantics of a non-proper candidate).
//! * Heavy-tailed case: real observations with `E[X^2] <= 1`, candidates in
//!   `(-1,1)`, e-variables `1 + alpha (x - mu) + beta (x^2 - 1)` constrained
//!   to the feasibility ellipse. The boundary points `+-1` are handled by the
//!   exact all-observations-equal rule `U_t`.
//!
//! Membership is evaluated pointwise on the candidate grid: for adaptive
//! strategies the wealth need not be monotone or convex in `mu`, so there is
//! no closed-form interval to exploit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::betting::StrategySpec;
use crate::game::{run_test, GameError, Verdict};
use crate::hypothesis::{Hypothesis, HypothesisError};

#[derive(Debug, Error)]
pub enum MeanEstError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error("candidate mean {0} lies outside the admissible region {1}")]
    BadCandidate(f64, String),
    #[error("mu grid must be non-empty, finite, and strictly increasing")]
    BadMuGrid,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Ordered candidate means.
#[derive(Debug, Clone, PartialEq)]
pub struct MuGrid {
    candidates: Vec<f64>,
}

impl MuGrid {
    pub fn new(candidates: Vec<f64>) -> Result<Self, MeanEstError> {
        if candidates.is_empty()
            || candidates.iter().any(|c| !c.is_finite())
            || candidates.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(MeanEstError::BadMuGrid);
        }
        Ok(Self { candidates })
    }

    /// `lo, lo+step, ..., <= hi` (hi included when it lands on the grid).
    pub fn range(lo: f64, hi: f64, step: f64) -> Result<Self, MeanEstError> {
        if !(step > 0.0) || !(hi > lo) {
            return Err(MeanEstError::BadMuGrid);
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        let candidates = (0..=count).map(|i| lo + i as f64 * step).collect();
        Self::new(candidates)
    }

    pub fn candidates(&self) -> &[f64] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Index of the candidate nearest to `target`.
    pub fn nearest(&self, target: f64) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, &c) in self.candidates.iter().enumerate() {
            let d = (c - target).abs();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

/// Boundary attachment for the heavy-tail sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySet {
    Empty,
    PlusOne,
    MinusOne,
}

/// `U_t`: `{1}` while every observation so far equals `1`, `{-1}` while every
/// observation equals `-1`, empty otherwise (and on an empty history).
pub fn boundary_set_u(history: &[f64]) -> BoundarySet {
    if history.is_empty() {
        return BoundarySet::Empty;
    }
    if history.iter().all(|&x| x == 1.0) {
        BoundarySet::PlusOne
    } else if history.iter().all(|&x| x == -1.0) {
        BoundarySet::MinusOne
    } else {
        BoundarySet::Empty
    }
}

/// Per-round confidence sets over the candidate grid, plus the boundary sets
/// for the heavy-tail case. Index `[t][k]`: round `t` (0-based, `t = 0` is
/// the empty-history set), candidate `k`. Wealth freezes at rejection.
#[derive(Debug, Clone)]
pub struct ConfidenceSequence {
    pub candidates: Vec<f64>,
    pub rounds: usize,
    pub in_set: Vec<Vec<bool>>,
    pub log_wealth: Vec<Vec<f64>>,
    pub boundary: Option<Vec<BoundarySet>>,
}

impl ConfidenceSequence {
    /// Candidates in the confidence set after round `t`.
    pub fn set_at(&self, t: usize) -> Vec<f64> {
        self.in_set[t]
            .iter()
            .zip(&self.candidates)
            .filter_map(|(&m, &c)| m.then_some(c))
            .collect()
    }

    /// Width (max minus min member) of the set after round `t`; zero when
    /// empty or a single candidate survives.
    pub fn width_at(&self, t: usize) -> f64 {
        let members = self.set_at(t);
        match (members.first(), members.last()) {
            (Some(first), Some(last)) => last - first,
            _ => 0.0,
        }
    }

    /// Sets only shrink over rounds.
    pub fn is_nested(&self) -> bool {
        for k in 0..self.candidates.len() {
            let mut alive = true;
            for row in &self.in_set {
                if !alive && row[k] {
                    return false;
                }
                alive = row[k];
            }
        }
        true
    }

    /// True when candidate `k` is excluded at any round.
    pub fn ever_excluded(&self, k: usize) -> bool {
        self.in_set.iter().any(|row| !row[k])
    }

    /// CSV rows `t, mu, in_set, log_wealth[, u_t]`, one block per round.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), MeanEstError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t", "mu", "in_set", "log_wealth"];
        if self.boundary.is_some() {
            header.push("u_t");
        }
        w.write_record(&header)?;
        for t in 0..=self.rounds {
            for (k, &mu) in self.candidates.iter().enumerate() {
                let mut rec = vec![
                    t.to_string(),
                    format!("{mu}"),
                    if self.in_set[t][k] { "1" } else { "0" }.to_string(),
                    format!("{}", self.log_wealth[t][k]),
                ];
                if let Some(boundary) = &self.boundary {
                    rec.push(
                        match boundary[t] {
                            BoundarySet::Empty => "",
                            BoundarySet::PlusOne => "1",
                            BoundarySet::MinusOne => "-1",
                        }
                        .to_string(),
                    );
                }
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Knobs shared by both families.
#[derive(Debug, Clone, Copy)]
pub struct CsOptions {
    /// Sample-grid step for the bounded family's tabulation on `[0,1]`.
    pub bounded_step: f64,
    /// Sample-grid step for the heavy-tail tabulation; coarse by default
    /// since the ellipse closed form carries the exact semantics.
    pub heavy_step: f64,
    /// Truncation radius of the heavy-tail tabulation grid.
    pub truncation: f64,
}

impl Default for CsOptions {
    fn default() -> Self {
        Self {
            bounded_step: 1e-3,
            heavy_step: 0.1,
            truncation: crate::config::DEFAULT_TRUNCATION,
        }
    }
}

/// Outcome of one candidate's game.
struct CandidateRun {
    rejected_at: Option<usize>,
    // log-wealth after rounds 1.. (stops at rejection or stream end)
    wealth: Vec<f64>,
}

fn assemble(
    candidates: Vec<f64>,
    rounds: usize,
    runs: Vec<CandidateRun>,
    boundary: Option<Vec<BoundarySet>>,
) -> ConfidenceSequence {
    let k = candidates.len();
    let mut in_set = vec![vec![true; k]; rounds + 1];
    let mut log_wealth = vec![vec![0.0; k]; rounds + 1];
    for (ki, run) in runs.iter().enumerate() {
        let mut frozen = 0.0;
        for t in 1..=rounds {
            if t <= run.wealth.len() {
                frozen = run.wealth[t - 1];
            }
            log_wealth[t][ki] = frozen;
            if let Some(r) = run.rejected_at {
                if t >= r {
                    in_set[t][ki] = false;
                }
            }
        }
    }
    ConfidenceSequence {
        candidates,
        rounds,
        in_set,
        log_wealth,
        boundary,
    }
}

/// Confidence sequence for the mean of a `[0,1]`-valued stream.
pub fn bounded_mean_cs(
    stream: &[f64],
    mu_grid: &MuGrid,
    delta: f64,
    strategy: &StrategySpec,
    opts: &CsOptions,
) -> Result<ConfidenceSequence, MeanEstError> {
    for &mu in mu_grid.candidates() {
        if !(0.0..=1.0).contains(&mu) {
            return Err(MeanEstError::BadCandidate(mu, "[0,1]".into()));
        }
    }
    let rounds = stream.len();
    let obs: Vec<Vec<f64>> = stream.iter().map(|&x| vec![x]).collect();
    let snap = opts.bounded_step / 2.0;
    let runs: Vec<Result<CandidateRun, MeanEstError>> = mu_grid
        .candidates()
        .par_iter()
        .map(|&mu| {
            if mu <= f64::EPSILON || mu >= 1.0 - f64::EPSILON {
                // Boundary candidate: X0 = {mu}; survives while every
                // observation sits on the boundary point.
                let rejected_at = stream
                    .iter()
                    .position(|&x| (x - mu).abs() > snap)
                    .map(|i| i + 1);
                let len = rejected_at.unwrap_or(rounds);
                return Ok(CandidateRun {
                    rejected_at,
                    wealth: vec![0.0; len],
                });
            }
            let hyp = Hypothesis::bounded_mean(mu, opts.bounded_step)?;
            run_candidate(&obs, &hyp, strategy, delta, rounds)
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(
        mu_grid.candidates().to_vec(),
        rounds,
        runs,
        None,
    ))
}

/// Confidence sequence for the mean of a real stream with unit second-moment
/// bound. Candidates must lie strictly inside `(-1,1)`; the boundary points
/// are reported through `U_t`.
pub fn heavy_tail_cs(
    stream: &[f64],
    mu_grid: &MuGrid,
    delta: f64,
    strategy: &StrategySpec,
    opts: &CsOptions,
) -> Result<ConfidenceSequence, MeanEstError> {
    for &mu in mu_grid.candidates() {
        if !(mu > -1.0 && mu < 1.0) {
            return Err(MeanEstError::BadCandidate(mu, "(-1,1)".into()));
        }
    }
    let rounds = stream.len();
    let obs: Vec<Vec<f64>> = stream.iter().map(|&x| vec![x]).collect();
    let runs: Vec<Result<CandidateRun, MeanEstError>> = mu_grid
        .candidates()
        .par_iter()
        .map(|&mu| {
            let hyp = Hypothesis::heavy_tail_mean(mu, opts.heavy_step, opts.truncation)?;
            run_candidate(&obs, &hyp, strategy, delta, rounds)
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let boundary = (0..=rounds).map(|t| boundary_set_u(&stream[..t])).collect();
    Ok(assemble(
        mu_grid.candidates().to_vec(),
        rounds,
        runs,
        Some(boundary),
    ))
}

fn run_candidate(
    obs: &[Vec<f64>],
    hyp: &Hypothesis,
    strategy: &StrategySpec,
    delta: f64,
    rounds: usize,
) -> Result<CandidateRun, MeanEstError> {
    let run = run_test(obs, hyp, strategy, delta, rounds)?;
    let rejected_at = match run.verdict {
        Verdict::Rejected { round, .. } => Some(round),
        Verdict::Survived { .. } => None,
    };
    Ok(CandidateRun {
        rejected_at,
        wealth: run.trajectory.iter().map(|r| r.log_wealth).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::betting::{EdgeDirection, LambdaParam};
    use crate::stream::GeneratorSpec;

    fn small_grid() -> MuGrid {
        MuGrid::range(0.1, 0.9, 0.1).unwrap()
    }

    #[test]
    fn boundary_rule_examples() {
        assert_eq!(boundary_set_u(&[1.0, 1.0, 1.0]), BoundarySet::PlusOne);
        assert_eq!(boundary_set_u(&[-1.0, -1.0]), BoundarySet::MinusOne);
        assert_eq!(boundary_set_u(&[1.0, -1.0]), BoundarySet::Empty);
        assert_eq!(boundary_set_u(&[]), BoundarySet::Empty);
    }

    #[test]
    fn empty_stream_keeps_everything() {
        let cs = bounded_mean_cs(
            &[],
            &small_grid(),
            0.05,
            &StrategySpec::Constant,
            &CsOptions::default(),
        )
        .unwrap();
        assert_eq!(cs.rounds, 0);
        assert_eq!(cs.set_at(0).len(), 9);
    }

    #[test]
    fn ftl_keeps_everything_after_one_round() {
        // First bet is lambda = 0, so R_1 = 0 for every candidate.
        let cs = bounded_mean_cs(
            &[0.9],
            &small_grid(),
            0.05,
            &StrategySpec::Ftl,
            &CsOptions::default(),
        )
        .unwrap();
        assert_eq!(cs.set_at(1).len(), 9);
    }

    #[test]
    fn five_ones_exclude_mu_half_at_round_five() {
        let grid = MuGrid::new(vec![0.3, 0.5, 0.7]).unwrap();
        let cs = bounded_mean_cs(
            &[1.0; 5],
            &grid,
            0.05,
            &StrategySpec::FixedEdge {
                direction: EdgeDirection::Up,
            },
            &CsOptions::default(),
        )
        .unwrap();
        let k = grid.nearest(0.5);
        assert!(cs.in_set[4][k], "mu=0.5 still in at t=4");
        assert!(!cs.in_set[5][k], "mu=0.5 out at t=5");
        // Wealth at exclusion is 5 ln 2.
        assert!((cs.log_wealth[5][k] - 5.0 * 2.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn heavy_tail_rejects_infeasible_strategy_before_any_round() {
        let grid = MuGrid::new(vec![0.0]).unwrap();
        let spec = StrategySpec::Fixed {
            lam_tight: vec![0.0],
            lam_slack: vec![1.5],
        };
        let err = heavy_tail_cs(&[0.0], &grid, 0.05, &spec, &CsOptions::default());
        assert!(err.is_err());
    }

    #[test]
    fn heavy_tail_boundary_column_tracks_history() {
        let grid = MuGrid::new(vec![-0.5, 0.0, 0.5]).unwrap();
        let cs = heavy_tail_cs(
            &[1.0, 1.0, -1.0],
            &grid,
            0.05,
            &StrategySpec::Constant,
            &CsOptions::default(),
        )
        .unwrap();
        let b = cs.boundary.as_ref().unwrap();
        assert_eq!(b[0], BoundarySet::Empty);
        assert_eq!(b[1], BoundarySet::PlusOne);
        assert_eq!(b[2], BoundarySet::PlusOne);
        assert_eq!(b[3], BoundarySet::Empty);
    }

    #[test]
    fn candidates_outside_regions_rejected() {
        assert!(matches!(
            bounded_mean_cs(
                &[0.5],
                &MuGrid::new(vec![1.2]).unwrap(),
                0.05,
                &StrategySpec::Constant,
                &CsOptions::default()
            ),
            Err(MeanEstError::BadCandidate(_, _))
        ));
        assert!(matches!(
            heavy_tail_cs(
                &[0.0],
                &MuGrid::new(vec![1.0]).unwrap(),
                0.05,
                &StrategySpec::Constant,
                &CsOptions::default()
            ),
            Err(MeanEstError::BadCandidate(_, _))
        ));
    }

    #[test]
    fn boundary_candidate_survives_only_on_boundary_observations() {
        let grid = MuGrid::new(vec![0.0, 0.5]).unwrap();
        let cs = bounded_mean_cs(
            &[0.0, 0.0, 0.3],
            &grid,
            0.05,
            &StrategySpec::Constant,
            &CsOptions::default(),
        )
        .unwrap();
        let k0 = grid.nearest(0.0);
        assert!(cs.in_set[2][k0], "mu=0 kept while all x=0");
        assert!(!cs.in_set[3][k0], "mu=0 dropped at the first x != 0");
    }

    #[test]
    fn nesting_holds_on_a_mixture_run() {
        let spec = StrategySpec::GridMixture {
            lams: vec![
                LambdaParam {
                    lam_tight: vec![-1.0],
                    lam_slack: vec![],
                },
                LambdaParam {
                    lam_tight: vec![1.0],
                    lam_slack: vec![],
                },
            ],
        };
        let stream = GeneratorSpec::TwoPoint {
            a: 0.7,
            b: 0.9,
            prob_a: 0.5,
        }
        .generate(3, 400)
        .unwrap();
        let xs: Vec<f64> = stream.iter().map(|x| x[0]).collect();
        let cs = bounded_mean_cs(
            &xs,
            &small_grid(),
            0.05,
            &spec,
            &CsOptions::default(),
        )
        .unwrap();
        assert!(cs.is_nested());
        // Some candidate far from the true mean 0.8 gets excluded, since the
        // fixed mixture components bet in both directions.
        assert!(cs.ever_excluded(small_grid().nearest(0.1)));
    }

    // Regression bound, not a theorem: with adaptive betting and 2000 draws
    // from a two-point distribution of mean 0.8, the final set is narrow.
    #[test]
    fn ftl_exclusion_power_regression() {
        let stream = GeneratorSpec::TwoPoint {
            a: 0.7,
            b: 0.9,
            prob_a: 0.5,
        }
        .generate(20260809, 2000)
        .unwrap();
        let xs: Vec<f64> = stream.iter().map(|x| x[0]).collect();
        let grid = MuGrid::range(0.05, 0.95, 0.05).unwrap();
        let cs = bounded_mean_cs(
            &xs,
            &grid,
            0.05,
            &StrategySpec::Ftl,
            &CsOptions::default(),
        )
        .unwrap();
        assert!(cs.is_nested());
        let width = cs.width_at(cs.rounds);
        assert!(width < 0.2, "final width {width}");
        let k = grid.nearest(0.8);
        assert!(cs.in_set[cs.rounds][k], "true mean candidate survives");
    }

    #[test]
    fn csv_layout_bounded_and_heavy() {
        let grid = MuGrid::new(vec![0.4, 0.6]).unwrap();
        let cs = bounded_mean_cs(
            &[0.5],
            &grid,
            0.05,
            &StrategySpec::Constant,
            &CsOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        cs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,mu,in_set,log_wealth");
        assert_eq!(text.lines().count(), 1 + 2 * 2);

        let grid = MuGrid::new(vec![0.0]).unwrap();
        let cs = heavy_tail_cs(
            &[1.0],
            &grid,
            0.05,
            &StrategySpec::Constant,
            &CsOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        cs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,mu,in_set,log_wealth,u_t"));
        assert!(text.lines().nth(2).unwrap().ends_with(",1"));
    }
}
