//! The sequential testing game and its rejection rules.
//!
//! Each round the player commits to a feasible `lambda_t` (through a betting
//! strategy), observes `x_t`, and earns `log E_{lambda_t}(x_t)`. The
//! cumulative reward `R_t` is the log-wealth of the test; crossing
//! `log(1/delta)` rejects the hypothesis by Ville's inequality, and because
//! that inequality is uniform in time the engine latches the rejection at the
//! first crossing (the stopped test inherits the guarantee).
//!
//! Hypotheses whose classification is finitely non-proper are first restricted
//! to their support set `X0`; any observation farther than the snap tolerance
//! from `X0` is incompatible with every member of the hypothesis and rejects
//! immediately with cause `outside_support`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::betting::{make_strategy, next_lambda, update, BettingError, StrategySpec};
use crate::dual_eclass::{evaluate_e, LambdaVector};
use crate::hypothesis::{Classification, Hypothesis, HypothesisError};

#[derive(Debug, Error)]
pub enum GameError {
    #[error(transparent)]
    Betting(#[from] BettingError),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error("testing is undefined for loose non-proper hypotheses")]
    UnsupportedClassification,
}

/// Why a run rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionCause {
    /// Log-wealth exceeded `log(1/delta)`.
    Threshold,
    /// An observation fell outside the support set `X0`.
    OutsideSupport,
}

/// Round index, cumulative log-wealth, and the observation history of one
/// game. `log_wealth` may be `-inf` (dead wealth); once `rejected_at` is set
/// it never changes.
#[derive(Debug, Clone)]
pub struct GameState {
    pub round: usize,
    pub log_wealth: f64,
    pub history: Vec<Vec<f64>>,
    pub rejected_at: Option<usize>,
    pub rejection_cause: Option<RejectionCause>,
}

impl GameState {
    pub fn new() -> Self {
        Self {
            round: 0,
            log_wealth: 0.0,
            history: Vec::new(),
            rejected_at: None,
            rejection_cause: None,
        }
    }
}

impl Default for GameState {
    fn default() -> Self {
        Self::new()
    }
}

/// Plays one round: earns `log E_{lambda}(x)` (with `log 0 = -inf`, which is
/// absorbing) and appends the observation.
pub fn play_round(
    mut state: GameState,
    lam: &LambdaVector,
    hypothesis: &Hypothesis,
    x: &[f64],
) -> GameState {
    let e = evaluate_e(lam, hypothesis, x).max(0.0);
    state.log_wealth += e.ln();
    state.history.push(x.to_vec());
    state.round += 1;
    state
}

/// Ville rejection rule: `R_t > log(1/delta)`.
pub fn ville_reject(state: &GameState, delta: f64) -> bool {
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0,1), got {delta}");
    state.log_wealth > (1.0 / delta).ln()
}

/// One logged round of a test run.
#[derive(Debug, Clone)]
pub struct TrajectoryRow {
    pub t: usize,
    pub lambda: LambdaVector,
    pub x: Vec<f64>,
    pub log_wealth: f64,
}

/// Outcome of a test run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Rejected { round: usize, cause: RejectionCause },
    Survived { rounds: usize },
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Rejected { round, cause } => {
                let cause = match cause {
                    RejectionCause::Threshold => "threshold",
                    RejectionCause::OutsideSupport => "outside_support",
                };
                write!(f, "rejected({round}, {cause})")
            }
            Verdict::Survived { rounds } => write!(f, "survived({rounds})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestRun {
    pub verdict: Verdict,
    pub trajectory: Vec<TrajectoryRow>,
}

impl TestRun {
    pub fn final_log_wealth(&self) -> f64 {
        self.trajectory.last().map_or(0.0, |r| r.log_wealth)
    }
}

/// Runs the full testing loop on a stream of observations.
///
/// Finitely non-proper hypotheses are restricted to `X0` first and the game
/// is played on the restriction; observations farther than the snap tolerance
/// from `X0` reject immediately. The rejection is latched at the first
/// threshold crossing and play stops there.
pub fn run_test(
    stream: &[Vec<f64>],
    hypothesis: &Hypothesis,
    strategy_spec: &StrategySpec,
    delta: f64,
    max_rounds: usize,
) -> Result<TestRun, GameError> {
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0,1), got {delta}");
    // Resolve the game hypothesis and the support set.
    let restricted;
    let (game_hyp, check_support) = match hypothesis.classification() {
        Classification::Proper => (hypothesis, true),
        Classification::FinitelyNonProper => {
            restricted = hypothesis.support_restriction()?;
            (&restricted.restricted, true)
        }
        Classification::LooseProper => (hypothesis, false),
        Classification::LooseNonProper => return Err(GameError::UnsupportedClassification),
    };
    let snap = game_hyp.grid().snap_tolerance();

    let mut strategy = make_strategy(strategy_spec, game_hyp)?;
    let mut gs = GameState::new();
    let mut trajectory = Vec::new();
    let mut played = 0;

    for (i, x) in stream.iter().take(max_rounds).enumerate() {
        let t = i + 1;
        let lam = next_lambda(&strategy, game_hyp);
        if check_support {
            let (_, dist) = game_hyp.grid().nearest(x);
            if dist > snap {
                gs.rejected_at = Some(t);
                gs.rejection_cause = Some(RejectionCause::OutsideSupport);
                trajectory.push(TrajectoryRow {
                    t,
                    lambda: lam,
                    x: x.clone(),
                    log_wealth: gs.log_wealth,
                });
                return Ok(TestRun {
                    verdict: Verdict::Rejected {
                        round: t,
                        cause: RejectionCause::OutsideSupport,
                    },
                    trajectory,
                });
            }
        }
        gs = play_round(gs, &lam, game_hyp, x);
        strategy = update(strategy, game_hyp, x);
        trajectory.push(TrajectoryRow {
            t,
            lambda: lam,
            x: x.clone(),
            log_wealth: gs.log_wealth,
        });
        played = t;
        if ville_reject(&gs, delta) {
            gs.rejected_at = Some(t);
            gs.rejection_cause = Some(RejectionCause::Threshold);
            return Ok(TestRun {
                verdict: Verdict::Rejected {
                    round: t,
                    cause: RejectionCause::Threshold,
                },
                trajectory,
            });
        }
    }
    Ok(TestRun {
        verdict: Verdict::Survived { rounds: played },
        trajectory,
    })
}

/// Writes a trajectory as CSV with columns `t`, `lam1..`, `x1..`, `log_wealth`.
/// The observation columns are named so the stream reader can ingest the file
/// back.
pub fn write_trajectory_csv<W: std::io::Write>(
    rows: &[TrajectoryRow],
    dim: usize,
    lam_len: usize,
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    for j in 0..lam_len {
        header.push(format!("lam{}", j + 1));
    }
    for j in 0..dim {
        header.push(format!("x{}", j + 1));
    }
    header.push("log_wealth".to_string());
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.t.to_string()];
        for v in row.lambda.joint() {
            rec.push(format!("{v}"));
        }
        for v in &row.x {
            rec.push(format!("{v}"));
        }
        rec.push(format!("{}", row.log_wealth));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::expr::Expr;
    use crate::hypothesis::{ClosedForm, ConstraintSpec, SampleGrid};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn mean_half_unit() -> Hypothesis {
        Hypothesis::bounded_mean(0.5, 0.001).unwrap()
    }

    fn nonneg_identity() -> Hypothesis {
        let grid = SampleGrid::explicit_scalar(&[0.0, 1.0, 2.0]).unwrap();
        let c = ConstraintSpec::from_exprs(vec![Expr::parse("x1").unwrap()], Vec::new(), &grid)
            .unwrap();
        Hypothesis::new(grid, c, ClosedForm::None, Tolerances::default()).unwrap()
    }

    #[test]
    fn play_round_reward_arithmetic() {
        let h = mean_half_unit();
        let gs = GameState::new();
        assert_eq!(gs.log_wealth, 0.0);
        // E = 2 at x = 1 under lambda = 2.
        let gs = play_round(gs, &LambdaVector::tight_only(vec![2.0]), &h, &[1.0]);
        assert!((gs.log_wealth - 2.0f64.ln()).abs() < 1e-12);
        // E = 1 under lambda = 0.
        let gs = play_round(gs, &LambdaVector::zeros(1, 0), &h, &[0.3]);
        assert!((gs.log_wealth - 2.0f64.ln()).abs() < 1e-12);
        // E = 0 at x = 0 under lambda = 2: dead wealth.
        let gs = play_round(gs, &LambdaVector::tight_only(vec![2.0]), &h, &[0.0]);
        assert!(gs.log_wealth.is_infinite() && gs.log_wealth < 0.0);
        // Dead wealth stays dead.
        let gs = play_round(gs, &LambdaVector::tight_only(vec![2.0]), &h, &[1.0]);
        assert!(gs.log_wealth.is_infinite() && gs.log_wealth < 0.0);
        assert_eq!(gs.round, 4);
    }

    #[test]
    fn ville_threshold_arithmetic() {
        let mut gs = GameState::new();
        gs.log_wealth = 3.1;
        assert!(ville_reject(&gs, 0.05)); // ln 20 = 2.9957
        gs.log_wealth = 2.9;
        assert!(!ville_reject(&gs, 0.05));
        gs.log_wealth = 0.70;
        assert!(ville_reject(&gs, 0.5)); // ln 2 = 0.6931
    }

    #[test]
    #[should_panic(expected = "delta must lie in (0,1)")]
    fn ville_rejects_bad_delta() {
        ville_reject(&GameState::new(), 1.5);
    }

    #[test]
    fn constant_strategy_never_rejects() {
        let h = mean_half_unit();
        let stream: Vec<Vec<f64>> = (0..50).map(|i| vec![(i % 2) as f64]).collect();
        let run = run_test(&stream, &h, &StrategySpec::Constant, 0.05, 50).unwrap();
        assert_eq!(run.verdict, Verdict::Survived { rounds: 50 });
        assert_eq!(run.final_log_wealth(), 0.0);
    }

    #[test]
    fn doubling_bets_reject_at_round_five() {
        // E(x) = 1 + 2(x - 0.5) doubles on every observation of 1:
        // 5 ln 2 = 3.466 > ln 20 = 2.996 but 4 ln 2 = 2.773 is not enough.
        let h = mean_half_unit();
        let stream: Vec<Vec<f64>> = vec![vec![1.0]; 8];
        let spec = StrategySpec::Fixed {
            lam_tight: vec![2.0],
            lam_slack: vec![],
        };
        let run = run_test(&stream, &h, &spec, 0.05, 8).unwrap();
        assert_eq!(
            run.verdict,
            Verdict::Rejected {
                round: 5,
                cause: RejectionCause::Threshold
            }
        );
        assert_eq!(run.trajectory.len(), 5);
    }

    #[test]
    fn outside_support_rejects_on_first_bad_observation() {
        let h = nonneg_identity();
        assert_eq!(h.classification(), Classification::FinitelyNonProper);
        let stream = vec![vec![0.0], vec![1.0], vec![0.0]];
        let run = run_test(&stream, &h, &StrategySpec::Constant, 0.05, 10).unwrap();
        assert_eq!(
            run.verdict,
            Verdict::Rejected {
                round: 2,
                cause: RejectionCause::OutsideSupport
            }
        );
    }

    #[test]
    fn loose_non_proper_is_refused() {
        // Tight 1 - x with slack x^2 - 1 on a grid where the joint hull puts
        // the origin on the boundary: x = 1 is the only zero of the tight
        // part, so the joint image touches zero only there.
        let grid = SampleGrid::explicit_scalar(&[-2.0, 0.0, 1.0, 3.0]).unwrap();
        let c = ConstraintSpec::from_exprs(
            vec![Expr::parse("1 - x1").unwrap()],
            vec![Expr::parse("x1^2 - 1").unwrap()],
            &grid,
        )
        .unwrap();
        let h = Hypothesis::new(grid, c, ClosedForm::None, Tolerances::default()).unwrap();
        assert_eq!(h.classification(), Classification::LooseNonProper);
        let stream = vec![vec![1.0]];
        assert!(matches!(
            run_test(&stream, &h, &StrategySpec::Constant, 0.05, 1),
            Err(GameError::UnsupportedClassification)
        ));
    }

    #[test]
    fn trajectory_bookkeeping_identity() {
        let h = mean_half_unit();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let stream: Vec<Vec<f64>> = (0..80)
            .map(|_| vec![(rng.random::<f64>() * 1000.0).round() / 1000.0])
            .collect();
        let spec = StrategySpec::Fixed {
            lam_tight: vec![0.7],
            lam_slack: vec![],
        };
        let run = run_test(&stream, &h, &spec, 0.01, 80).unwrap();
        // R_t equals the sum of logged per-round rewards exactly.
        let mut acc = 0.0;
        for row in &run.trajectory {
            let e = evaluate_e(&row.lambda, &h, &row.x).max(0.0);
            acc += e.ln();
            assert_eq!(acc, row.log_wealth, "bookkeeping must be exact");
        }
    }

    #[test]
    fn lambda_depends_only_on_the_past() {
        let h = mean_half_unit();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let prefix: Vec<Vec<f64>> = (0..10)
            .map(|_| vec![(rng.random::<f64>() * 1000.0).round() / 1000.0])
            .collect();
        let mut future_a: Vec<Vec<f64>> = (0..10)
            .map(|_| vec![(rng.random::<f64>() * 1000.0).round() / 1000.0])
            .collect();
        let mut stream_a = prefix.clone();
        stream_a.append(&mut future_a.clone());
        future_a.reverse();
        let mut stream_b = prefix.clone();
        stream_b.append(&mut future_a);

        let run_a = run_test(&stream_a, &h, &StrategySpec::Ftl, 0.01, 20).unwrap();
        let run_b = run_test(&stream_b, &h, &StrategySpec::Ftl, 0.01, 20).unwrap();
        // Lambdas through round prefix+1 agree: they see only the prefix.
        for t in 0..=prefix.len() {
            if t < run_a.trajectory.len() && t < run_b.trajectory.len() {
                assert_eq!(
                    run_a.trajectory[t].lambda.joint(),
                    run_b.trajectory[t].lambda.joint(),
                    "round {t} lambda must not depend on the future"
                );
            }
        }
    }

    #[test]
    fn rejection_is_latched() {
        // After the threshold crossing the run stops; wealth recorded at the
        // crossing stays the final word even though later observations would
        // have decreased it.
        let h = mean_half_unit();
        let mut stream: Vec<Vec<f64>> = vec![vec![1.0]; 5];
        stream.extend(vec![vec![0.0]; 5]); // would drain wealth if played
        let spec = StrategySpec::Fixed {
            lam_tight: vec![2.0],
            lam_slack: vec![],
        };
        let run = run_test(&stream, &h, &spec, 0.05, 10).unwrap();
        assert_eq!(
            run.verdict,
            Verdict::Rejected {
                round: 5,
                cause: RejectionCause::Threshold
            }
        );
        assert_eq!(run.trajectory.len(), 5, "play stops at the latch");
    }

    #[test]
    fn trajectory_csv_has_expected_header() {
        let h = mean_half_unit();
        let stream = vec![vec![0.25], vec![0.75]];
        let spec = StrategySpec::Fixed {
            lam_tight: vec![1.0],
            lam_slack: vec![],
        };
        let run = run_test(&stream, &h, &spec, 0.05, 2).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&run.trajectory, 1, 1, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,lam1,x1,log_wealth");
        assert_eq!(text.lines().count(), 3);
    }
}
