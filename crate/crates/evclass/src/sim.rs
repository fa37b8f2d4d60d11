//! Seeded Monte Carlo drivers: type-I error of a single test and coverage of
//! the confidence sequences.
//!
//! Replicate `r` of a run with base seed `s` uses seed `s + r`, so reports
//! are reproducible and replicates can be evaluated on a worker pool in any
//! order; the aggregation is a plain count and therefore order-independent.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::betting::StrategySpec;
use crate::config::Tolerances;
use crate::dual_eclass::{
    coordinate_resolve, enumerate_vertices, maximal_majorizer, verify_in_dual_class,
    TabulatedEVariable,
};
use crate::game::{run_test, GameError, Verdict};
use crate::geometry::dot;
use crate::hypothesis::{
    Classification, ClosedForm, ConstraintSpec, Hypothesis, HypothesisError, SampleGrid,
};
use crate::meanest::{bounded_mean_cs, heavy_tail_cs, CsOptions, MeanEstError, MuGrid};
use crate::stream::{GeneratorSpec, StreamError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    MeanEst(#[from] MeanEstError),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
}

/// Frequency estimate with its binomial standard error and the three-sigma
/// acceptance bound `p + 3 sqrt(p (1-p) / n)` around the nominal level.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloReport {
    pub hits: usize,
    pub replicates: usize,
    pub rate: f64,
    pub std_err: f64,
    pub bound: f64,
}

impl MonteCarloReport {
    fn new(hits: usize, replicates: usize, nominal: f64) -> Self {
        let n = replicates as f64;
        let rate = hits as f64 / n;
        Self {
            hits,
            replicates,
            rate,
            std_err: (rate * (1.0 - rate) / n).sqrt(),
            bound: binomial_bound(nominal, replicates),
        }
    }

    pub fn within_bound(&self) -> bool {
        self.rate <= self.bound
    }
}

/// `p + 3 sqrt(p (1-p) / n)`.
pub fn binomial_bound(p: f64, n: usize) -> f64 {
    p + 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// A finite-support member of the hypothesis usable as a null stream source:
/// the matching witness over the whole grid.
pub fn witness_generator(hypothesis: &Hypothesis) -> Result<GeneratorSpec, SimError> {
    let all: Vec<usize> = (0..hypothesis.grid().len()).collect();
    let w = hypothesis.matching_witness(&all)?;
    Ok(GeneratorSpec::Discrete {
        points: hypothesis.grid().points().to_vec(),
        weights: w.as_slice().to_vec(),
    })
}

/// Frequency of ever rejecting within `rounds` under i.i.d. draws from the
/// given generator (which should be a member of the hypothesis for a type-I
/// reading).
pub fn type_one_error(
    hypothesis: &Hypothesis,
    strategy: &StrategySpec,
    generator: &GeneratorSpec,
    delta: f64,
    rounds: usize,
    replicates: usize,
    base_seed: u64,
) -> Result<MonteCarloReport, SimError> {
    let flags: Vec<Result<bool, SimError>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let stream = generator.generate(base_seed + r as u64, rounds)?;
            let run = run_test(&stream, hypothesis, strategy, delta, rounds)?;
            Ok(matches!(run.verdict, Verdict::Rejected { .. }))
        })
        .collect();
    let mut hits = 0;
    for f in flags {
        if f? {
            hits += 1;
        }
    }
    Ok(MonteCarloReport::new(hits, replicates, delta))
}

/// Which confidence-sequence family a coverage run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsFamily {
    Bounded,
    HeavyTail,
}

#[derive(Debug, Clone, Copy)]
pub struct CoverageReport {
    /// Frequency of the true-mean candidate being excluded at any round.
    pub report: MonteCarloReport,
    /// Whether nesting held on every replicate.
    pub nesting_ok: bool,
}

/// Frequency of the event "the candidate nearest the true mean is ever
/// excluded" over seeded replicates, together with a nesting check.
#[allow(clippy::too_many_arguments)]
pub fn coverage(
    family: CsFamily,
    true_mean: f64,
    mu_grid: &MuGrid,
    strategy: &StrategySpec,
    generator: &GeneratorSpec,
    delta: f64,
    rounds: usize,
    replicates: usize,
    base_seed: u64,
    opts: &CsOptions,
) -> Result<CoverageReport, SimError> {
    let k = mu_grid.nearest(true_mean);
    let outcomes: Vec<Result<(bool, bool), SimError>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let stream = generator.generate(base_seed + r as u64, rounds)?;
            let xs: Vec<f64> = stream.iter().map(|x| x[0]).collect();
            let cs = match family {
                CsFamily::Bounded => bounded_mean_cs(&xs, mu_grid, delta, strategy, opts)?,
                CsFamily::HeavyTail => heavy_tail_cs(&xs, mu_grid, delta, strategy, opts)?,
            };
            Ok((cs.ever_excluded(k), cs.is_nested()))
        })
        .collect();
    let mut misses = 0;
    let mut nesting_ok = true;
    for o in outcomes {
        let (missed, nested) = o?;
        if missed {
            misses += 1;
        }
        nesting_ok &= nested;
    }
    Ok(CoverageReport {
        report: MonteCarloReport::new(misses, replicates, delta),
        nesting_ok,
    })
}

// ---------------------------------------------------------------------------
// Randomized optimality verification
// ---------------------------------------------------------------------------

/// Aggregate of a randomized maximality sweep.
#[derive(Debug, Clone, Copy)]
pub struct OptimalitySweep {
    pub trials: usize,
    /// Largest dual-class fit residual seen across all trials.
    pub max_residual: f64,
    /// Trials where the output failed to majorize the input.
    pub majorization_failures: usize,
    /// Trials where a coordinate re-solve moved by more than 1e-9.
    pub maximality_failures: usize,
    /// Trials with fit residual above 1e-8.
    pub residual_failures: usize,
}

impl OptimalitySweep {
    pub fn all_passed(&self) -> bool {
        self.majorization_failures == 0
            && self.maximality_failures == 0
            && self.residual_failures == 0
    }
}

/// Runs `trials` randomized maximal-majorizer checks: random proper tight
/// constraints on grids of `2..=max_grid` points with `1..=max_dim`
/// components, and random non-negative starting e-variables scaled to respect
/// every vertex constraint. Each trial checks majorization, coordinate-LP
/// maximality, and dual-class membership of the output.
pub fn optimality_sweep(
    trials: usize,
    base_seed: u64,
    max_grid: usize,
    max_dim: usize,
) -> Result<OptimalitySweep, SimError> {
    let results: Vec<Result<(f64, bool, bool, bool), SimError>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(t as u64));
            let (hyp, e0) = random_proper_trial(&mut rng, max_grid, max_dim)?;
            let maximal = maximal_majorizer(&e0, &hyp).expect("trial input is an e-variable");
            let majorizes = maximal
                .values
                .iter()
                .zip(&e0.values)
                .all(|(a, b)| *a + 1e-9 >= *b);
            let maximality = (0..hyp.grid().len()).all(|i| {
                (coordinate_resolve(&maximal, &hyp, i) - maximal.values[i]).abs() <= 1e-9
            });
            let fit = verify_in_dual_class(&maximal, &hyp);
            Ok((fit.residual, majorizes, maximality, fit.residual <= 1e-8))
        })
        .collect();
    let mut sweep = OptimalitySweep {
        trials,
        max_residual: 0.0,
        majorization_failures: 0,
        maximality_failures: 0,
        residual_failures: 0,
    };
    for r in results {
        let (residual, majorizes, maximal, residual_ok) = r?;
        sweep.max_residual = sweep.max_residual.max(residual);
        if !majorizes {
            sweep.majorization_failures += 1;
        }
        if !maximal {
            sweep.maximality_failures += 1;
        }
        if !residual_ok {
            sweep.residual_failures += 1;
        }
    }
    Ok(sweep)
}

/// One random trial: a proper tight constraint (guaranteed by centering the
/// tabulation around a full-support distribution) plus a random starting
/// e-variable.
fn random_proper_trial(
    rng: &mut ChaCha8Rng,
    max_grid: usize,
    max_dim: usize,
) -> Result<(Hypothesis, TabulatedEVariable), SimError> {
    let d = rng.random_range(2..=max_grid);
    let m = rng.random_range(1..=max_dim);
    let grid = SampleGrid::explicit_scalar(&(0..d).map(|i| i as f64).collect::<Vec<_>>())?;
    // Full-support weights bounded away from zero.
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    // Center each column so that sum_i w_i phi(x_i) = 0 exactly.
    let mut tab = vec![vec![0.0; m]; d];
    for j in 0..m {
        let col: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean: f64 = col.iter().zip(&w).map(|(c, wi)| c * wi).sum();
        for i in 0..d {
            tab[i][j] = col[i] - mean;
        }
    }
    let constraint = ConstraintSpec::from_tabulation(tab, m, &grid);
    let hyp = Hypothesis::new(grid, constraint, ClosedForm::None, Tolerances::default())?;
    debug_assert_eq!(hyp.classification(), Classification::Proper);

    let vertices = enumerate_vertices(&hyp);
    let u: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
    let worst = vertices
        .iter()
        .map(|v| dot(v.as_slice(), &u))
        .fold(0.0f64, f64::max);
    let scale = if worst > 0.0 {
        rng.random_range(0.2..1.0) / worst
    } else {
        1.0
    };
    let e0 = TabulatedEVariable::new(u.into_iter().map(|v| v * scale).collect());
    Ok((hyp, e0))
}
