//! Numeric tolerances and size limits, fixed in one place.
//!
//! Every classification and feasibility decision in this crate reduces to a
//! comparison against one of two knobs: a feasibility tolerance (constraint
//! violation we accept from the LP solver) and a rank/relative-interior
//! threshold (below which a pivot, weight, or residual counts as zero).
//! Keeping them global makes classifications reproducible across modules.

use serde::{Deserialize, Serialize};

/// Residual threshold for declaring a tabulated e-variable a member of the
/// dual class after the least-squares fit.
pub const DUAL_RESIDUAL_TOL: f64 = 1e-8;

/// Largest grid the vertex-enumeration oracle accepts.
pub const ORACLE_MAX_GRID: usize = 12;

/// Largest tight-constraint dimension the vertex-enumeration oracle accepts.
pub const ORACLE_MAX_CONSTRAINTS: usize = 3;

/// Default truncation radius for grids standing in for unbounded spaces.
pub const DEFAULT_TRUNCATION: f64 = 50.0;

/// Fixed iteration budget of the follow-the-leader inner optimizer.
pub const FTL_ITERATIONS: usize = 200;

/// Base step size of the follow-the-leader inner optimizer; iteration k uses
/// `FTL_STEP / sqrt(k)`.
pub const FTL_STEP: f64 = 0.1;

/// Global numeric tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute constraint-violation tolerance for LP solutions and for
    /// lambda feasibility checks.
    pub feasibility: f64,
    /// Pivot / rank / relative-interior threshold: quantities with absolute
    /// value at or below this count as zero.
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-9,
            rank: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn new(feasibility: f64, rank: f64) -> Self {
        assert!(
            feasibility > 0.0 && rank > 0.0,
            "tolerances must be strictly positive"
        );
        Self { feasibility, rank }
    }
}
