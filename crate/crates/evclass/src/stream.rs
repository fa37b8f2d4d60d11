//! Observation streams: CSV files and seeded synthetic generators.
//!
//! Stream CSVs carry one observation per row in columns named `x1..xn`
//! (extra columns are ignored, so any trajectory or confidence-sequence CSV
//! written by this crate reads back as a stream). Synthetic streams are
//! fully determined by a generator spec plus a `u64` seed.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("stream file has no x1..xn columns")]
    MissingColumns,
    #[error("could not parse {0:?} as a number")]
    BadNumber(String),
    #[error("invalid generator spec: {0}")]
    BadGenerator(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Reads a stream from CSV text: columns `x1..xn` (header mandatory), other
/// columns ignored.
pub fn read_stream<R: std::io::Read>(reader: R) -> Result<Vec<Vec<f64>>, StreamError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    // Map variable index -> csv column.
    let mut cols: Vec<(usize, usize)> = Vec::new();
    for (ci, name) in headers.iter().enumerate() {
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                let vi: usize = rest.parse().unwrap();
                if vi >= 1 {
                    cols.push((vi - 1, ci));
                }
            }
        }
    }
    if cols.is_empty() {
        return Err(StreamError::MissingColumns);
    }
    cols.sort_unstable();
    let dim = cols.last().unwrap().0 + 1;
    if cols.len() != dim || cols.iter().enumerate().any(|(k, &(vi, _))| vi != k) {
        return Err(StreamError::MissingColumns);
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let mut x = Vec::with_capacity(dim);
        for &(_, ci) in &cols {
            let field = record
                .get(ci)
                .ok_or_else(|| StreamError::BadNumber("<missing>".into()))?;
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| StreamError::BadNumber(field.to_string()))?;
            x.push(v);
        }
        out.push(x);
    }
    Ok(out)
}

pub fn read_stream_file(path: &Path) -> Result<Vec<Vec<f64>>, StreamError> {
    let file = std::fs::File::open(path)?;
    read_stream(file)
}

/// Seeded synthetic stream description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Finite-support distribution over explicit points.
    Discrete {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    /// Two-point distribution on the line: `a` with probability `prob_a`.
    TwoPoint { a: f64, b: f64, prob_a: f64 },
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl GeneratorSpec {
    pub fn from_json(json: &str) -> Result<Self, StreamError> {
        Ok(serde_json::from_str(json)?)
    }

    fn validate(&self) -> Result<(), StreamError> {
        match self {
            GeneratorSpec::Discrete { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(StreamError::BadGenerator(
                        "discrete generator needs matching non-empty points and weights".into(),
                    ));
                }
                let dim = points[0].len();
                if dim == 0 || points.iter().any(|p| p.len() != dim) {
                    return Err(StreamError::BadGenerator(
                        "discrete points must share one dimension".into(),
                    ));
                }
                if weights.iter().any(|&w| !(w >= 0.0)) {
                    return Err(StreamError::BadGenerator(
                        "discrete weights must be non-negative".into(),
                    ));
                }
                if weights.iter().sum::<f64>() <= 0.0 {
                    return Err(StreamError::BadGenerator(
                        "discrete weights must not all vanish".into(),
                    ));
                }
                Ok(())
            }
            GeneratorSpec::TwoPoint { prob_a, .. } => {
                if !(0.0..=1.0).contains(prob_a) {
                    return Err(StreamError::BadGenerator(
                        "prob_a must lie in [0,1]".into(),
                    ));
                }
                Ok(())
            }
            GeneratorSpec::Uniform { lo, hi } => {
                if !(hi > lo) {
                    return Err(StreamError::BadGenerator("uniform needs hi > lo".into()));
                }
                Ok(())
            }
            GeneratorSpec::Gaussian { sd, .. } => {
                if !(sd >= &0.0) {
                    return Err(StreamError::BadGenerator("gaussian needs sd >= 0".into()));
                }
                Ok(())
            }
        }
    }

    /// Generates `len` observations deterministically from the seed.
    pub fn generate(&self, seed: u64, len: usize) -> Result<Vec<Vec<f64>>, StreamError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(len);
        match self {
            GeneratorSpec::Discrete { points, weights } => {
                let total: f64 = weights.iter().sum();
                for _ in 0..len {
                    let mut u = rng.random::<f64>() * total;
                    let mut idx = points.len() - 1;
                    for (i, &w) in weights.iter().enumerate() {
                        if u < w {
                            idx = i;
                            break;
                        }
                        u -= w;
                    }
                    out.push(points[idx].clone());
                }
            }
            GeneratorSpec::TwoPoint { a, b, prob_a } => {
                for _ in 0..len {
                    let v = if rng.random::<f64>() < *prob_a { *a } else { *b };
                    out.push(vec![v]);
                }
            }
            GeneratorSpec::Uniform { lo, hi } => {
                for _ in 0..len {
                    out.push(vec![lo + (hi - lo) * rng.random::<f64>()]);
                }
            }
            GeneratorSpec::Gaussian { mean, sd } => {
                // Box-Muller; one draw consumed per observation pair.
                let mut spare: Option<f64> = None;
                for _ in 0..len {
                    let z = match spare.take() {
                        Some(z) => z,
                        None => {
                            let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                            let u2: f64 = rng.random();
                            let r = (-2.0 * u1.ln()).sqrt();
                            let theta = 2.0 * std::f64::consts::PI * u2;
                            spare = Some(r * theta.sin());
                            r * theta.cos()
                        }
                    };
                    out.push(vec![mean + sd * z]);
                }
            }
        }
        Ok(out)
    }
}
