//! Statistical comparison of a stochastic table against an exact one.
//!
//! Each matched row gets z = |estimate − reference| / stderr, separately
//! for real and imaginary parts; the verdict is the worst z against the
//! threshold. A zero difference passes regardless of the quoted error, so
//! comparing a table against itself always succeeds; a nonzero difference
//! with zero quoted error is an unambiguous failure.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{CliError, CliResult};
use crate::output::{ResultTable, Row};

pub const DEFAULT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRow {
    pub observable_id: String,
    pub t: f64,
    pub z_re: f64,
    pub z_im: f64,
}

impl CompareRow {
    pub fn z(&self) -> f64 {
        self.z_re.max(self.z_im)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub threshold: f64,
    pub max_z: f64,
    pub pass: bool,
    pub model_hash_match: bool,
    pub forced: bool,
    pub rows: Vec<CompareRow>,
}

fn z_score(diff: f64, stderr: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if stderr > 0.0 {
        diff.abs() / stderr
    } else {
        f64::INFINITY
    }
}

fn row_key(row: &Row) -> (String, u64) {
    (row.observable_id.clone(), row.t.to_bits())
}

/// Match rows on (observable id, time) and score the disagreement. Hash
/// mismatches and unmatched rows are validation errors unless forced; a
/// clean comparison that exceeds the threshold is reported in the result,
/// not as an error.
pub fn compare_tables(
    stochastic: &ResultTable,
    exact: &ResultTable,
    threshold: f64,
    force: bool,
) -> CliResult<CompareReport> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(CliError::validation(format!(
            "threshold {threshold} must be positive"
        )));
    }
    let hashes_match = stochastic.metadata.model_hash == exact.metadata.model_hash;
    if !hashes_match && !force {
        return Err(CliError::validation(format!(
            "model hashes differ ({} vs {}); the tables describe different \
             experiments. Pass --force to compare anyway.",
            stochastic.metadata.model_hash, exact.metadata.model_hash
        )));
    }

    let mut reference: BTreeMap<(String, u64), &Row> = BTreeMap::new();
    for row in &exact.rows {
        reference.insert(row_key(row), row);
    }

    let mut rows = Vec::with_capacity(stochastic.rows.len());
    let mut unmatched: Vec<String> = Vec::new();
    for row in &stochastic.rows {
        match reference.remove(&row_key(row)) {
            Some(reference_row) => rows.push(CompareRow {
                observable_id: row.observable_id.clone(),
                t: row.t,
                z_re: z_score(row.re - reference_row.re, row.stderr_re),
                z_im: z_score(row.im - reference_row.im, row.stderr_im),
            }),
            None => unmatched.push(format!("{} at t = {}", row.observable_id, row.t)),
        }
    }
    for ((id, t_bits), _) in &reference {
        unmatched.push(format!("{id} at t = {} (reference only)", f64::from_bits(*t_bits)));
    }
    if !unmatched.is_empty() {
        return Err(CliError::validation(format!(
            "tables do not share a schema; unmatched rows: {}",
            unmatched.join(", ")
        )));
    }
    if rows.is_empty() {
        return Err(CliError::validation("no rows to compare"));
    }

    let max_z = rows.iter().map(CompareRow::z).fold(0.0, f64::max);
    Ok(CompareReport {
        threshold,
        max_z,
        pass: max_z <= threshold,
        model_hash_match: hashes_match,
        forced: force,
        rows,
    })
}
