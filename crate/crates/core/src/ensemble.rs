//! F1-weighted checker ensemble.
//!
//! Each checker's reliability for a class is its dev-set F1 on that class,
//! normalized across checkers. The ensemble score for a class is the
//! reliability-weighted sum of the checkers' probabilities for that class; the
//! three scores are then renormalized into a distribution.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CheckerOutput, LabelDistribution, NliLabel};

/// Weights below this are treated as zero.
pub const WEIGHT_FLOOR: f64 = 1e-12;

pub const F1_TABLE_HEADER: [&str; 4] = ["checker_id", "f1_entail", "f1_neutral", "f1_contradict"];

/// Per-checker, per-class F1 scores in [0,1], ordered by checker id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassF1Table {
    pub rows: BTreeMap<String, [f64; 3]>,
}

impl ClassF1Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, checker_id: &str, f1: [f64; 3]) -> Result<()> {
        if f1.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config(format!(
                "F1 values for {checker_id:?} must lie in [0,1], got {f1:?}"
            )));
        }
        if self.rows.insert(checker_id.to_string(), f1).is_some() {
            return Err(Error::DuplicateId {
                kind: "checker",
                id: checker_id.to_string(),
            });
        }
        Ok(())
    }

    /// Equal reliability for every checker.
    pub fn uniform<'a>(checker_ids: impl IntoIterator<Item = &'a str>) -> Self {
        ClassF1Table {
            rows: checker_ids.into_iter().map(|id| (id.to_string(), [1.0; 3])).collect(),
        }
    }

    /// Reads `checker_id,f1_entail,f1_neutral,f1_contradict` CSV.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, 1, e))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(path, 1, e))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != F1_TABLE_HEADER {
            return Err(Error::schema(
                path,
                1,
                format!("expected header {:?}, got {header:?}", F1_TABLE_HEADER.join(",")),
            ));
        }
        let mut table = ClassF1Table::new();
        for (idx, record) in reader.records().enumerate() {
            let line = idx + 2;
            let record = record.map_err(|e| csv_error(path, line, e))?;
            let mut f1 = [0.0; 3];
            for (slot, field) in f1.iter_mut().zip(record.iter().skip(1)) {
                *slot = field
                    .parse()
                    .map_err(|_| Error::schema(path, line, format!("not a number: {field:?}")))?;
            }
            table
                .insert(&record[0], f1)
                .map_err(|e| Error::schema(path, line, e.to_string()))?;
        }
        if table.rows.is_empty() {
            return Err(Error::schema(path, 1, "F1 table has no checker rows"));
        }
        Ok(table)
    }
}

fn csv_error(path: &Path, line: usize, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::schema(path, line, format!("{other:?}")),
    }
}

/// Class-specific reliability weights; each class column sums to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    weights: BTreeMap<String, [f64; 3]>,
}

impl WeightMatrix {
    pub fn get(&self, checker_id: &str, label: NliLabel) -> Option<f64> {
        self.weights.get(checker_id).map(|w| w[label.index()])
    }

    pub fn checker_ids(&self) -> impl Iterator<Item = &str> {
        self.weights.keys().map(String::as_str)
    }

    pub fn rows(&self) -> &BTreeMap<String, [f64; 3]> {
        &self.weights
    }

    pub fn column_sum(&self, label: NliLabel) -> f64 {
        self.weights.values().map(|w| w[label.index()]).sum()
    }
}

/// `w[m][y] = F1[m][y] / sum over m' of F1[m'][y]`.
pub fn compute_weights(table: &ClassF1Table) -> Result<WeightMatrix> {
    if table.rows.is_empty() {
        return Err(Error::EmptyInput("F1 table"));
    }
    let mut totals = [0.0; 3];
    for f1 in table.rows.values() {
        for (t, v) in totals.iter_mut().zip(f1) {
            *t += v;
        }
    }
    for label in NliLabel::ALL {
        if totals[label.index()] <= 0.0 {
            return Err(Error::DegenerateClass(label));
        }
    }
    let weights = table
        .rows
        .iter()
        .map(|(id, f1)| {
            let mut w = [0.0; 3];
            for k in 0..3 {
                let v = f1[k] / totals[k];
                w[k] = if v < WEIGHT_FLOOR { 0.0 } else { v };
            }
            (id.clone(), w)
        })
        .collect();
    Ok(WeightMatrix { weights })
}

/// Ensemble output for one claim: the raw per-class weighted scores and the
/// renormalized distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleScore {
    pub raw: [f64; 3],
    pub dist: LabelDistribution,
}

impl EnsembleScore {
    /// Entailment probability of the textual ensemble.
    pub fn p_nli(&self) -> f64 {
        self.dist.entail
    }
}

/// Combines one claim's checker outputs. Summation runs in checker-id order, so
/// the result does not depend on the order of `outputs`.
pub fn ensemble_score(outputs: &[CheckerOutput], weights: &WeightMatrix) -> Result<EnsembleScore> {
    let Some(first) = outputs.first() else {
        return Err(Error::EmptyInput("checker outputs"));
    };
    let claim_id = &first.claim_id;
    let mismatch = |message: String| Error::CheckerSetMismatch {
        claim_id: claim_id.clone(),
        message,
    };

    let mut by_checker: BTreeMap<&str, &CheckerOutput> = BTreeMap::new();
    for out in outputs {
        if &out.claim_id != claim_id {
            return Err(mismatch(format!("output for other claim {:?}", out.claim_id)));
        }
        if by_checker.insert(out.checker_id.as_str(), out).is_some() {
            return Err(mismatch(format!("duplicate output from {:?}", out.checker_id)));
        }
    }
    let expected: BTreeSet<&str> = weights.checker_ids().collect();
    let got: BTreeSet<&str> = by_checker.keys().copied().collect();
    if let Some(missing) = expected.difference(&got).next() {
        return Err(mismatch(format!("missing output from weighted checker {missing:?}")));
    }
    if let Some(extra) = got.difference(&expected).next() {
        return Err(mismatch(format!("output from unweighted checker {extra:?}")));
    }

    let mut raw = [0.0; 3];
    for (id, w) in &weights.weights {
        let p = by_checker[id.as_str()].dist.as_array();
        for k in 0..3 {
            raw[k] += w[k] * p[k];
        }
    }
    Ok(EnsembleScore {
        raw,
        dist: LabelDistribution::from_scores(raw),
    })
}

/// Canonical argmax of an ensemble distribution.
pub fn ensemble_verdict(dist: &LabelDistribution) -> NliLabel {
    dist.argmax()
}
