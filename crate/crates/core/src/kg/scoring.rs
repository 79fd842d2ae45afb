//! TransE plausibility, the combined KG consistency score, and coverage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{AlignmentSet, KgStore};

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `||e_h + r_r - e_t||_2`.
pub fn transe_distance(head: &[f64], relation: &[f64], tail: &[f64]) -> f64 {
    head.iter()
        .zip(relation)
        .zip(tail)
        .map(|((h, r), t)| {
            let d = h + r - t;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `sigmoid(-distance)`, in (0, 0.5]. Distances beyond the f64 range of the
/// logistic are floored at the smallest positive normal value.
pub fn plausibility_from_distance(distance: f64) -> f64 {
    sigmoid(-distance).max(f64::MIN_POSITIVE)
}

pub fn transe_plausibility(h: u32, r: u32, t: u32, store: &KgStore) -> f64 {
    plausibility_from_distance(transe_distance(
        store.entity_embedding(h),
        store.relation_embedding(r),
        store.entity_embedding(t),
    ))
}

/// Best TransE plausibility over the aligned candidates; `None` when the claim
/// is KG-uncovered.
pub fn claim_kge(alignment: &AlignmentSet, store: &KgStore) -> Option<f64> {
    alignment
        .candidates
        .iter()
        .map(|c| transe_plausibility(c.head, c.relation, c.tail, store))
        .reduce(f64::max)
}

/// `(1 - alpha) * p_kge + alpha * s_text`.
pub fn combine_kg(p_kge: f64, s_text: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * p_kge + alpha * s_text
}

pub fn kg_score(alignment: &AlignmentSet, store: &KgStore, alpha: f64) -> Option<f64> {
    claim_kge(alignment, store).map(|p| combine_kg(p, alignment.s_text_claim, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KgCoverage {
    pub node: f64,
    pub pair: f64,
}

/// Fractions of claims whose subject and object both matched entities (node)
/// and that have at least one aligned triple (pair).
pub fn kg_coverage(alignments: &[AlignmentSet]) -> Result<KgCoverage> {
    if alignments.is_empty() {
        return Err(Error::EmptyInput("alignments"));
    }
    let n = alignments.len() as f64;
    let node = alignments.iter().filter(|a| a.covered_node).count() as f64;
    let pair = alignments.iter().filter(|a| a.covered_pair).count() as f64;
    Ok(KgCoverage {
        node: node / n,
        pair: pair / n,
    })
}
