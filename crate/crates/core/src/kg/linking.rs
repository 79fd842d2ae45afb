//! Claim-to-KG alignment by normalized string similarity.

use serde::{Deserialize, Serialize};

use crate::model::Claim;

use super::{KgStore, RelationMap};

pub const DEFAULT_THETA_LINK: f64 = 0.8;

/// Case-folds, removes punctuation and collapses whitespace.
pub fn fold(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn folded_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / longest as f64
}

/// `1 - levenshtein(fold(a), fold(b)) / max(|fold(a)|, |fold(b)|)`, with two
/// empty strings scoring 1.
pub fn string_similarity(a: &str, b: &str) -> f64 {
    folded_similarity(&fold(a), &fold(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
    pub s_text: f64,
}

/// KG triples aligned to one claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSet {
    pub claim_id: String,
    /// Canonical relation of the claim when the relation map knows it.
    pub canonical_relation: Option<String>,
    pub candidates: Vec<Candidate>,
    /// Max candidate alignment score; 0 without candidates.
    pub s_text_claim: f64,
    /// Subject and object each matched at least one entity.
    pub covered_node: bool,
    /// At least one candidate triple exists.
    pub covered_pair: bool,
}

impl AlignmentSet {
    pub fn empty(claim_id: &str) -> Self {
        AlignmentSet {
            claim_id: claim_id.to_string(),
            canonical_relation: None,
            candidates: Vec::new(),
            s_text_claim: 0.0,
            covered_node: false,
            covered_pair: false,
        }
    }
}

fn matching_entities(store: &KgStore, mention: &str, theta: f64) -> Vec<(u32, f64)> {
    let folded = fold(mention);
    store
        .folded_entities()
        .filter_map(|(idx, name)| {
            let sim = folded_similarity(&folded, name);
            (sim >= theta).then_some((idx, sim))
        })
        .collect()
}

/// Aligns a claim's SPO triple to existing KG triples.
///
/// Heads and tails are entities whose name similarity to the subject/object is
/// at least `theta_link`; relations are the relation map's images of the
/// claim's canonical relation. A candidate's text score is the mean of subject,
/// relation and object similarity, where the relation similarity is 1 because
/// the mapping is the relation match.
pub fn link_claim(claim: &Claim, store: &KgStore, rmap: &RelationMap, theta_link: f64) -> AlignmentSet {
    let mut alignment = AlignmentSet::empty(&claim.claim_id);
    let Some(spo) = &claim.spo else {
        return alignment;
    };
    let heads = matching_entities(store, &spo.subject, theta_link);
    let tails = matching_entities(store, &spo.object, theta_link);
    alignment.covered_node = !heads.is_empty() && !tails.is_empty();

    let Some(canonical) = rmap.canonicalize(&spo.relation) else {
        return alignment;
    };
    alignment.canonical_relation = Some(canonical.to_string());
    let mut relations: Vec<u32> = rmap
        .kg_relations(canonical)
        .filter_map(|name| store.relation_index(name))
        .collect();
    relations.sort_unstable();

    for &(h, sim_h) in &heads {
        for &r in &relations {
            for &(t, sim_t) in &tails {
                if store.contains_triple((h, r, t)) {
                    alignment.candidates.push(Candidate {
                        head: h,
                        relation: r,
                        tail: t,
                        s_text: (sim_h + 1.0 + sim_t) / 3.0,
                    });
                }
            }
        }
    }
    alignment.candidates.sort_by_key(|c| (c.head, c.relation, c.tail));
    alignment.covered_pair = !alignment.candidates.is_empty();
    alignment.s_text_claim = alignment
        .candidates
        .iter()
        .map(|c| c.s_text)
        .fold(0.0, f64::max);
    alignment
}
