use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{CheckerOutput, Claim, EvidenceSpan, LabelDistribution, NeutralType, NliLabel, Passage};

use super::CheckerBackend;

#[derive(Debug, Clone)]
struct FixtureEntry {
    dist: LabelDistribution,
    neutral_type: Option<NeutralType>,
    rationale: Option<String>,
    spans: Vec<EvidenceSpan>,
}

/// Precomputed distributions keyed by `(checker_id, claim_id)`.
#[derive(Debug, Clone, Default)]
pub struct FixtureTable {
    entries: HashMap<(String, String), FixtureEntry>,
}

impl FixtureTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, checker_id: &str, claim_id: &str, dist: LabelDistribution) {
        self.entries.insert(
            (checker_id.to_string(), claim_id.to_string()),
            FixtureEntry {
                dist,
                neutral_type: None,
                rationale: None,
                spans: Vec::new(),
            },
        );
    }

    pub fn insert_output(&mut self, output: &CheckerOutput) {
        self.entries.insert(
            (output.checker_id.clone(), output.claim_id.clone()),
            FixtureEntry {
                dist: output.dist,
                neutral_type: output.neutral_type,
                rationale: output.rationale.clone(),
                spans: output.spans.clone(),
            },
        );
    }

    pub fn from_outputs<'a>(outputs: impl IntoIterator<Item = &'a CheckerOutput>) -> Self {
        let mut table = Self::new();
        for out in outputs {
            table.insert_output(out);
        }
        table
    }

    /// Distinct checker ids present in the table, sorted.
    pub fn checker_ids(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|(c, _)| c.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Replays tabled distributions. Labels are recomputed as the canonical argmax
/// and spans citing passages outside the given set are dropped.
#[derive(Debug, Clone)]
pub struct FixtureBackend {
    checker_id: String,
    table: Arc<FixtureTable>,
}

impl FixtureBackend {
    pub fn new(checker_id: impl Into<String>, table: Arc<FixtureTable>) -> Self {
        FixtureBackend {
            checker_id: checker_id.into(),
            table,
        }
    }
}

impl CheckerBackend for FixtureBackend {
    fn checker_id(&self) -> &str {
        &self.checker_id
    }

    fn classify(&self, claim: &Claim, passages: &[Passage]) -> Result<CheckerOutput> {
        let key = (self.checker_id.clone(), claim.claim_id.clone());
        let entry = self.table.entries.get(&key).ok_or_else(|| Error::MissingFixture {
            checker_id: key.0.clone(),
            claim_id: key.1.clone(),
        })?;
        let label = entry.dist.argmax();
        let neutral_type = if label == NliLabel::Neutral {
            entry.neutral_type
        } else {
            None
        };
        let known: BTreeSet<&str> = passages.iter().map(|p| p.doc_id.as_str()).collect();
        let spans = entry
            .spans
            .iter()
            .filter(|s| known.contains(s.doc_id.as_str()))
            .cloned()
            .collect();
        Ok(CheckerOutput {
            checker_id: self.checker_id.clone(),
            claim_id: claim.claim_id.clone(),
            label,
            dist: entry.dist,
            neutral_type,
            rationale: entry.rationale.clone(),
            spans,
            degraded: false,
        })
    }
}
