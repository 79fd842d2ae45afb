//! Deterministic lexical checker used where no NLI model is available.
//!
//! Rules, in order:
//! 1. no passages: `(0.05, 0.9, 0.05)`;
//! 2. a passage holding every claim token plus a negation marker next to one of
//!    the claim's relation tokens: `(0.1, 0.2, 0.7)`;
//! 3. otherwise, with `o` the fraction of claim tokens found anywhere in the
//!    passages: `(o, 1 - o, 0)` floored at 0.01 per class and renormalized.
//!
//! Tokens are case-folded whitespace tokens with edge punctuation trimmed and a
//! trailing plural/third-person `s` removed, so "treats" matches "treat".

use std::collections::BTreeSet;

use crate::error::Result;
use crate::model::{CheckerOutput, Claim, EvidenceSpan, LabelDistribution, NeutralType, NliLabel, Passage};

use super::CheckerBackend;

const NEGATIONS: [&str; 3] = ["not", "no", "never"];
const CLASS_FLOOR: f64 = 0.01;
const MAX_QUOTE_WORDS: usize = 25;

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let lower = raw.to_lowercase();
            let trimmed = lower.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                return None;
            }
            let stem = match trimmed.strip_suffix('s') {
                Some(base)
                    if trimmed.len() > 3
                        && base.ends_with(|c: char| c.is_alphanumeric() && c != 's') =>
                {
                    base
                }
                _ => trimmed,
            };
            Some(stem.to_string())
        })
        .collect()
}

fn is_negation(token: &str) -> bool {
    NEGATIONS.contains(&token) || token.ends_with("n't")
}

/// Relation tokens of a claim: the SPO relation when present, else the inner
/// tokens of the claim text.
fn relation_anchors(claim: &Claim, claim_tokens: &[String]) -> BTreeSet<String> {
    if let Some(spo) = &claim.spo {
        return tokenize(&spo.relation).into_iter().collect();
    }
    if claim_tokens.len() >= 3 {
        claim_tokens[1..claim_tokens.len() - 1].iter().cloned().collect()
    } else {
        claim_tokens.iter().cloned().collect()
    }
}

fn negates_anchor(tokens: &[String], anchors: &BTreeSet<String>) -> bool {
    tokens.iter().enumerate().any(|(i, tok)| {
        is_negation(tok)
            && (tokens.get(i + 1).is_some_and(|t| anchors.contains(t))
                || (i > 0 && anchors.contains(&tokens[i - 1])))
    })
}

fn quote(passage: &Passage) -> EvidenceSpan {
    EvidenceSpan {
        doc_id: passage.doc_id.clone(),
        quote: passage
            .text
            .split_whitespace()
            .take(MAX_QUOTE_WORDS)
            .collect::<Vec<_>>()
            .join(" "),
    }
}

#[derive(Debug, Clone)]
pub struct HeuristicBackend {
    checker_id: String,
}

impl HeuristicBackend {
    pub fn new(checker_id: impl Into<String>) -> Self {
        HeuristicBackend {
            checker_id: checker_id.into(),
        }
    }
}

impl CheckerBackend for HeuristicBackend {
    fn checker_id(&self) -> &str {
        &self.checker_id
    }

    fn classify(&self, claim: &Claim, passages: &[Passage]) -> Result<CheckerOutput> {
        let id = &self.checker_id;
        if passages.is_empty() {
            let mut out = CheckerOutput::from_dist(id, &claim.claim_id, LabelDistribution::new(0.05, 0.9, 0.05)?);
            out.rationale = Some("no passages".into());
            return Ok(out);
        }

        let claim_seq = tokenize(&claim.text);
        let claim_tokens: BTreeSet<String> = claim_seq.iter().cloned().collect();
        let anchors = relation_anchors(claim, &claim_seq);
        let claim_negated = negates_anchor(&claim_seq, &anchors);
        let passage_tokens: Vec<Vec<String>> = passages.iter().map(|p| tokenize(&p.text)).collect();

        if !claim_negated && !claim_tokens.is_empty() {
            let contradicting: Vec<EvidenceSpan> = passages
                .iter()
                .zip(&passage_tokens)
                .filter(|(_, toks)| {
                    let set: BTreeSet<&String> = toks.iter().collect();
                    claim_tokens.iter().all(|t| set.contains(t)) && negates_anchor(toks, &anchors)
                })
                .map(|(p, _)| quote(p))
                .collect();
            if !contradicting.is_empty() {
                let mut out =
                    CheckerOutput::from_dist(id, &claim.claim_id, LabelDistribution::new(0.1, 0.2, 0.7)?);
                out.rationale = Some("negated relation in passage".into());
                out.spans = contradicting;
                return Ok(out);
            }
        }

        let all: BTreeSet<&String> = passage_tokens.iter().flatten().collect();
        let hits = claim_tokens.iter().filter(|t| all.contains(t)).count();
        let overlap = if claim_tokens.is_empty() {
            0.0
        } else {
            hits as f64 / claim_tokens.len() as f64
        };
        let dist = LabelDistribution::from_scores([
            overlap.max(CLASS_FLOOR),
            (1.0 - overlap).max(CLASS_FLOOR),
            CLASS_FLOOR,
        ]);
        let mut out = CheckerOutput::from_dist(id, &claim.claim_id, dist);
        out.rationale = Some(format!("token overlap {hits}/{}", claim_tokens.len()));
        match out.label {
            NliLabel::Entail => {
                let per_passage: Vec<usize> = passage_tokens
                    .iter()
                    .map(|toks| {
                        let set: BTreeSet<&String> = toks.iter().collect();
                        claim_tokens.iter().filter(|t| set.contains(t)).count()
                    })
                    .collect();
                let best = per_passage.iter().copied().max().unwrap_or(0);
                out.spans = passages
                    .iter()
                    .zip(per_passage)
                    .filter(|(_, n)| *n == best && best > 0)
                    .map(|(p, _)| quote(p))
                    .collect();
            }
            NliLabel::Neutral => {
                out.neutral_type = Some(if hits == 0 {
                    NeutralType::Irrelevant
                } else {
                    NeutralType::Insufficient
                });
            }
            NliLabel::Contradict => {}
        }
        Ok(out)
    }
}
