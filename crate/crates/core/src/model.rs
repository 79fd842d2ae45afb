//! Canonical data model: RAG instances, claims, NLI labels and distributions,
//! checker outputs, and the per-claim fused result.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum distance of a distribution's sum from 1 for it to count as normalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Distributions whose sum is off by at most this much are renormalized with a
/// warning instead of rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-3;

/// Three-way NLI label. The derived ordering (Entail < Neutral < Contradict) is
/// the canonical serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NliLabel {
    Entail,
    Neutral,
    Contradict,
}

impl NliLabel {
    pub const ALL: [NliLabel; 3] = [NliLabel::Entail, NliLabel::Neutral, NliLabel::Contradict];

    /// Preference order used to break exact ties in an argmax.
    pub const TIE_BREAK: [NliLabel; 3] = [NliLabel::Neutral, NliLabel::Contradict, NliLabel::Entail];

    pub fn index(self) -> usize {
        match self {
            NliLabel::Entail => 0,
            NliLabel::Neutral => 1,
            NliLabel::Contradict => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NliLabel::Entail => "Entail",
            NliLabel::Neutral => "Neutral",
            NliLabel::Contradict => "Contradict",
        }
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Entail" => Ok(NliLabel::Entail),
            "Neutral" => Ok(NliLabel::Neutral),
            "Contradict" => Ok(NliLabel::Contradict),
            other => Err(Error::InvalidDistribution(format!("unknown label {other:?}"))),
        }
    }
}

/// Argmax over three label scores with the conservative tie-break
/// (Neutral, then Contradict, then Entail).
pub fn argmax_label(scores: [f64; 3]) -> NliLabel {
    let mut best = NliLabel::TIE_BREAK[0];
    for label in &NliLabel::TIE_BREAK[1..] {
        if scores[label.index()] > scores[best.index()] {
            best = *label;
        }
    }
    best
}

/// Probability distribution over the three NLI labels.
///
/// Serialized as `{"Entail": .., "Neutral": .., "Contradict": ..}`, the `prob`
/// object of the checker wire format. Constructors enforce the invariants; the
/// fields stay public so that externally produced values can be inspected by
/// [`validate_checker_outputs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    #[serde(rename = "Entail")]
    pub entail: f64,
    #[serde(rename = "Neutral")]
    pub neutral: f64,
    #[serde(rename = "Contradict")]
    pub contradict: f64,
}

impl LabelDistribution {
    /// Strict constructor: each component in [0,1] and the sum within
    /// [`NORMALIZATION_TOLERANCE`] of 1.
    pub fn new(entail: f64, neutral: f64, contradict: f64) -> Result<Self> {
        let dist = LabelDistribution {
            entail,
            neutral,
            contradict,
        };
        dist.check_components()?;
        let sum = dist.sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "components sum to {sum}, expected 1"
            )));
        }
        Ok(dist)
    }

    /// Accepts float-noisy model output. Sums within [`RENORMALIZE_TOLERANCE`]
    /// of 1 are rescaled; the flag reports whether rescaling was needed beyond
    /// the strict tolerance.
    pub fn from_noisy(entail: f64, neutral: f64, contradict: f64) -> Result<(Self, bool)> {
        let raw = LabelDistribution {
            entail,
            neutral,
            contradict,
        };
        raw.check_components()?;
        let sum = raw.sum();
        if (sum - 1.0).abs() <= NORMALIZATION_TOLERANCE {
            return Ok((raw, false));
        }
        if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "components sum to {sum}, outside the renormalization band"
            )));
        }
        Ok((raw.scaled(sum), true))
    }

    /// Normalizes arbitrary non-negative scores. All-zero input yields the
    /// uniform distribution.
    pub fn from_scores(scores: [f64; 3]) -> Self {
        let sum: f64 = scores.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            let third = 1.0 / 3.0;
            return LabelDistribution {
                entail: third,
                neutral: third,
                contradict: third,
            };
        }
        LabelDistribution {
            entail: scores[0] / sum,
            neutral: scores[1] / sum,
            contradict: scores[2] / sum,
        }
    }

    fn scaled(self, sum: f64) -> Self {
        LabelDistribution {
            entail: self.entail / sum,
            neutral: self.neutral / sum,
            contradict: self.contradict / sum,
        }
    }

    fn check_components(&self) -> Result<()> {
        for (label, p) in NliLabel::ALL.iter().zip(self.as_array()) {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution(format!(
                    "{label} probability {p} outside [0,1]"
                )));
            }
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.entail + self.neutral + self.contradict
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.entail, self.neutral, self.contradict]
    }

    pub fn get(&self, label: NliLabel) -> f64 {
        self.as_array()[label.index()]
    }

    pub fn argmax(&self) -> NliLabel {
        argmax_label(self.as_array())
    }

    pub fn is_normalized(&self) -> bool {
        self.as_array().iter().all(|p| (0.0..=1.0).contains(p))
            && (self.sum() - 1.0).abs() <= NORMALIZATION_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Passage {
    pub doc_id: String,
    pub text: String,
}

/// Subject-relation-object form of a claim. Serialized as a 3-element array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[String; 3]", into = "[String; 3]")]
pub struct Spo {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl From<[String; 3]> for Spo {
    fn from([subject, relation, object]: [String; 3]) -> Self {
        Spo {
            subject,
            relation,
            object,
        }
    }
}

impl From<Spo> for [String; 3] {
    fn from(spo: Spo) -> Self {
        [spo.subject, spo.relation, spo.object]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub claim_id: String,
    /// Filled from the enclosing instance on load; not part of the wire record.
    #[serde(skip)]
    pub instance_id: String,
    pub text: String,
    pub spo: Option<Spo>,
    pub gold_label: Option<NliLabel>,
}

impl Claim {
    pub fn new(claim_id: impl Into<String>, instance_id: impl Into<String>, text: impl Into<String>) -> Self {
        Claim {
            claim_id: claim_id.into(),
            instance_id: instance_id.into(),
            text: text.into(),
            spo: None,
            gold_label: None,
        }
    }

    pub fn with_spo(mut self, subject: &str, relation: &str, object: &str) -> Self {
        self.spo = Some(Spo {
            subject: subject.to_string(),
            relation: relation.to_string(),
            object: object.to_string(),
        });
        self
    }

    pub fn with_gold(mut self, label: NliLabel) -> Self {
        self.gold_label = Some(label);
        self
    }
}

/// One evaluation unit: question, retrieved passages, generated answer and its
/// claims, plus optional reference claims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RagInstance {
    pub id: String,
    /// Dataset grouping key used for macro-averaging across datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub question: String,
    /// Instances flagged context-free may carry an empty passage list.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub context_free: bool,
    pub passages: Vec<Passage>,
    pub answer: String,
    pub claims: Vec<Claim>,
    pub reference_claims: Option<Vec<Claim>>,
}

impl RagInstance {
    pub fn passage_ids(&self) -> BTreeSet<&str> {
        self.passages.iter().map(|p| p.doc_id.as_str()).collect()
    }

    /// Answer claims followed by reference claims.
    pub fn all_claims(&self) -> impl Iterator<Item = &Claim> {
        self.claims
            .iter()
            .chain(self.reference_claims.iter().flatten())
    }

    /// Checks the per-instance invariants, returning a message for the first
    /// violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("instance id is empty".into());
        }
        if self.passages.is_empty() && !self.context_free {
            return Err(format!(
                "instance {:?} has no passages and is not flagged context_free",
                self.id
            ));
        }
        let mut seen = BTreeSet::new();
        for passage in &self.passages {
            if !seen.insert(passage.doc_id.as_str()) {
                return Err(format!("duplicate doc_id {:?}", passage.doc_id));
            }
            if passage.text.trim().is_empty() {
                return Err(format!("passage {:?} has empty text", passage.doc_id));
            }
        }
        for claim in self.all_claims() {
            if claim.claim_id.is_empty() {
                return Err("claim with empty claim_id".into());
            }
            if claim.instance_id != self.id {
                return Err(format!(
                    "claim {:?} belongs to instance {:?}, not {:?}",
                    claim.claim_id, claim.instance_id, self.id
                ));
            }
            if claim.text.trim().is_empty() {
                return Err(format!("claim {:?} has empty text", claim.claim_id));
            }
            if let Some(spo) = &claim.spo {
                if [&spo.subject, &spo.relation, &spo.object]
                    .iter()
                    .any(|part| part.trim().is_empty())
                {
                    return Err(format!("claim {:?} has an empty SPO component", claim.claim_id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeutralType {
    Insufficient,
    Irrelevant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSpan {
    pub doc_id: String,
    pub quote: String,
}

/// One checker's verdict on one claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerOutput {
    pub checker_id: String,
    pub claim_id: String,
    pub label: NliLabel,
    #[serde(rename = "prob")]
    pub dist: LabelDistribution,
    pub neutral_type: Option<NeutralType>,
    pub rationale: Option<String>,
    pub spans: Vec<EvidenceSpan>,
    /// Set when the reply could not be parsed and a Neutral placeholder was
    /// substituted.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degraded: bool,
}

impl CheckerOutput {
    /// Builds an output whose label is the canonical argmax of `dist`.
    pub fn from_dist(checker_id: &str, claim_id: &str, dist: LabelDistribution) -> Self {
        let label = dist.argmax();
        CheckerOutput {
            checker_id: checker_id.to_string(),
            claim_id: claim_id.to_string(),
            label,
            dist,
            neutral_type: (label == NliLabel::Neutral).then_some(NeutralType::Insufficient),
            rationale: None,
            spans: Vec::new(),
            degraded: false,
        }
    }
}

/// Per-claim output of the verification pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedClaimResult {
    pub claim_id: String,
    pub instance_id: String,
    /// Ensemble distribution of the textual checkers.
    pub nli: LabelDistribution,
    pub p_nli: f64,
    pub p_kge: Option<f64>,
    pub s_text: Option<f64>,
    /// Absent when the claim is KG-uncovered.
    pub s_kg: Option<f64>,
    pub p_star: f64,
    pub fused_verdict: NliLabel,
    pub supported: bool,
    pub safety_flag: bool,
    pub gold_label: Option<NliLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DanglingClaim {
        checker_id: String,
        claim_id: String,
    },
    NotNormalized {
        checker_id: String,
        claim_id: String,
        sum: f64,
    },
    ComponentOutOfRange {
        checker_id: String,
        claim_id: String,
        label: NliLabel,
        value: f64,
    },
    LabelArgmaxMismatch {
        checker_id: String,
        claim_id: String,
        label: NliLabel,
        argmax: NliLabel,
    },
    NeutralTypeOnNonNeutral {
        checker_id: String,
        claim_id: String,
        label: NliLabel,
    },
    UnknownSpanDoc {
        checker_id: String,
        claim_id: String,
        doc_id: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingClaim { checker_id, claim_id } => {
                write!(f, "{checker_id}/{claim_id}: claim_id not in corpus")
            }
            Violation::NotNormalized { checker_id, claim_id, sum } => {
                write!(f, "{checker_id}/{claim_id}: distribution sums to {sum}")
            }
            Violation::ComponentOutOfRange {
                checker_id,
                claim_id,
                label,
                value,
            } => write!(f, "{checker_id}/{claim_id}: {label} probability {value} outside [0,1]"),
            Violation::LabelArgmaxMismatch {
                checker_id,
                claim_id,
                label,
                argmax,
            } => write!(f, "{checker_id}/{claim_id}: label {label} but argmax is {argmax}"),
            Violation::NeutralTypeOnNonNeutral {
                checker_id,
                claim_id,
                label,
            } => write!(f, "{checker_id}/{claim_id}: neutral_type set on {label} output"),
            Violation::UnknownSpanDoc {
                checker_id,
                claim_id,
                doc_id,
            } => write!(f, "{checker_id}/{claim_id}: span cites unknown doc_id {doc_id:?}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(first) => Err(Error::Validation {
                count: self.violations.len(),
                first: first.to_string(),
            }),
        }
    }
}

/// Lists every invariant violation in `outputs` relative to `corpus`. Answer
/// and reference claims are both valid targets.
pub fn validate_checker_outputs(outputs: &[CheckerOutput], corpus: &[RagInstance]) -> ValidationReport {
    let mut doc_ids: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for instance in corpus {
        let ids = instance.passage_ids();
        for claim in instance.all_claims() {
            doc_ids.insert(claim.claim_id.as_str(), ids.clone());
        }
    }

    let mut violations = Vec::new();
    for out in outputs {
        let ids = (out.checker_id.clone(), out.claim_id.clone());
        let Some(passages) = doc_ids.get(out.claim_id.as_str()) else {
            violations.push(Violation::DanglingClaim {
                checker_id: ids.0,
                claim_id: ids.1,
            });
            continue;
        };
        let mut in_range = true;
        for label in NliLabel::ALL {
            let value = out.dist.get(label);
            if !(0.0..=1.0).contains(&value) {
                in_range = false;
                violations.push(Violation::ComponentOutOfRange {
                    checker_id: ids.0.clone(),
                    claim_id: ids.1.clone(),
                    label,
                    value,
                });
            }
        }
        let sum = out.dist.sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            violations.push(Violation::NotNormalized {
                checker_id: ids.0.clone(),
                claim_id: ids.1.clone(),
                sum,
            });
        }
        let argmax = out.dist.argmax();
        if in_range && out.label != argmax {
            violations.push(Violation::LabelArgmaxMismatch {
                checker_id: ids.0.clone(),
                claim_id: ids.1.clone(),
                label: out.label,
                argmax,
            });
        }
        if out.neutral_type.is_some() && out.label != NliLabel::Neutral {
            violations.push(Violation::NeutralTypeOnNonNeutral {
                checker_id: ids.0.clone(),
                claim_id: ids.1.clone(),
                label: out.label,
            });
        }
        for span in &out.spans {
            if !passages.contains(span.doc_id.as_str()) {
                violations.push(Violation::UnknownSpanDoc {
                    checker_id: ids.0.clone(),
                    claim_id: ids.1.clone(),
                    doc_id: span.doc_id.clone(),
                });
            }
        }
    }
    ValidationReport { violations }
}
