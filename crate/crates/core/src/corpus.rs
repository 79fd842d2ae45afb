//! Line-delimited corpus and checker-output files.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{CheckerOutput, EvidenceSpan, LabelDistribution, NeutralType, NliLabel, RagInstance};

/// Supported corpus encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    /// One JSON object per line.
    #[default]
    Jsonl,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(Error::Config(format!("unknown corpus format {other:?}"))),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Iterates non-blank lines with their 1-based line numbers.
fn records(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((idx + 1, line));
        }
    }
    Ok(out)
}

/// Loads and validates a corpus file. Any malformed record rejects the whole
/// file.
pub fn load_instances(path: &Path, format: CorpusFormat) -> Result<Vec<RagInstance>> {
    match format {
        CorpusFormat::Jsonl => load_jsonl(path),
    }
}

fn load_jsonl(path: &Path) -> Result<Vec<RagInstance>> {
    let mut instances = Vec::new();
    let mut ids = HashSet::new();
    let mut claim_ids = HashSet::new();
    for (line_no, line) in records(path)? {
        let mut instance: RagInstance =
            serde_json::from_str(&line).map_err(|e| Error::schema(path, line_no, e.to_string()))?;
        for claim in instance
            .claims
            .iter_mut()
            .chain(instance.reference_claims.iter_mut().flatten())
        {
            claim.instance_id = instance.id.clone();
        }
        instance
            .check_invariants()
            .map_err(|msg| Error::schema(path, line_no, msg))?;
        if !ids.insert(instance.id.clone()) {
            return Err(Error::DuplicateId {
                kind: "instance",
                id: instance.id,
            });
        }
        for claim in instance.all_claims() {
            if !claim_ids.insert(claim.claim_id.clone()) {
                return Err(Error::DuplicateId {
                    kind: "claim",
                    id: claim.claim_id.clone(),
                });
            }
        }
        instances.push(instance);
    }
    Ok(instances)
}

/// Canonical single-line encoding of an instance.
pub fn instance_to_line(instance: &RagInstance) -> String {
    serde_json::to_string(instance).expect("instance serialization is infallible")
}

pub fn write_instances(path: &Path, instances: &[RagInstance]) -> Result<()> {
    let mut buf = String::new();
    for instance in instances {
        buf.push_str(&instance_to_line(instance));
        buf.push('\n');
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize)]
struct RawProb {
    #[serde(rename = "Entail")]
    entail: f64,
    #[serde(rename = "Neutral")]
    neutral: f64,
    #[serde(rename = "Contradict")]
    contradict: f64,
}

/// The strict JSON verdict object a checker emits for one claim.
#[derive(Debug, Deserialize)]
pub(crate) struct CheckerReply {
    label: String,
    prob: RawProb,
    #[serde(default)]
    neutral_type: Option<String>,
    #[serde(default)]
    rationale: Option<String>,
    #[serde(default)]
    spans: Vec<EvidenceSpan>,
    #[serde(default)]
    degraded: bool,
}

/// How off-normalized `prob` objects are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ProbPolicy {
    /// Renormalize inside the tolerance band, reject outside it.
    Banded,
    /// Renormalize any non-negative, non-zero vector.
    Lenient,
}

impl CheckerReply {
    pub(crate) fn into_output(
        self,
        checker_id: &str,
        claim_id: &str,
        policy: ProbPolicy,
        warnings: &mut Vec<String>,
    ) -> Result<CheckerOutput> {
        let label: NliLabel = self.label.parse()?;
        let RawProb {
            entail,
            neutral,
            contradict,
        } = self.prob;
        let dist = match policy {
            ProbPolicy::Banded => {
                let (dist, renormed) = LabelDistribution::from_noisy(entail, neutral, contradict)?;
                if renormed {
                    warnings.push(format!(
                        "{checker_id}/{claim_id}: renormalized distribution summing to {}",
                        entail + neutral + contradict
                    ));
                }
                dist
            }
            ProbPolicy::Lenient => {
                let raw = [entail, neutral, contradict];
                let sum: f64 = raw.iter().sum();
                if raw.iter().any(|p| !p.is_finite() || *p < 0.0) || sum <= 0.0 {
                    return Err(Error::InvalidDistribution(format!(
                        "unusable probabilities {raw:?}"
                    )));
                }
                let (dist, renormed) = LabelDistribution::from_noisy(entail, neutral, contradict)
                    .unwrap_or_else(|_| (LabelDistribution::from_scores(raw), true));
                if renormed {
                    warnings.push(format!(
                        "{checker_id}/{claim_id}: renormalized distribution summing to {sum}"
                    ));
                }
                dist
            }
        };
        let neutral_type = match self.neutral_type.as_deref() {
            None => None,
            Some("insufficient") => Some(NeutralType::Insufficient),
            Some("irrelevant") => Some(NeutralType::Irrelevant),
            Some(other) => {
                warnings.push(format!(
                    "{checker_id}/{claim_id}: neutral_type {other:?} coerced to \"insufficient\""
                ));
                Some(NeutralType::Insufficient)
            }
        };
        Ok(CheckerOutput {
            checker_id: checker_id.to_string(),
            claim_id: claim_id.to_string(),
            label,
            dist,
            neutral_type,
            rationale: self.rationale,
            spans: self.spans,
            degraded: self.degraded,
        })
    }
}

#[derive(Debug, Deserialize)]
struct CheckerRecord {
    checker_id: String,
    claim_id: String,
    #[serde(flatten)]
    reply: CheckerReply,
}

/// Checker outputs read from a file, with renormalization warnings.
#[derive(Debug, Clone, Default)]
pub struct LoadedOutputs {
    pub outputs: Vec<CheckerOutput>,
    pub warnings: Vec<String>,
}

/// Reads a checker-output file: the strict verdict schema per line plus
/// `checker_id` and `claim_id`.
pub fn load_checker_outputs(path: &Path) -> Result<LoadedOutputs> {
    let mut loaded = LoadedOutputs::default();
    let mut seen = HashSet::new();
    for (line_no, line) in records(path)? {
        let record: CheckerRecord =
            serde_json::from_str(&line).map_err(|e| Error::schema(path, line_no, e.to_string()))?;
        if !seen.insert((record.checker_id.clone(), record.claim_id.clone())) {
            return Err(Error::DuplicateId {
                kind: "checker output",
                id: format!("{}/{}", record.checker_id, record.claim_id),
            });
        }
        let output = record
            .reply
            .into_output(
                &record.checker_id,
                &record.claim_id,
                ProbPolicy::Banded,
                &mut loaded.warnings,
            )
            .map_err(|e| Error::schema(path, line_no, e.to_string()))?;
        loaded.outputs.push(output);
    }
    Ok(loaded)
}

pub fn write_checker_outputs(path: &Path, outputs: &[CheckerOutput]) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for out in outputs {
        let line = serde_json::to_string(out).expect("checker output serialization is infallible");
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
