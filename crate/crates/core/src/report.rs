//! Report files: `claims.jsonl`, `answers.jsonl` and `summary.json`.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::{AnswerDiagnostics, CorpusReport, MetricSummary};
use crate::error::{Error, Result};
use crate::fusion::Calibrator;
use crate::kg::KgCoverage;
use crate::model::FusedClaimResult;
use crate::pipeline::{PipelineRun, RunCounts};

pub const CLAIMS_FILE: &str = "claims.jsonl";
pub const ANSWERS_FILE: &str = "answers.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: RunConfig,
    pub calibrator: Calibrator,
    pub counts: RunCounts,
    pub kg_coverage: Option<KgCoverage>,
    pub metrics: CorpusReport,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn from_run(run: &PipelineRun) -> Self {
        Summary {
            config: run.config.clone(),
            calibrator: run.calibrator,
            counts: run.counts,
            kg_coverage: run.kg_coverage,
            metrics: run.summary.clone(),
            warnings: run.warnings.clone(),
        }
    }
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("report records serialize"));
        out.push('\n');
    }
    out
}

/// Refuses to overwrite existing report files unless `force` is set.
pub fn ensure_writable(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(Error::OutputExists(p.clone())),
        None => Ok(()),
    }
}

/// Writes `contents` to each path after creating `out_dir`.
pub fn write_files(out_dir: &Path, files: &[(PathBuf, String)], force: bool) -> Result<()> {
    let paths: Vec<PathBuf> = files.iter().map(|(p, _)| p.clone()).collect();
    ensure_writable(&paths, force)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (path, contents) in files {
        std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn claims_jsonl(run: &PipelineRun) -> String {
    jsonl(&run.claims)
}

pub fn answers_jsonl(run: &PipelineRun) -> String {
    jsonl(&run.answers)
}

pub fn summary_json(run: &PipelineRun) -> String {
    let mut s = serde_json::to_string_pretty(&Summary::from_run(run)).expect("summary serializes");
    s.push('\n');
    s
}

pub fn emit_reports(run: &PipelineRun, out_dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
    let files = vec![
        (out_dir.join(CLAIMS_FILE), claims_jsonl(run)),
        (out_dir.join(ANSWERS_FILE), answers_jsonl(run)),
        (out_dir.join(SUMMARY_FILE), summary_json(run)),
    ];
    write_files(out_dir, &files, force)?;
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::schema(path, idx + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn load_claim_results(path: &Path) -> Result<Vec<FusedClaimResult>> {
    read_jsonl(path)
}

pub fn load_answers(path: &Path) -> Result<Vec<AnswerDiagnostics>> {
    read_jsonl(path)
}

pub fn load_summary(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::schema(path, e.line(), e.to_string()))
}

fn pct(m: &MetricSummary) -> String {
    match m.mean {
        Some(v) => format!("{:6.1}%  (n={})", 100.0 * v, m.count),
        None => format!("{:>7}  (n=0)", "-"),
    }
}

/// Plain-text rendering of a summary.
pub fn render_summary(summary: &Summary) -> String {
    let m = &summary.metrics;
    let c = &summary.counts;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} answers, {} claims, {} reference claims, {} checkers",
        c.instances, c.claims, c.reference_claims, c.checkers
    );
    let rows: [(&str, &MetricSummary); 10] = [
        ("Faith", &m.faith),
        ("Halluc", &m.halluc),
        ("NotSupported", &m.not_supported_rate),
        ("ClaimRec", &m.claim_rec),
        ("CtxPrec", &m.ctx_prec),
        ("Claim P", &m.claim_precision),
        ("Claim R", &m.claim_recall),
        ("Claim F1", &m.claim_f1),
        ("SelfKnow", &m.self_know),
        ("SafetyErr", &m.safety_err),
    ];
    for (name, metric) in rows {
        let _ = writeln!(out, "  {name:<13}{}", pct(metric));
    }
    if let Some(cov) = summary.kg_coverage {
        let _ = writeln!(
            out,
            "KG coverage: node {:.1}%, pair {:.1}% ({} aligned, {} uncovered)",
            100.0 * cov.node,
            100.0 * cov.pair,
            c.kg_aligned_claims,
            c.kg_uncovered_claims
        );
    }
    if !summary.warnings.is_empty() {
        let _ = writeln!(out, "warnings:");
        for w in &summary.warnings {
            let _ = writeln!(out, "  {w}");
        }
    }
    out
}
