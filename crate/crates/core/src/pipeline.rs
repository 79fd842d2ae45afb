//! End-to-end orchestration: checker outputs, ensemble, KG scoring, fusion and
//! diagnostics.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backends::{classify_all, CheckerBackend, FixtureBackend, FixtureTable, HeuristicBackend, RemoteBackend};
use crate::config::{CheckerKind, RunConfig};
use crate::corpus::{load_checker_outputs, load_instances, CorpusFormat};
use crate::diagnostics::{corpus_aggregate, diagnose_answer, AnswerDiagnostics, AnswerInputs, CorpusReport};
use crate::ensemble::{compute_weights, ensemble_score, ClassF1Table, WeightMatrix};
use crate::error::{Error, Result};
use crate::fusion::{fuse, fused_verdict, support_decision, CalibrationMode, Calibrator};
use crate::kg::{claim_kge, combine_kg, kg_coverage, link_claim, load_kg_dir, AlignmentSet, KgCoverage, KgStore, RelationMap};
use crate::model::{validate_checker_outputs, CheckerOutput, Claim, FusedClaimResult, NliLabel, Passage, RagInstance};

/// A checker ready to classify, plus an optional twin for empty-context calls.
pub struct LoadedChecker {
    pub backend: Box<dyn CheckerBackend>,
    pub empty_context: Option<Box<dyn CheckerBackend>>,
    /// Remote checkers bound their own concurrency.
    pub max_in_flight: Option<usize>,
}

/// Warnings name `path` as written in the config, so reports do not depend on
/// the working directory.
fn fixture_backend(
    id: &str,
    cfg: &RunConfig,
    path: &std::path::Path,
    corpus: &[RagInstance],
    warnings: &mut Vec<String>,
) -> Result<Box<dyn CheckerBackend>> {
    let loaded = load_checker_outputs(&cfg.resolve(path))?;
    warnings.extend(loaded.warnings.into_iter().map(|w| format!("{}: {w}", path.display())));
    validate_checker_outputs(&loaded.outputs, corpus).into_result()?;
    let table = FixtureTable::from_outputs(loaded.outputs.iter().filter(|o| o.checker_id == id));
    Ok(Box::new(FixtureBackend::new(id, Arc::new(table))))
}

pub fn load_checkers(cfg: &RunConfig, corpus: &[RagInstance], warnings: &mut Vec<String>) -> Result<Vec<LoadedChecker>> {
    cfg.checkers
        .iter()
        .map(|spec| {
            Ok(match spec.kind {
                CheckerKind::Fixture => {
                    let outputs = spec.outputs.as_ref().expect("validated config");
                    let empty_context = match (&spec.empty_context_outputs, cfg.self_know) {
                        (Some(p), true) => Some(fixture_backend(&spec.id, cfg, p, corpus, warnings)?),
                        _ => None,
                    };
                    LoadedChecker {
                        backend: fixture_backend(&spec.id, cfg, outputs, corpus, warnings)?,
                        empty_context,
                        max_in_flight: None,
                    }
                }
                CheckerKind::Heuristic => LoadedChecker {
                    backend: Box::new(HeuristicBackend::new(spec.id.clone())),
                    empty_context: Some(Box::new(HeuristicBackend::new(spec.id.clone()))),
                    max_in_flight: None,
                },
                CheckerKind::Remote => {
                    let remote = spec.remote.clone().expect("validated config");
                    let in_flight = remote.max_in_flight;
                    LoadedChecker {
                        backend: Box::new(RemoteBackend::new(spec.id.clone(), remote.clone())?),
                        empty_context: Some(Box::new(RemoteBackend::new(spec.id.clone(), remote)?)),
                        max_in_flight: Some(in_flight),
                    }
                }
            })
        })
        .collect()
}

/// Every claim of the corpus with its passages: answer claims first within each
/// instance, then reference claims.
pub fn claim_jobs(corpus: &[RagInstance]) -> Vec<(&Claim, &[Passage])> {
    corpus
        .iter()
        .flat_map(|inst| inst.all_claims().map(move |c| (c, inst.passages.as_slice())))
        .collect()
}

/// Answer claims only; the empty-context pass judges nothing else.
pub fn answer_claim_jobs(corpus: &[RagInstance]) -> Vec<(&Claim, &[Passage])> {
    corpus
        .iter()
        .flat_map(|inst| inst.claims.iter().map(move |c| (c, inst.passages.as_slice())))
        .collect()
}

/// Runs every checker over `jobs`. The result holds one vector per job, in
/// checker-config order. With `empty_context` the passages are withheld.
pub fn run_checkers(
    checkers: &[LoadedChecker],
    jobs: &[(&Claim, &[Passage])],
    workers: usize,
    empty_context: bool,
) -> Result<Vec<Vec<CheckerOutput>>> {
    let empty_jobs: Vec<(&Claim, &[Passage])>;
    let jobs = if empty_context {
        empty_jobs = jobs.iter().map(|(c, _)| (*c, &[][..])).collect();
        &empty_jobs
    } else {
        jobs
    };
    let mut per_claim: Vec<Vec<CheckerOutput>> = vec![Vec::with_capacity(checkers.len()); jobs.len()];
    for checker in checkers {
        let backend = if empty_context {
            checker
                .empty_context
                .as_deref()
                .ok_or_else(|| Error::Config(format!("checker {:?} has no empty-context source", checker.backend.checker_id())))?
        } else {
            checker.backend.as_ref()
        };
        let outputs = classify_all(backend, jobs, checker.max_in_flight.unwrap_or(workers))?;
        for (slot, out) in per_claim.iter_mut().zip(outputs) {
            slot.push(out);
        }
    }
    Ok(per_claim)
}

/// Ensemble weights for the configured checkers, from the F1 table or uniform.
pub fn load_weights(cfg: &RunConfig) -> Result<WeightMatrix> {
    let ids: Vec<&str> = cfg.checkers.iter().map(|c| c.id.as_str()).collect();
    let table = match &cfg.f1_table {
        None => ClassF1Table::uniform(ids),
        Some(path) => {
            let full = ClassF1Table::load(&cfg.resolve(path))?;
            let mut table = ClassF1Table::new();
            for id in ids {
                let row = full.rows.get(id).ok_or_else(|| {
                    Error::Config(format!("F1 table {} has no row for checker {id:?}", path.display()))
                })?;
                table.insert(id, *row)?;
            }
            table
        }
    };
    compute_weights(&table)
}

/// KG store (when enabled) and the relation map used for linking and safety
/// flags. The map is the configured one or the built-in default.
pub struct KgContext {
    pub store: Option<KgStore>,
    pub relmap: RelationMap,
}

pub fn load_kg_context(cfg: &RunConfig, warnings: &mut Vec<String>) -> Result<KgContext> {
    let relmap = match cfg.kg.as_ref().and_then(|k| k.relmap.as_ref()) {
        Some(p) => RelationMap::load(&cfg.resolve(p))?,
        None => RelationMap::drkg_default(),
    };
    let store = match cfg.kg.as_ref().filter(|k| k.enabled) {
        Some(kg) => {
            let store = load_kg_dir(&cfg.resolve(&kg.dir))?;
            let mut unknown = BTreeSet::new();
            for key in relmap.canonical_relations() {
                unknown.extend(relmap.kg_relations(key).filter(|n| store.relation_index(n).is_none()));
            }
            if !unknown.is_empty() {
                let names: Vec<&str> = unknown.into_iter().collect();
                warnings.push(format!("relation map names KG relations absent from the store: {}", names.join(", ")));
            }
            Some(store)
        }
        None => None,
    };
    Ok(KgContext { store, relmap })
}

impl KgContext {
    pub fn link(&self, claim: &Claim, theta_link: f64) -> AlignmentSet {
        match &self.store {
            Some(store) => link_claim(claim, store, &self.relmap, theta_link),
            None => AlignmentSet::empty(&claim.claim_id),
        }
    }

    pub fn is_safety_claim(&self, claim: &Claim) -> bool {
        claim
            .spo
            .as_ref()
            .and_then(|spo| self.relmap.canonicalize(&spo.relation))
            .is_some_and(|key| self.relmap.is_safety(key))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunCounts {
    pub instances: usize,
    pub claims: usize,
    pub reference_claims: usize,
    pub checkers: usize,
    pub kg_aligned_claims: usize,
    pub kg_uncovered_claims: usize,
    pub safety_claims: usize,
    pub degraded_outputs: usize,
}

pub struct PipelineRun {
    pub config: RunConfig,
    /// The calibrator actually applied, including a range fitted during the run.
    pub calibrator: Calibrator,
    /// Answer claims in corpus order.
    pub claims: Vec<FusedClaimResult>,
    pub reference_claims: Vec<FusedClaimResult>,
    pub answers: Vec<AnswerDiagnostics>,
    pub summary: CorpusReport,
    pub kg_coverage: Option<KgCoverage>,
    pub counts: RunCounts,
    pub warnings: Vec<String>,
}

struct Scored<'a> {
    claim: &'a Claim,
    nli: crate::model::LabelDistribution,
    alignment: AlignmentSet,
    p_kge: Option<f64>,
    s_kg: Option<f64>,
    citations: BTreeSet<String>,
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    cfg.check_files()?;
    let mut warnings = Vec::new();
    let corpus = load_instances(&cfg.resolve(&cfg.corpus), CorpusFormat::Jsonl)?;
    let checkers = load_checkers(cfg, &corpus, &mut warnings)?;
    let weights = load_weights(cfg)?;
    let kg = load_kg_context(cfg, &mut warnings)?;
    let fusion = &cfg.fusion;

    let jobs = claim_jobs(&corpus);
    let outputs = run_checkers(&checkers, &jobs, cfg.workers, false)?;
    let mut degraded: HashMap<&str, usize> = HashMap::new();
    for out in outputs.iter().flatten().filter(|o| o.degraded) {
        *degraded.entry(out.checker_id.as_str()).or_default() += 1;
    }

    let mut scored = Vec::with_capacity(jobs.len());
    for ((claim, _), outs) in jobs.iter().zip(&outputs) {
        let nli = ensemble_score(outs, &weights)?.dist;
        let alignment = kg.link(claim, cfg.theta_link);
        let p_kge = kg.store.as_ref().and_then(|s| claim_kge(&alignment, s));
        let s_kg = p_kge.map(|p| combine_kg(p, alignment.s_text_claim, fusion.alpha));
        let citations = outs
            .iter()
            .filter(|o| o.label == NliLabel::Entail)
            .flat_map(|o| o.spans.iter().map(|s| s.doc_id.clone()))
            .collect();
        scored.push(Scored {
            claim,
            nli,
            alignment,
            p_kge,
            s_kg,
            citations,
        });
    }

    let mut calibrator = fusion.calibrator()?;
    if !calibrator.is_fitted() {
        let aligned: Vec<f64> = scored.iter().filter_map(|s| s.s_kg).collect();
        if !aligned.is_empty() {
            match Calibrator::fit(CalibrationMode::Minmax, &aligned, fusion.epsilon) {
                Ok(fitted) => {
                    calibrator = fitted;
                    warnings.push(format!(
                        "min-max range fitted on {} aligned claims of this run: [{}, {}]",
                        aligned.len(),
                        fitted.s_min.unwrap_or_default(),
                        fitted.s_max.unwrap_or_default()
                    ));
                }
                Err(_) => {
                    calibrator = Calibrator::none(fusion.epsilon);
                    warnings.push("aligned KG scores span no range; min-max calibration replaced by clipping".into());
                }
            }
        }
    }

    let mut results = Vec::with_capacity(scored.len());
    for s in &scored {
        let p_nli = s.nli.entail;
        let p_star = fuse(p_nli, s.s_kg, fusion.beta, &calibrator)?;
        results.push(FusedClaimResult {
            claim_id: s.claim.claim_id.clone(),
            instance_id: s.claim.instance_id.clone(),
            nli: s.nli,
            p_nli,
            p_kge: s.p_kge,
            s_text: s.p_kge.map(|_| s.alignment.s_text_claim),
            s_kg: s.s_kg,
            p_star,
            fused_verdict: fused_verdict(&s.nli, p_star, fusion.epsilon).label,
            supported: support_decision(p_star, fusion.tau),
            safety_flag: kg.is_safety_claim(s.claim),
            gold_label: s.claim.gold_label,
        });
    }

    let answer_ids: BTreeSet<&str> = corpus
        .iter()
        .flat_map(|i| i.claims.iter().map(|c| c.claim_id.as_str()))
        .collect();
    let (claims, reference_claims): (Vec<_>, Vec<_>) = results
        .into_iter()
        .partition(|r| answer_ids.contains(r.claim_id.as_str()));

    let self_know_probs: Option<HashMap<String, f64>> = if cfg.self_know {
        let answer_jobs = answer_claim_jobs(&corpus);
        let empty = run_checkers(&checkers, &answer_jobs, cfg.workers, true)?;
        let mut probs = HashMap::new();
        for ((claim, _), outs) in answer_jobs.iter().zip(&empty) {
            probs.insert(claim.claim_id.clone(), ensemble_score(outs, &weights)?.p_nli());
        }
        Some(probs)
    } else {
        None
    };

    let citations: HashMap<String, BTreeSet<String>> = scored
        .iter()
        .map(|s| (s.claim.claim_id.clone(), s.citations.clone()))
        .collect();
    let by_instance = |rs: &[FusedClaimResult]| {
        let mut map: HashMap<String, Vec<FusedClaimResult>> = HashMap::new();
        for r in rs {
            map.entry(r.instance_id.clone()).or_default().push(r.clone());
        }
        map
    };
    let answer_results = by_instance(&claims);
    let reference_results = by_instance(&reference_claims);
    let mut answers = Vec::with_capacity(corpus.len());
    for inst in &corpus {
        let results = answer_results.get(&inst.id).map(Vec::as_slice).unwrap_or(&[]);
        let refs = reference_results.get(&inst.id).map(Vec::as_slice).unwrap_or(&[]);
        let empty_probs: Option<Vec<f64>> = self_know_probs
            .as_ref()
            .map(|p| inst.claims.iter().map(|c| p[&c.claim_id]).collect());
        answers.push(diagnose_answer(&AnswerInputs {
            instance_id: &inst.id,
            dataset: inst.dataset.as_deref(),
            passages: &inst.passages,
            claims: &inst.claims,
            results,
            reference_claims: inst.reference_claims.as_deref(),
            reference_results: refs,
            citations: &citations,
            empty_ctx_probs: empty_probs.as_deref(),
            theta_match: cfg.theta_match,
            tau: fusion.tau,
            tau_nli: fusion.tau_nli,
        }));
    }
    let summary = corpus_aggregate(&answers, cfg.group_by_dataset)?;

    let answer_alignments: Vec<AlignmentSet> = scored
        .iter()
        .filter(|s| answer_ids.contains(s.claim.claim_id.as_str()))
        .map(|s| s.alignment.clone())
        .collect();
    let kg_coverage = match &kg.store {
        Some(_) if !answer_alignments.is_empty() => Some(kg_coverage(&answer_alignments)?),
        _ => None,
    };
    let aligned = claims.iter().filter(|r| r.s_kg.is_some()).count();
    let counts = RunCounts {
        instances: corpus.len(),
        claims: claims.len(),
        reference_claims: reference_claims.len(),
        checkers: checkers.len(),
        kg_aligned_claims: aligned,
        kg_uncovered_claims: claims.len() - aligned,
        safety_claims: claims.iter().filter(|r| r.safety_flag).count(),
        degraded_outputs: degraded.values().sum(),
    };
    if kg.store.is_some() && counts.kg_uncovered_claims > 0 {
        warnings.push(format!(
            "{} of {} claims are KG-uncovered and use the textual score alone",
            counts.kg_uncovered_claims, counts.claims
        ));
    }
    let mut degraded: Vec<_> = degraded.into_iter().collect();
    degraded.sort();
    for (id, n) in degraded {
        warnings.push(format!("checker {id:?} returned {n} unparseable replies, scored as Neutral"));
    }
    debug_assert_eq!(answers.iter().map(|a| a.n_claims).sum::<usize>(), claims.len());

    Ok(PipelineRun {
        config: cfg.clone(),
        calibrator,
        claims,
        reference_claims,
        answers,
        summary,
        kg_coverage,
        counts,
        warnings,
    })
}
