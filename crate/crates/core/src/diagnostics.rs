//! Claim-level and answer-level diagnostics, plus corpus aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Claim, FusedClaimResult, NliLabel, Passage};

pub const DEFAULT_THETA_MATCH: f64 = 0.5;

fn bag(text: &str) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for tok in text.split_whitespace() {
        *counts.entry(tok.to_lowercase()).or_insert(0) += 1;
    }
    counts
}

/// F1 of the case-folded whitespace-token multisets of two texts.
pub fn text_overlap_sim(a: &str, b: &str) -> f64 {
    let (ba, bb) = (bag(a), bag(b));
    let (na, nb): (usize, usize) = (ba.values().sum(), bb.values().sum());
    if na == 0 && nb == 0 {
        return 1.0;
    }
    if na == 0 || nb == 0 {
        return 0.0;
    }
    let common: usize = ba
        .iter()
        .map(|(tok, ca)| bb.get(tok).map_or(0, |cb| (*ca).min(*cb)))
        .sum();
    // harmonic mean of common/na and common/nb
    2.0 * common as f64 / (na + nb) as f64
}

pub fn token_overlap_sim(a: &Claim, b: &Claim) -> f64 {
    text_overlap_sim(&a.text, &b.text)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedPair {
    pub pred: String,
    pub reference: String,
    pub similarity: f64,
}

/// One-to-one matching between predicted and reference claims.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MatchAssignment {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_pred: Vec<String>,
    pub unmatched_ref: Vec<String>,
}

/// Greedy matching by descending similarity, ties broken by (pred index, ref
/// index). Pairs below `theta_match` are never matched.
pub fn match_claims(pred: &[Claim], reference: &[Claim], theta_match: f64) -> MatchAssignment {
    let mut scored: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, r) in reference.iter().enumerate() {
            let sim = token_overlap_sim(p, r);
            if sim >= theta_match {
                scored.push((sim, i, j));
            }
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut pred_used = vec![false; pred.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut out = MatchAssignment::default();
    for (sim, i, j) in scored {
        if pred_used[i] || ref_used[j] {
            continue;
        }
        pred_used[i] = true;
        ref_used[j] = true;
        out.pairs.push(MatchedPair {
            pred: pred[i].claim_id.clone(),
            reference: reference[j].claim_id.clone(),
            similarity: sim,
        });
    }
    out.unmatched_pred = pred
        .iter()
        .zip(&pred_used)
        .filter(|(_, used)| !**used)
        .map(|(c, _)| c.claim_id.clone())
        .collect();
    out.unmatched_ref = reference
        .iter()
        .zip(&ref_used)
        .filter(|(_, used)| !**used)
        .map(|(c, _)| c.claim_id.clone())
        .collect();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Precision and recall from a count of correct items; F1 is 0 when both
    /// are 0.
    pub fn from_counts(correct: usize, n_pred: usize, n_ref: usize) -> Self {
        let ratio = |n: usize| if n == 0 { 0.0 } else { correct as f64 / n as f64 };
        let (precision, recall) = (ratio(n_pred), ratio(n_ref));
        // equals 2PR / (P + R), computed as one ratio of counts
        let f1 = if correct == 0 {
            0.0
        } else {
            (2 * correct) as f64 / (n_pred + n_ref) as f64
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

/// Soft extraction precision/recall/F1 against reference claims.
pub fn extraction_prf(pred: &[Claim], reference: &[Claim], theta_match: f64) -> Prf {
    if pred.is_empty() && reference.is_empty() {
        return Prf {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let matched = match_claims(pred, reference, theta_match).pairs.len();
    Prf::from_counts(matched, pred.len(), reference.len())
}

fn mean_of<T>(items: &[T], pred: impl Fn(&T) -> bool) -> f64 {
    items.iter().filter(|x| pred(x)).count() as f64 / items.len() as f64
}

/// (fraction Entail, fraction Contradict).
pub fn faith_halluc(verdicts: &[NliLabel]) -> Result<(f64, f64)> {
    if verdicts.is_empty() {
        return Err(Error::EmptyClaims);
    }
    Ok((
        mean_of(verdicts, |v| *v == NliLabel::Entail),
        mean_of(verdicts, |v| *v == NliLabel::Contradict),
    ))
}

/// Fraction of reference claims whose fused score clears the support threshold.
pub fn claim_recall(ref_results: &[FusedClaimResult]) -> Result<f64> {
    if ref_results.is_empty() {
        return Err(Error::EmptyClaims);
    }
    Ok(mean_of(ref_results, |r| r.supported))
}

/// Fraction of passages cited by at least one supported claim.
pub fn ctx_precision(
    passages: &[Passage],
    results: &[FusedClaimResult],
    citations: &HashMap<String, BTreeSet<String>>,
) -> Result<f64> {
    if passages.is_empty() {
        return Err(Error::EmptyPassages);
    }
    let used: BTreeSet<&str> = results
        .iter()
        .filter(|r| r.supported)
        .filter_map(|r| citations.get(&r.claim_id))
        .flatten()
        .map(String::as_str)
        .collect();
    Ok(mean_of(passages, |p| used.contains(p.doc_id.as_str())))
}

/// Claim-level P/R/F1 against reference claims where a match only counts when
/// the predicted claim is supported (`p_star >= tau`).
pub fn claim_f1(
    pred: &[Claim],
    pred_results: &[FusedClaimResult],
    reference: &[Claim],
    theta_match: f64,
    tau: f64,
) -> Prf {
    let p_star: HashMap<&str, f64> = pred_results
        .iter()
        .map(|r| (r.claim_id.as_str(), r.p_star))
        .collect();
    let correct = match_claims(pred, reference, theta_match)
        .pairs
        .iter()
        .filter(|pair| p_star.get(pair.pred.as_str()).is_some_and(|p| *p >= tau))
        .count();
    Prf::from_counts(correct, pred.len(), reference.len())
}

/// Fraction of empty-context ensemble entail probabilities at or above `tau_nli`.
pub fn self_knowledge(empty_ctx_probs: &[f64], tau_nli: f64) -> Result<f64> {
    if empty_ctx_probs.is_empty() {
        return Err(Error::EmptyClaims);
    }
    Ok(mean_of(empty_ctx_probs, |p| *p >= tau_nli))
}

/// Contradiction rate over safety-flagged claims; `None` without any.
pub fn safety_error_rate(results: &[FusedClaimResult]) -> Option<f64> {
    let safety: Vec<&FusedClaimResult> = results.iter().filter(|r| r.safety_flag).collect();
    (!safety.is_empty()).then(|| mean_of(&safety, |r| r.fused_verdict == NliLabel::Contradict))
}

/// Safety error rate with the support threshold applied to the verdict (see
/// [`crate::fusion::thresholded_verdict`]).
pub fn safety_error_rate_at(results: &[FusedClaimResult], tau: f64) -> Option<f64> {
    let safety: Vec<&FusedClaimResult> = results.iter().filter(|r| r.safety_flag).collect();
    (!safety.is_empty()).then(|| {
        mean_of(&safety, |r| {
            crate::fusion::thresholded_verdict(&r.nli, r.p_star, tau) == NliLabel::Contradict
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacroF1 {
    /// Indexed in canonical label order.
    pub per_class: [f64; 3],
    pub macro_f1: f64,
    pub accuracy: f64,
}

pub fn macro_f1(preds: &[NliLabel], golds: &[NliLabel]) -> Result<MacroF1> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    let mut confusion = [[0usize; 3]; 3];
    for (p, g) in preds.iter().zip(golds) {
        confusion[g.index()][p.index()] += 1;
    }
    let mut per_class = [0.0; 3];
    for k in 0..3 {
        let tp = confusion[k][k];
        let fp: usize = (0..3).filter(|&g| g != k).map(|g| confusion[g][k]).sum();
        let fn_: usize = (0..3).filter(|&p| p != k).map(|p| confusion[k][p]).sum();
        let denom = 2 * tp + fp + fn_;
        per_class[k] = if denom == 0 { 0.0 } else { (2 * tp) as f64 / denom as f64 };
    }
    let correct: usize = (0..3).map(|k| confusion[k][k]).sum();
    Ok(MacroF1 {
        per_class,
        macro_f1: (per_class[0] + per_class[1] + per_class[2]) / 3.0,
        accuracy: correct as f64 / preds.len() as f64,
    })
}

/// Metrics for one answer. Every metric is absent when the answer has no
/// claims; the others are absent when their inputs are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerDiagnostics {
    pub instance_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub n_claims: usize,
    pub n_safety_claims: usize,
    pub faith: Option<f64>,
    pub halluc: Option<f64>,
    pub claim_rec: Option<f64>,
    pub ctx_prec: Option<f64>,
    pub claim_f1: Option<Prf>,
    pub self_know: Option<f64>,
    pub safety_err: Option<f64>,
}

/// Inputs for [`diagnose_answer`].
pub struct AnswerInputs<'a> {
    pub instance_id: &'a str,
    pub dataset: Option<&'a str>,
    pub passages: &'a [Passage],
    pub claims: &'a [Claim],
    pub results: &'a [FusedClaimResult],
    pub reference_claims: Option<&'a [Claim]>,
    pub reference_results: &'a [FusedClaimResult],
    pub citations: &'a HashMap<String, BTreeSet<String>>,
    pub empty_ctx_probs: Option<&'a [f64]>,
    pub theta_match: f64,
    pub tau: f64,
    pub tau_nli: f64,
}

pub fn diagnose_answer(inputs: &AnswerInputs<'_>) -> AnswerDiagnostics {
    let results = inputs.results;
    let mut diag = AnswerDiagnostics {
        instance_id: inputs.instance_id.to_string(),
        dataset: inputs.dataset.map(str::to_string),
        n_claims: results.len(),
        n_safety_claims: results.iter().filter(|r| r.safety_flag).count(),
        faith: None,
        halluc: None,
        claim_rec: None,
        ctx_prec: None,
        claim_f1: None,
        self_know: None,
        safety_err: None,
    };
    if results.is_empty() {
        return diag;
    }
    let verdicts: Vec<NliLabel> = results.iter().map(|r| r.fused_verdict).collect();
    if let Ok((faith, halluc)) = faith_halluc(&verdicts) {
        diag.faith = Some(faith);
        diag.halluc = Some(halluc);
    }
    if let Some(reference) = inputs.reference_claims.filter(|r| !r.is_empty()) {
        diag.claim_rec = claim_recall(inputs.reference_results).ok();
        diag.claim_f1 = Some(claim_f1(
            inputs.claims,
            results,
            reference,
            inputs.theta_match,
            inputs.tau,
        ));
    }
    diag.ctx_prec = ctx_precision(inputs.passages, results, inputs.citations).ok();
    diag.self_know = inputs
        .empty_ctx_probs
        .and_then(|probs| self_knowledge(probs, inputs.tau_nli).ok());
    diag.safety_err = safety_error_rate(results);
    diag
}

/// Mean of one metric over the answers where it is present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub n_answers: usize,
    /// Number of dataset groups averaged over (1 when ungrouped).
    pub n_groups: usize,
    pub faith: MetricSummary,
    pub halluc: MetricSummary,
    /// Read as `1 - faith`.
    pub not_supported_rate: MetricSummary,
    pub claim_rec: MetricSummary,
    pub ctx_prec: MetricSummary,
    pub claim_precision: MetricSummary,
    pub claim_recall: MetricSummary,
    pub claim_f1: MetricSummary,
    pub self_know: MetricSummary,
    pub safety_err: MetricSummary,
}

fn summarize(per_answer: &[AnswerDiagnostics], groups: &[Vec<usize>], get: impl Fn(&AnswerDiagnostics) -> Option<f64>) -> MetricSummary {
    let mut group_means = Vec::new();
    let mut count = 0;
    for members in groups {
        let values: Vec<f64> = members.iter().filter_map(|&i| get(&per_answer[i])).collect();
        count += values.len();
        if !values.is_empty() {
            group_means.push(values.iter().sum::<f64>() / values.len() as f64);
        }
    }
    MetricSummary {
        mean: (!group_means.is_empty()).then(|| group_means.iter().sum::<f64>() / group_means.len() as f64),
        count,
    }
}

/// Unweighted mean of each metric over answers, then over dataset groups when
/// `grouped` is set (answers without a dataset form their own group).
pub fn corpus_aggregate(per_answer: &[AnswerDiagnostics], grouped: bool) -> Result<CorpusReport> {
    if per_answer.is_empty() {
        return Err(Error::EmptyInput("answer diagnostics"));
    }
    let groups: Vec<Vec<usize>> = if grouped {
        let mut by_key: BTreeMap<Option<&str>, Vec<usize>> = BTreeMap::new();
        for (i, a) in per_answer.iter().enumerate() {
            by_key.entry(a.dataset.as_deref()).or_default().push(i);
        }
        by_key.into_values().collect()
    } else {
        vec![(0..per_answer.len()).collect()]
    };
    let s = |get: fn(&AnswerDiagnostics) -> Option<f64>| summarize(per_answer, &groups, get);
    Ok(CorpusReport {
        n_answers: per_answer.len(),
        n_groups: groups.len(),
        faith: s(|a| a.faith),
        halluc: s(|a| a.halluc),
        not_supported_rate: s(|a| a.faith.map(|f| 1.0 - f)),
        claim_rec: s(|a| a.claim_rec),
        ctx_prec: s(|a| a.ctx_prec),
        claim_precision: s(|a| a.claim_f1.map(|p| p.precision)),
        claim_recall: s(|a| a.claim_f1.map(|p| p.recall)),
        claim_f1: s(|a| a.claim_f1.map(|p| p.f1)),
        self_know: s(|a| a.self_know),
        safety_err: s(|a| a.safety_err),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LabelDistribution;
    use NliLabel::{Contradict as C, Entail as E, Neutral as N};

    fn claim(id: &str, text: &str) -> Claim {
        Claim::new(id, "q", text)
    }

    pub(crate) fn result(id: &str, p_star: f64, verdict: NliLabel, safety: bool, tau: f64) -> FusedClaimResult {
        FusedClaimResult {
            claim_id: id.into(),
            instance_id: "q".into(),
            nli: LabelDistribution::from_scores([p_star, 1.0 - p_star, 0.0]),
            p_nli: p_star,
            p_kge: None,
            s_text: None,
            s_kg: None,
            p_star,
            fused_verdict: verdict,
            supported: p_star >= tau,
            safety_flag: safety,
            gold_label: None,
        }
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(text_overlap_sim("Aspirin treats headache", "aspirin treats headache"), 1.0);
        assert!((text_overlap_sim("aspirin treats headache", "aspirin treats migraine") - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(text_overlap_sim("a b", "c d"), 0.0);
        assert_eq!(text_overlap_sim("a a b", "a b b"), 2.0 / 3.0);
    }

    #[test]
    fn matching_examples() {
        let same = [claim("p1", "x y z"), claim("p2", "u v w")];
        let refs = [claim("r1", "x y z"), claim("r2", "u v w")];
        let m = match_claims(&same, &refs, 0.5);
        assert_eq!(m.pairs.len(), 2);
        assert!(m.unmatched_pred.is_empty() && m.unmatched_ref.is_empty());

        // p2 is the closer of the two predictions
        let pred = [claim("p1", "aspirin treats pain"), claim("p2", "aspirin treats headache")];
        let refs = [claim("r1", "aspirin treats headache")];
        let m = match_claims(&pred, &refs, 0.5);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].pred, "p2");
        assert_eq!(m.unmatched_pred, vec!["p1"]);

        let m = match_claims(&pred, &refs, 0.99);
        assert_eq!(m.pairs.len(), 1);
        let m = match_claims(&pred[..1], &refs, 0.99);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_ref, vec!["r1"]);
    }

    #[test]
    fn extraction_prf_examples() {
        let a = [claim("p1", "x"), claim("p2", "y")];
        assert_eq!(
            extraction_prf(&a, &[claim("r1", "x"), claim("r2", "y")], 0.5),
            Prf { precision: 1.0, recall: 1.0, f1: 1.0 }
        );
        let pred = [claim("p1", "a"), claim("p2", "b"), claim("p3", "c"), claim("p4", "d")];
        let refs = [claim("r1", "a"), claim("r2", "b"), claim("r3", "e"), claim("r4", "f"), claim("r5", "g")];
        let prf = extraction_prf(&pred, &refs, 0.5);
        assert_eq!((prf.precision, prf.recall), (0.5, 0.4));
        assert!((prf.f1 - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(extraction_prf(&[], &refs, 0.5), Prf { precision: 0.0, recall: 0.0, f1: 0.0 });
        assert_eq!(extraction_prf(&[], &[], 0.5).f1, 1.0);
    }

    #[test]
    fn faith_halluc_examples() {
        assert_eq!(faith_halluc(&[E, E, N, C]).unwrap(), (0.5, 0.25));
        assert_eq!(faith_halluc(&[E, E]).unwrap(), (1.0, 0.0));
        assert_eq!(faith_halluc(&[N, N]).unwrap(), (0.0, 0.0));
        assert!(matches!(faith_halluc(&[]), Err(Error::EmptyClaims)));
    }

    #[test]
    fn claim_recall_examples() {
        let rs: Vec<_> = [0.9, 0.4, 0.8].iter().map(|&p| result("r", p, E, false, 0.5)).collect();
        assert_eq!(claim_recall(&rs).unwrap(), 2.0 / 3.0);
        assert_eq!(claim_recall(&rs[..1]).unwrap(), 1.0);
        assert_eq!(claim_recall(&rs[1..2]).unwrap(), 0.0);
    }

    #[test]
    fn ctx_precision_examples() {
        let passages: Vec<Passage> = (1..=4)
            .map(|i| Passage { doc_id: format!("d{i}"), text: "t".into() })
            .collect();
        let results = vec![result("c1", 0.9, E, false, 0.5), result("c2", 0.2, N, false, 0.5)];
        let mut cites = HashMap::new();
        cites.insert("c1".to_string(), BTreeSet::from(["d1".to_string(), "d3".to_string()]));
        cites.insert("c2".to_string(), BTreeSet::from(["d2".to_string()]));
        assert_eq!(ctx_precision(&passages, &results, &cites).unwrap(), 0.5);
        assert_eq!(ctx_precision(&passages, &results[1..], &cites).unwrap(), 0.0);
        cites.insert("c1".to_string(), (1..=4).map(|i| format!("d{i}")).collect());
        assert_eq!(ctx_precision(&passages, &results, &cites).unwrap(), 1.0);
        assert!(matches!(ctx_precision(&[], &results, &cites), Err(Error::EmptyPassages)));
    }

    #[test]
    fn claim_f1_examples() {
        let pred = [claim("p1", "a b"), claim("p2", "c d")];
        let refs = [claim("r1", "a b"), claim("r2", "c d")];
        let all = vec![result("p1", 0.9, E, false, 0.5), result("p2", 0.8, E, false, 0.5)];
        assert_eq!(claim_f1(&pred, &all, &refs, 0.5, 0.5), Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
        let half = vec![result("p1", 0.9, E, false, 0.5), result("p2", 0.1, N, false, 0.5)];
        assert_eq!(claim_f1(&pred, &half, &refs, 0.5, 0.5), Prf { precision: 0.5, recall: 0.5, f1: 0.5 });
        let refs_far = [claim("r1", "x"), claim("r2", "y")];
        assert_eq!(claim_f1(&pred, &all, &refs_far, 0.5, 0.5), Prf { precision: 0.0, recall: 0.0, f1: 0.0 });
    }

    #[test]
    fn self_knowledge_examples() {
        assert_eq!(self_knowledge(&[0.8, 0.2], 0.5).unwrap(), 0.5);
        assert_eq!(self_knowledge(&[0.8, 0.6], 0.5).unwrap(), 1.0);
        assert_eq!(self_knowledge(&[0.1, 0.2], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn safety_error_examples() {
        let rs = vec![
            result("a", 0.1, C, true, 0.5),
            result("b", 0.9, E, true, 0.5),
            result("c", 0.9, E, true, 0.5),
            result("d", 0.4, N, true, 0.5),
            result("e", 0.1, C, false, 0.5),
        ];
        assert_eq!(safety_error_rate(&rs), Some(0.25));
        assert_eq!(safety_error_rate(&rs[4..]), None);
        assert_eq!(safety_error_rate(&rs[..1]), Some(1.0));
    }

    #[test]
    fn macro_f1_examples() {
        let m = macro_f1(&[E, N, C], &[E, N, C]).unwrap();
        assert_eq!((m.macro_f1, m.accuracy), (1.0, 1.0));

        let m = macro_f1(&[E, N, N], &[E, N, C]).unwrap();
        assert_eq!(m.per_class, [1.0, 2.0 / 3.0, 0.0]);
        assert!((m.macro_f1 - 5.0 / 9.0).abs() < 1e-15);
        assert_eq!(m.accuracy, 2.0 / 3.0);

        let m = macro_f1(&[E, E, E], &[E, N, C]).unwrap();
        assert_eq!(m.per_class[0], 0.5);
        assert!((m.macro_f1 - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.accuracy, 1.0 / 3.0);

        assert!(matches!(macro_f1(&[E], &[E, N]), Err(Error::LengthMismatch { .. })));
    }

    fn diag(faith: Option<f64>, claim_rec: Option<f64>, dataset: Option<&str>) -> AnswerDiagnostics {
        AnswerDiagnostics {
            instance_id: "q".into(),
            dataset: dataset.map(str::to_string),
            n_claims: 1,
            n_safety_claims: 0,
            faith,
            halluc: faith.map(|_| 0.0),
            claim_rec,
            ctx_prec: None,
            claim_f1: None,
            self_know: None,
            safety_err: None,
        }
    }

    #[test]
    fn aggregate_examples() {
        let one = [diag(Some(0.5), Some(0.2), None)];
        let r = corpus_aggregate(&one, false).unwrap();
        assert_eq!(r.faith, MetricSummary { mean: Some(0.5), count: 1 });
        assert_eq!(r.claim_rec.mean, Some(0.2));

        let two = [diag(Some(0.5), None, None), diag(Some(1.0), Some(0.4), None)];
        let r = corpus_aggregate(&two, false).unwrap();
        assert_eq!(r.faith.mean, Some(0.75));
        assert_eq!(r.claim_rec, MetricSummary { mean: Some(0.4), count: 1 });
        assert_eq!(r.self_know, MetricSummary { mean: None, count: 0 });
        assert_eq!(r.not_supported_rate.mean, Some(0.25));
        assert!(corpus_aggregate(&[], false).is_err());
    }

    #[test]
    fn grouped_aggregate_macro_averages_datasets() {
        let answers = [
            diag(Some(1.0), None, Some("a")),
            diag(Some(0.0), None, Some("a")),
            diag(Some(1.0), None, Some("b")),
        ];
        let r = corpus_aggregate(&answers, true).unwrap();
        assert_eq!(r.n_groups, 2);
        assert_eq!(r.faith, MetricSummary { mean: Some(0.75), count: 3 });
    }

    #[test]
    fn answer_without_claims_has_no_metrics() {
        let cites = HashMap::new();
        let passages = [Passage { doc_id: "d1".into(), text: "t".into() }];
        let d = diagnose_answer(&AnswerInputs {
            instance_id: "q",
            dataset: None,
            passages: &passages,
            claims: &[],
            results: &[],
            reference_claims: Some(&[]),
            reference_results: &[],
            citations: &cites,
            empty_ctx_probs: Some(&[]),
            theta_match: 0.5,
            tau: 0.5,
            tau_nli: 0.5,
        });
        assert_eq!(d.n_claims, 0);
        assert!(d.faith.is_none() && d.ctx_prec.is_none() && d.self_know.is_none());
    }
}
