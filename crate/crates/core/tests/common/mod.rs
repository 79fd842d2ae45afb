//! Brute-force reference implementations and synthetic inputs shared by the
//! integration tests. Nothing here calls into the library's scoring code.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use claimcheck::tuning::DevClaim;
use claimcheck::{Claim, FusedClaimResult, LabelDistribution, NliLabel, Passage};
use rand::Rng;

pub const LABELS: [NliLabel; 3] = [NliLabel::Entail, NliLabel::Neutral, NliLabel::Contradict];

/// Non-negative fraction `n / d` with `d > 0`.
#[derive(Debug, Clone, Copy)]
pub struct Ratio(pub u64, pub u64);

impl Ratio {
    pub fn f64(self) -> f64 {
        self.0 as f64 / self.1 as f64
    }

    pub fn gt(self, other: Ratio) -> bool {
        self.0 * other.1 > other.0 * self.1
    }

    pub fn ge(self, other: Ratio) -> bool {
        self.0 * other.1 >= other.0 * self.1
    }
}

// ---- token overlap and matching ----

fn tokens(text: &str) -> Vec<String> {
    let mut t: Vec<String> = text.split_whitespace().map(|w| w.to_lowercase()).collect();
    t.sort();
    t
}

/// Token F1 as an exact ratio: 2 * common / (len_a + len_b).
pub fn overlap(a: &str, b: &str) -> Ratio {
    let (ta, tb) = (tokens(a), tokens(b));
    if ta.is_empty() && tb.is_empty() {
        return Ratio(1, 1);
    }
    if ta.is_empty() || tb.is_empty() {
        return Ratio(0, 1);
    }
    // merge of two sorted lists counts the multiset intersection
    let (mut i, mut j, mut common) = (0, 0, 0u64);
    while i < ta.len() && j < tb.len() {
        match ta[i].cmp(&tb[j]) {
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    Ratio(2 * common, (ta.len() + tb.len()) as u64)
}

/// Repeatedly takes the most similar free pair at or above `theta`, lowest
/// indices first on ties. Returns (pred index, ref index) pairs in pick order.
pub fn greedy_match(pred: &[Claim], reference: &[Claim], theta: Ratio) -> Vec<(usize, usize)> {
    let mut pred_free = vec![true; pred.len()];
    let mut ref_free = vec![true; reference.len()];
    let mut out = Vec::new();
    loop {
        let mut best: Option<(Ratio, usize, usize)> = None;
        for i in 0..pred.len() {
            for j in 0..reference.len() {
                if !pred_free[i] || !ref_free[j] {
                    continue;
                }
                let s = overlap(&pred[i].text, &reference[j].text);
                if !s.ge(theta) {
                    continue;
                }
                if best.is_none_or(|(b, _, _)| s.gt(b)) {
                    best = Some((s, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        pred_free[i] = false;
        ref_free[j] = false;
        out.push((i, j));
    }
    out
}

/// (precision, recall, f1) from counts, each as a ratio.
pub fn prf(correct: u64, n_pred: u64, n_ref: u64) -> [f64; 3] {
    let r = |n: u64| if n == 0 { 0.0 } else { Ratio(correct, n).f64() };
    let f1 = if correct == 0 { 0.0 } else { Ratio(2 * correct, n_pred + n_ref).f64() };
    [r(n_pred), r(n_ref), f1]
}

pub fn count_ratio<T>(items: &[T], pred: impl Fn(&T) -> bool) -> Option<f64> {
    if items.is_empty() {
        return None;
    }
    let mut hits = 0u64;
    for x in items {
        if pred(x) {
            hits += 1;
        }
    }
    Some(Ratio(hits, items.len() as u64).f64())
}

/// Per-class F1 from explicit counting, then the unweighted mean.
pub fn macro_f1(preds: &[NliLabel], golds: &[NliLabel]) -> ([f64; 3], f64) {
    let mut per = [0.0; 3];
    for (k, label) in LABELS.iter().enumerate() {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for (p, g) in preds.iter().zip(golds) {
            match (p == label, g == label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        per[k] = if tp + fp + fn_ == 0 { 0.0 } else { Ratio(2 * tp, 2 * tp + fp + fn_).f64() };
    }
    (per, (per[0] + per[1] + per[2]) / 3.0)
}

// ---- fusion ----

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64, eps: f64) -> f64 {
    let q = p.max(eps).min(1.0 - eps);
    (q / (1.0 - q)).ln()
}

/// Calibrated KG score; `range` selects min-max scaling.
pub fn calibrate(s: f64, range: Option<(f64, f64)>, eps: f64) -> f64 {
    let x = match range {
        Some((lo, hi)) => (s - lo) / (hi - lo),
        None => s,
    };
    x.max(eps).min(1.0 - eps)
}

pub fn fuse(p_nli: f64, kg: Option<f64>, beta: f64, range: Option<(f64, f64)>, eps: f64) -> f64 {
    match kg {
        None => p_nli,
        Some(_) if beta == 1.0 => p_nli.max(eps).min(1.0 - eps),
        Some(s) if beta == 0.0 => calibrate(s, range, eps),
        Some(s) => sigmoid(beta * logit(p_nli, eps) + (1.0 - beta) * logit(calibrate(s, range, eps), eps)),
    }
}

pub fn thresholded(nli: &LabelDistribution, p_star: f64, tau: f64) -> NliLabel {
    if p_star >= tau {
        NliLabel::Entail
    } else if nli.contradict > nli.neutral {
        NliLabel::Contradict
    } else {
        NliLabel::Neutral
    }
}

pub fn kg_score(c: &DevClaim, alpha: f64) -> Option<f64> {
    c.p_kge.map(|p| (1.0 - alpha) * p + alpha * c.s_text)
}

pub fn minmax_range(claims: &[DevClaim], alpha: f64) -> Option<(f64, f64)> {
    let s: Vec<f64> = claims.iter().filter_map(|c| kg_score(c, alpha)).collect();
    if s.is_empty() {
        return None;
    }
    let mut lo = s[0];
    let mut hi = s[0];
    for v in &s {
        if *v < lo {
            lo = *v;
        }
        if *v > hi {
            hi = *v;
        }
    }
    Some((lo, hi))
}

/// (supported rate, flip rate against `beta_ref`) per beta, on aligned claims.
pub fn beta_sweep(
    claims: &[DevClaim],
    alpha: f64,
    tau: f64,
    betas: &[f64],
    beta_ref: f64,
    minmax: bool,
    eps: f64,
) -> Vec<(f64, f64)> {
    let aligned: Vec<&DevClaim> = claims.iter().filter(|c| c.p_kge.is_some()).collect();
    let owned: Vec<DevClaim> = aligned.iter().map(|c| (*c).clone()).collect();
    let range = if minmax { minmax_range(&owned, alpha) } else { None };
    let decide = |beta: f64| -> Vec<bool> {
        aligned
            .iter()
            .map(|c| fuse(c.nli.entail, kg_score(c, alpha), beta, range, eps) >= tau)
            .collect()
    };
    let reference = decide(beta_ref);
    let n = aligned.len() as u64;
    betas
        .iter()
        .map(|&b| {
            let d = decide(b);
            let sup = d.iter().filter(|x| **x).count() as u64;
            let flips = d.iter().zip(&reference).filter(|(a, b)| a != b).count() as u64;
            (Ratio(sup, n).f64(), Ratio(flips, n).f64())
        })
        .collect()
}

/// Macro-F1 of thresholded verdicts for one (alpha, beta, tau) cell.
pub fn cell_macro_f1(dev: &[DevClaim], alpha: f64, beta: f64, tau: f64, minmax: bool, eps: f64) -> f64 {
    let range = if minmax { minmax_range(dev, alpha) } else { None };
    let preds: Vec<NliLabel> = dev
        .iter()
        .map(|c| thresholded(&c.nli, fuse(c.nli.entail, kg_score(c, alpha), beta, range, eps), tau))
        .collect();
    let golds: Vec<NliLabel> = dev.iter().map(|c| c.gold_label.unwrap()).collect();
    macro_f1(&preds, &golds).1
}

// ---- synthetic inputs ----

pub fn random_dist(rng: &mut impl Rng) -> LabelDistribution {
    let raw: [f64; 3] = [rng.random::<f64>() + 1e-9, rng.random::<f64>() + 1e-9, rng.random::<f64>() + 1e-9];
    LabelDistribution::from_scores(raw)
}

pub fn random_label(rng: &mut impl Rng) -> NliLabel {
    LABELS[rng.random_range(0..3)]
}

/// Forty aligned claims whose raw KG scores sit in [0.01, 0.05] and rise with
/// the textual score.
pub fn skewed_kg_claims() -> Vec<DevClaim> {
    let n = 40;
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let entail = 0.3 + 0.65 * t;
            DevClaim {
                claim_id: format!("s{i:02}"),
                nli: LabelDistribution::from_scores([entail, (1.0 - entail) * 0.7, (1.0 - entail) * 0.3]),
                p_kge: Some(0.01 + 0.04 * t),
                s_text: 0.0,
                gold_label: None,
            }
        })
        .collect()
}

/// One generated answer with everything the diagnostics need.
pub struct SyntheticAnswer {
    pub passages: Vec<Passage>,
    pub claims: Vec<Claim>,
    pub results: Vec<FusedClaimResult>,
    pub reference: Vec<Claim>,
    pub reference_results: Vec<FusedClaimResult>,
    pub citations: HashMap<String, BTreeSet<String>>,
    pub empty_ctx_probs: Vec<f64>,
}

const VOCAB: [&str; 8] = ["aspirin", "Aspirin", "treats", "pain", "fever", "reduces", "risk", "of"];

fn random_text(rng: &mut impl Rng) -> String {
    let n = rng.random_range(1..=5);
    (0..n).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
}

fn random_result(rng: &mut impl Rng, id: &str, tau: f64) -> FusedClaimResult {
    let p_star = rng.random_range(0..=10) as f64 / 10.0;
    FusedClaimResult {
        claim_id: id.into(),
        instance_id: "q".into(),
        nli: random_dist(rng),
        p_nli: p_star,
        p_kge: None,
        s_text: None,
        s_kg: None,
        p_star,
        fused_verdict: random_label(rng),
        supported: p_star >= tau,
        safety_flag: rng.random_bool(0.3),
        gold_label: None,
    }
}

pub fn synthetic_answer(rng: &mut impl Rng, tau: f64) -> SyntheticAnswer {
    let passages: Vec<Passage> = (0..rng.random_range(0..=6))
        .map(|k| Passage {
            doc_id: format!("d{k}"),
            text: random_text(rng),
        })
        .collect();
    let claims: Vec<Claim> = (0..rng.random_range(0..=20))
        .map(|k| Claim::new(format!("c{k}"), "q", random_text(rng)))
        .collect();
    let reference: Vec<Claim> = (0..rng.random_range(0..=8))
        .map(|k| Claim::new(format!("r{k}"), "q", random_text(rng)))
        .collect();
    let results = claims.iter().map(|c| random_result(rng, &c.claim_id, tau)).collect();
    let reference_results = reference.iter().map(|c| random_result(rng, &c.claim_id, tau)).collect();
    let mut citations = HashMap::new();
    for c in &claims {
        let cited: BTreeSet<String> = passages
            .iter()
            .filter(|_| rng.random_bool(0.3))
            .map(|p| p.doc_id.clone())
            .collect();
        // also cite a passage outside the answer now and then
        let mut cited = cited;
        if rng.random_bool(0.1) {
            cited.insert("elsewhere".into());
        }
        citations.insert(c.claim_id.clone(), cited);
    }
    let empty_ctx_probs = claims.iter().map(|_| rng.random_range(0..=10) as f64 / 10.0).collect();
    SyntheticAnswer {
        passages,
        claims,
        results,
        reference,
        reference_results,
        citations,
        empty_ctx_probs,
    }
}
