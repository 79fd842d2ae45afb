use std::path::{Path, PathBuf};

use claimcheck::config::RunConfig;
use claimcheck::error::Error;
use claimcheck::pipeline::run_pipeline;
use claimcheck::report::{answers_jsonl, claims_jsonl, emit_reports, summary_json, ANSWERS_FILE, CLAIMS_FILE, SUMMARY_FILE};

fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy")
}

fn toy_config() -> RunConfig {
    RunConfig::load(&toy_dir().join("toy.toml")).unwrap()
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(toy_dir().join("golden").join(name)).unwrap()
}

#[test]
fn toy_run_matches_goldens_byte_for_byte() {
    let run = run_pipeline(&toy_config()).unwrap();
    assert_eq!(claims_jsonl(&run), golden(CLAIMS_FILE));
    assert_eq!(answers_jsonl(&run), golden(ANSWERS_FILE));
    assert_eq!(summary_json(&run), golden(SUMMARY_FILE));
}

#[test]
fn emitted_files_match_goldens_and_refuse_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = run_pipeline(&toy_config()).unwrap();
    emit_reports(&run, &out, false).unwrap();
    for name in [CLAIMS_FILE, ANSWERS_FILE, SUMMARY_FILE] {
        let written = std::fs::read(out.join(name)).unwrap();
        assert_eq!(written, golden(name).into_bytes(), "{name}");
        assert!(!written.contains(&b'\r'));
    }
    assert!(matches!(emit_reports(&run, &out, false), Err(Error::OutputExists(_))));
    emit_reports(&run, &out, true).unwrap();

    let lines = std::fs::read_to_string(out.join(CLAIMS_FILE)).unwrap().lines().count();
    assert_eq!(lines, run.counts.claims);
    assert_eq!(run.answers.iter().map(|a| a.n_claims).sum::<usize>(), lines);
}

#[test]
fn repeated_and_parallel_runs_are_identical() {
    let cfg = toy_config();
    let a = run_pipeline(&cfg).unwrap();
    let b = run_pipeline(&cfg).unwrap();
    assert_eq!(summary_json(&a), summary_json(&b));
    let mut wide = cfg.clone();
    wide.workers = 4;
    let c = run_pipeline(&wide).unwrap();
    assert_eq!(claims_jsonl(&a), claims_jsonl(&c));
    assert_eq!(answers_jsonl(&a), answers_jsonl(&c));
}

#[test]
fn beta_one_reproduces_textual_scores() {
    let mut cfg = toy_config();
    cfg.fusion.beta = 1.0;
    let run = run_pipeline(&cfg).unwrap();
    let eps = cfg.fusion.epsilon;
    for r in &run.claims {
        assert!((r.p_star - r.p_nli).abs() <= eps, "{}", r.claim_id);
        if r.s_kg.is_none() {
            assert_eq!(r.p_star, r.p_nli);
        } else {
            assert_eq!(r.p_star, r.p_nli.clamp(eps, 1.0 - eps));
        }
    }
    assert!(run.claims.iter().any(|r| r.s_kg.is_some()));
}

#[test]
fn disabled_kg_and_zero_coverage_give_identical_scores() {
    let mut disabled = toy_config();
    disabled.kg.as_mut().unwrap().enabled = false;
    // a relation map that no claim relation canonicalizes to leaves the KG
    // loaded but every claim uncovered
    let dir = tempfile::tempdir().unwrap();
    let relmap = dir.path().join("relmap.txt");
    std::fs::write(&relmap, "prescribed_for = Compound:treats:Disease\n").unwrap();
    let mut uncovered = toy_config();
    uncovered.kg.as_mut().unwrap().relmap = Some(relmap);
    let a = run_pipeline(&disabled).unwrap();
    let b = run_pipeline(&uncovered).unwrap();
    let p_a: Vec<f64> = a.claims.iter().map(|r| r.p_star).collect();
    let p_b: Vec<f64> = b.claims.iter().map(|r| r.p_star).collect();
    assert!(b.claims.iter().all(|r| r.s_kg.is_none()));
    assert_eq!(b.counts.kg_aligned_claims, 0);
    assert_eq!(p_a, p_b);
    assert!(a.claims.iter().all(|r| r.p_star == r.p_nli));
    assert_eq!(a.kg_coverage, None);
    assert_eq!(b.kg_coverage.unwrap().pair, 0.0);
}

#[test]
fn summary_echoes_effective_config() {
    let mut cfg = toy_config();
    cfg.seed = 17;
    let run = run_pipeline(&cfg).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&summary_json(&run)).unwrap();
    let echo = &summary["config"];
    assert_eq!(echo["seed"], 17);
    for key in ["alpha", "beta", "tau", "tau_nli", "calibration", "epsilon"] {
        assert!(!echo["fusion"][key].is_null(), "{key}");
    }
    for key in ["theta_link", "theta_match", "workers", "self_know"] {
        assert!(!echo[key].is_null(), "{key}");
    }
    assert!(summary["warnings"].is_array());
}

#[test]
fn run_without_warnings_reports_an_empty_list() {
    let mut cfg = toy_config();
    cfg.kg = None;
    cfg.checkers.retain(|c| c.id == "med");
    let run = run_pipeline(&cfg).unwrap();
    assert!(run.warnings.is_empty());
    let summary: serde_json::Value = serde_json::from_str(&summary_json(&run)).unwrap();
    assert_eq!(summary["warnings"], serde_json::json!([]));
}

#[test]
fn minmax_without_range_fits_on_the_run() {
    let mut cfg = toy_config();
    cfg.fusion.calibration = claimcheck::fusion::CalibrationMode::Minmax;
    let run = run_pipeline(&cfg).unwrap();
    let aligned: Vec<f64> = run
        .claims
        .iter()
        .chain(&run.reference_claims)
        .filter_map(|r| r.s_kg)
        .collect();
    let lo = aligned.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(run.calibrator.s_min, Some(lo));
    assert!(run.warnings.iter().any(|w| w.contains("min-max range fitted")));
}

#[test]
fn heuristic_checker_runs_without_fixtures() {
    let text = "corpus = \"corpus.jsonl\"\n[[checkers]]\nid = \"lex\"\nkind = \"heuristic\"\n";
    let cfg = RunConfig::from_toml(text, &toy_dir()).unwrap();
    let run = run_pipeline(&cfg).unwrap();
    assert_eq!(run.claims.len(), 16);
    let first = run.claims.iter().find(|r| r.claim_id == "q01-c1").unwrap();
    assert_eq!(first.fused_verdict, claimcheck::NliLabel::Entail);
}
