use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use claimcheck::config::RunConfig;
use claimcheck::corpus::{load_instances, write_checker_outputs, CorpusFormat};
use claimcheck::fusion::CalibrationMode;
use claimcheck::kg::{claim_kge, kg_coverage, transe_plausibility};
use claimcheck::pipeline::{answer_claim_jobs, claim_jobs, load_checkers, load_kg_context, run_checkers, run_pipeline};
use claimcheck::report::{
    self, claims_jsonl, emit_reports, load_claim_results, load_summary, render_summary, write_files, CLAIMS_FILE,
    SUMMARY_FILE,
};
use claimcheck::tuning::{
    beta_sweep, grid_search, tau_sweep, write_beta_sweep_csv, write_tau_sweep_csv, DevClaim, GridSpec,
};

#[derive(Parser)]
#[command(name = "claimcheck", version, about = "Claim-level verification and diagnostics for RAG answers")]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, or output file for tune and the sweeps.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,

    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Also judge every claim without passages.
    #[arg(long = "self-know", global = true)]
    self_know: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline; writes claims.jsonl, answers.jsonl and summary.json.
    Run,
    /// Run the checkers and write their outputs.
    Check,
    /// Align claims to the knowledge graph and write the alignments.
    Link,
    /// Score and fuse claims; writes claims.jsonl only.
    Fuse,
    /// Grid-search alpha, beta and tau on a labeled dev file.
    Tune {
        /// claims.jsonl with gold labels.
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value = "none")]
        calib: CalibrationMode,
    },
    /// Supported rate and flip rate across beta.
    SweepBeta {
        #[arg(long)]
        claims: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value = "none")]
        calib: CalibrationMode,
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Supported rate and safety error across tau.
    SweepTau {
        #[arg(long)]
        claims: PathBuf,
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Print the summary of a finished run.
    Report,
    /// Check the config, the corpus and the checker outputs.
    Validate,
}

fn load_config(g: &Global) -> anyhow::Result<RunConfig> {
    let path = g.config.as_ref().ok_or_else(|| anyhow!("--config is required for this command"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.self_know |= g.self_know;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(g: &Global, cfg: Option<&RunConfig>) -> anyhow::Result<PathBuf> {
    if let Some(out) = &g.out {
        return Ok(out.clone());
    }
    cfg.and_then(|c| c.output_dir.as_ref().map(|d| c.resolve(d)))
        .ok_or_else(|| anyhow!("no output directory: pass --out or set output_dir"))
}

fn out_file(g: &Global) -> anyhow::Result<&Path> {
    let path = g.out.as_deref().ok_or_else(|| anyhow!("--out FILE is required"))?;
    report::ensure_writable(&[path.to_path_buf()], g.force)?;
    Ok(path)
}

fn load_grid(path: Option<&Path>) -> anyhow::Result<GridSpec> {
    Ok(match path {
        Some(p) => GridSpec::load(p)?,
        None => GridSpec::default(),
    })
}

fn dev_claims(path: &Path) -> anyhow::Result<Vec<DevClaim>> {
    let results = load_claim_results(path)?;
    Ok(results.iter().map(DevClaim::from_result).collect())
}

fn cmd_run(g: &Global, write_all: bool) -> anyhow::Result<()> {
    let cfg = load_config(g)?;
    let dir = out_dir(g, Some(&cfg))?;
    let run = run_pipeline(&cfg)?;
    for w in &run.warnings {
        log::warn!("{w}");
    }
    if write_all {
        emit_reports(&run, &dir, g.force)?;
        print!("{}", render_summary(&report::Summary::from_run(&run)));
    } else {
        write_files(&dir, &[(dir.join(CLAIMS_FILE), claims_jsonl(&run))], g.force)?;
        println!("{} claims fused", run.claims.len());
    }
    println!("reports written to {}", dir.display());
    Ok(())
}

fn cmd_check(g: &Global) -> anyhow::Result<()> {
    let cfg = load_config(g)?;
    cfg.check_files()?;
    let dir = out_dir(g, Some(&cfg))?;
    let corpus = load_instances(&cfg.resolve(&cfg.corpus), CorpusFormat::Jsonl)?;
    let mut warnings = Vec::new();
    let checkers = load_checkers(&cfg, &corpus, &mut warnings)?;
    let jobs = claim_jobs(&corpus);
    let answer_jobs = answer_claim_jobs(&corpus);
    let mut targets = vec![(dir.join("checker_outputs.jsonl"), false)];
    if cfg.self_know {
        targets.push((dir.join("empty_context_outputs.jsonl"), true));
    }
    let paths: Vec<PathBuf> = targets.iter().map(|(p, _)| p.clone()).collect();
    report::ensure_writable(&paths, g.force)?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for (path, empty) in targets {
        let jobs = if empty { &answer_jobs } else { &jobs };
        let outputs: Vec<_> = run_checkers(&checkers, jobs, cfg.workers, empty)?
            .into_iter()
            .flatten()
            .collect();
        write_checker_outputs(&path, &outputs)?;
        println!("{} outputs written to {}", outputs.len(), path.display());
    }
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(())
}

fn cmd_link(g: &Global) -> anyhow::Result<()> {
    let cfg = load_config(g)?;
    cfg.check_files()?;
    let dir = out_dir(g, Some(&cfg))?;
    let mut warnings = Vec::new();
    let kg = load_kg_context(&cfg, &mut warnings)?;
    let Some(store) = &kg.store else {
        bail!("the knowledge graph is disabled in {}", g.config.as_ref().unwrap().display());
    };
    let corpus = load_instances(&cfg.resolve(&cfg.corpus), CorpusFormat::Jsonl)?;
    let mut lines = String::new();
    let mut alignments = Vec::new();
    for inst in &corpus {
        for claim in &inst.claims {
            let a = kg.link(claim, cfg.theta_link);
            let candidates: Vec<_> = a
                .candidates
                .iter()
                .map(|c| {
                    json!({
                        "head": store.entity_name(c.head),
                        "relation": store.relation_name(c.relation),
                        "tail": store.entity_name(c.tail),
                        "s_text": c.s_text,
                        "p_kge": transe_plausibility(c.head, c.relation, c.tail, store),
                    })
                })
                .collect();
            let record = json!({
                "claim_id": a.claim_id,
                "canonical_relation": a.canonical_relation,
                "candidates": candidates,
                "s_text": a.s_text_claim,
                "p_kge": claim_kge(&a, store),
                "covered_node": a.covered_node,
                "covered_pair": a.covered_pair,
            });
            lines.push_str(&serde_json::to_string(&record)?);
            lines.push('\n');
            alignments.push(a);
        }
    }
    write_files(&dir, &[(dir.join("alignments.jsonl"), lines)], g.force)?;
    if !alignments.is_empty() {
        let cov = kg_coverage(&alignments)?;
        println!(
            "{} claims linked; node coverage {:.3}, pair coverage {:.3}",
            alignments.len(),
            cov.node,
            cov.pair
        );
    }
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(())
}

fn cmd_tune(g: &Global, dev: &Path, grid: Option<&Path>, calib: CalibrationMode) -> anyhow::Result<()> {
    let grid = load_grid(grid)?;
    let claims = dev_claims(dev)?;
    let eps = match &g.config {
        Some(_) => load_config(g)?.fusion.epsilon,
        None => claimcheck::fusion::DEFAULT_EPSILON,
    };
    let best = grid_search(&claims, &grid, calib, eps)?;
    let text = serde_json::to_string_pretty(&best)? + "\n";
    match &g.out {
        Some(_) => {
            let path = out_file(g)?;
            std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            println!("alpha={} beta={} tau={} macro_f1={}", best.alpha, best.beta, best.tau, best.macro_f1);
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_sweep_beta(
    g: &Global,
    claims: &Path,
    alpha: f64,
    tau: f64,
    calib: CalibrationMode,
    grid: Option<&Path>,
) -> anyhow::Result<()> {
    let path = out_file(g)?;
    let grid = load_grid(grid)?;
    let records = beta_sweep(&dev_claims(claims)?, alpha, tau, &grid, calib, claimcheck::fusion::DEFAULT_EPSILON)?;
    write_beta_sweep_csv(path, &records)?;
    println!("{} rows written to {}", records.len(), path.display());
    Ok(())
}

fn cmd_sweep_tau(g: &Global, claims: &Path, grid: Option<&Path>) -> anyhow::Result<()> {
    let path = out_file(g)?;
    let grid = load_grid(grid)?;
    let records = tau_sweep(&load_claim_results(claims)?, &grid.tau_grid)?;
    write_tau_sweep_csv(path, &records)?;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    println!("{:>6} {:>10} {:>11} {:>15}", "tau", "supported", "safety_err", "safety_err@tau");
    for r in &records {
        println!(
            "{:>6} {:>10.3} {:>11} {:>15}",
            r.tau,
            r.supported_rate,
            fmt(r.safety_err),
            fmt(r.safety_err_at_tau)
        );
    }
    Ok(())
}

fn cmd_report(g: &Global) -> anyhow::Result<()> {
    let cfg = match &g.config {
        Some(_) => Some(load_config(g)?),
        None => None,
    };
    let dir = out_dir(g, cfg.as_ref())?;
    let summary = load_summary(&dir.join(SUMMARY_FILE))?;
    print!("{}", render_summary(&summary));
    Ok(())
}

fn cmd_validate(g: &Global) -> anyhow::Result<()> {
    let cfg = load_config(g)?;
    cfg.check_files()?;
    let corpus = load_instances(&cfg.resolve(&cfg.corpus), CorpusFormat::Jsonl)?;
    let mut warnings = Vec::new();
    load_checkers(&cfg, &corpus, &mut warnings)?;
    claimcheck::pipeline::load_weights(&cfg)?;
    load_kg_context(&cfg, &mut warnings)?;
    for w in &warnings {
        println!("warning: {w}");
    }
    let n_claims: usize = corpus.iter().map(|i| i.all_claims().count()).sum();
    println!("ok: {} instances, {} claims, {} checkers", corpus.len(), n_claims, cfg.checkers.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Run => cmd_run(g, true),
        Command::Fuse => cmd_run(g, false),
        Command::Check => cmd_check(g),
        Command::Link => cmd_link(g),
        Command::Tune { dev, grid, calib } => cmd_tune(g, dev, grid.as_deref(), *calib),
        Command::SweepBeta {
            claims,
            alpha,
            tau,
            calib,
            grid,
        } => cmd_sweep_beta(g, claims, *alpha, *tau, *calib, grid.as_deref()),
        Command::SweepTau { claims, grid } => cmd_sweep_tau(g, claims, grid.as_deref()),
        Command::Report => cmd_report(g),
        Command::Validate => cmd_validate(g),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
