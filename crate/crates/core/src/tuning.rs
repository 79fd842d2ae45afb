//! Grid search over (alpha, beta, tau) and the beta / tau sensitivity sweeps.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{macro_f1, safety_error_rate, safety_error_rate_at};
use crate::error::{Error, Result};
use crate::fusion::{fuse, support_decision, thresholded_verdict, CalibrationMode, Calibrator};
use crate::kg::combine_kg;
use crate::model::{FusedClaimResult, LabelDistribution, NliLabel};

pub const DEFAULT_BETA_REF: f64 = 0.9;
pub const BETA_SWEEP_HEADER: [&str; 3] = ["beta", "fused_supported_rate", "flip_rate"];
pub const TAU_SWEEP_HEADER: [&str; 3] = ["tau", "supported_rate", "safety_err"];

fn tenths() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub beta_ref: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            alpha_grid: tenths(),
            beta_grid: tenths(),
            tau_grid: (0..=12).map(|i| (30 + 5 * i) as f64 / 100.0).collect(),
            beta_ref: DEFAULT_BETA_REF,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        fn check(name: &str, grid: &[f64], ok: impl Fn(f64) -> bool) -> Result<()> {
            if grid.is_empty() {
                return Err(Error::Config(format!("{name} is empty")));
            }
            if let Some(v) = grid.iter().find(|v| !ok(**v)) {
                return Err(Error::Config(format!("{name} value {v} out of range")));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!("{name} must be strictly increasing")));
            }
            Ok(())
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        check("alpha_grid", &self.alpha_grid, unit)?;
        check("beta_grid", &self.beta_grid, unit)?;
        check("tau_grid", &self.tau_grid, |v| v > 0.0 && v < 1.0)?;
        if !unit(self.beta_ref) {
            return Err(Error::Config(format!("beta_ref {} out of range", self.beta_ref)));
        }
        Ok(())
    }

    /// Reads a TOML grid file; omitted keys keep their defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let grid: GridSpec = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        grid.validate()?;
        Ok(grid)
    }
}

/// Per-claim inputs to tuning and sweeps: the ensemble distribution and the
/// KG components, from which `s_kg` is recomputed for each alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevClaim {
    pub claim_id: String,
    pub nli: LabelDistribution,
    /// Absent for KG-uncovered claims.
    pub p_kge: Option<f64>,
    pub s_text: f64,
    pub gold_label: Option<NliLabel>,
}

impl DevClaim {
    pub fn p_nli(&self) -> f64 {
        self.nli.entail
    }

    pub fn s_kg(&self, alpha: f64) -> Option<f64> {
        self.p_kge.map(|p| combine_kg(p, self.s_text, alpha))
    }

    pub fn from_result(result: &FusedClaimResult) -> Self {
        DevClaim {
            claim_id: result.claim_id.clone(),
            nli: result.nli,
            p_kge: result.p_kge,
            s_text: result.s_text.unwrap_or(0.0),
            gold_label: result.gold_label,
        }
    }
}

/// Fits a calibrator on the aligned claims' KG scores at `alpha`. Without any
/// aligned claim the calibrator is never consulted, so an unfitted one is
/// returned.
pub fn fit_calibrator(claims: &[DevClaim], alpha: f64, mode: CalibrationMode, epsilon: f64) -> Result<Calibrator> {
    let scores: Vec<f64> = claims.iter().filter_map(|c| c.s_kg(alpha)).collect();
    if scores.is_empty() {
        return Ok(Calibrator::unfitted(mode, epsilon));
    }
    Calibrator::fit(mode, &scores, epsilon)
}

fn fused_scores(claims: &[DevClaim], alpha: f64, beta: f64, cal: &Calibrator) -> Result<Vec<f64>> {
    claims
        .iter()
        .map(|c| fuse(c.p_nli(), c.s_kg(alpha), beta, cal))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub macro_f1: f64,
    pub calibrator: Calibrator,
    pub cells_evaluated: usize,
}

/// Higher macro-F1 wins; ties go to smaller beta, then tau, then alpha.
fn better(a: &TuneResult, b: &TuneResult) -> bool {
    match a.macro_f1.total_cmp(&b.macro_f1) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => {
            (a.beta, a.tau, a.alpha).partial_cmp(&(b.beta, b.tau, b.alpha)) == Some(Ordering::Less)
        }
    }
}

/// Exhaustive search maximizing dev macro-F1 of the tau-thresholded fused
/// verdicts. The calibrator is refit for each alpha, since alpha changes the
/// KG scores it is fitted on.
pub fn grid_search(dev: &[DevClaim], grid: &GridSpec, mode: CalibrationMode, epsilon: f64) -> Result<TuneResult> {
    if dev.is_empty() {
        return Err(Error::EmptyDev);
    }
    grid.validate()?;
    let golds: Vec<NliLabel> = dev
        .iter()
        .map(|c| c.gold_label.ok_or_else(|| Error::NoGoldLabels(c.claim_id.clone())))
        .collect::<Result<_>>()?;

    let per_alpha: Vec<TuneResult> = grid
        .alpha_grid
        .par_iter()
        .map(|&alpha| -> Result<TuneResult> {
            let cal = fit_calibrator(dev, alpha, mode, epsilon)?;
            let mut best: Option<TuneResult> = None;
            for &beta in &grid.beta_grid {
                let p_star = fused_scores(dev, alpha, beta, &cal)?;
                for &tau in &grid.tau_grid {
                    let preds: Vec<NliLabel> = dev
                        .iter()
                        .zip(&p_star)
                        .map(|(c, p)| thresholded_verdict(&c.nli, *p, tau))
                        .collect();
                    let cell = TuneResult {
                        alpha,
                        beta,
                        tau,
                        macro_f1: macro_f1(&preds, &golds)?.macro_f1,
                        calibrator: cal,
                        cells_evaluated: 0,
                    };
                    if best.as_ref().is_none_or(|b| better(&cell, b)) {
                        best = Some(cell);
                    }
                }
            }
            Ok(best.expect("grids are non-empty"))
        })
        .collect::<Result<_>>()?;

    let mut best = per_alpha
        .into_iter()
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .expect("alpha grid is non-empty");
    best.cells_evaluated = grid.alpha_grid.len() * grid.beta_grid.len() * grid.tau_grid.len();
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub beta: f64,
    pub fused_supported_rate: f64,
    pub flip_rate: f64,
}

/// Beta sweep on the KG-aligned subset with a calibrator fitted once on that
/// subset.
pub fn beta_sweep(
    claims: &[DevClaim],
    alpha: f64,
    tau: f64,
    grid: &GridSpec,
    mode: CalibrationMode,
    epsilon: f64,
) -> Result<Vec<SweepRecord>> {
    if claims.is_empty() {
        return Err(Error::EmptyInput("claims"));
    }
    let cal = fit_calibrator(claims, alpha, mode, epsilon)?;
    beta_sweep_calibrated(claims, alpha, tau, grid, &cal)
}

/// Beta sweep with a caller-supplied calibrator.
pub fn beta_sweep_calibrated(
    claims: &[DevClaim],
    alpha: f64,
    tau: f64,
    grid: &GridSpec,
    cal: &Calibrator,
) -> Result<Vec<SweepRecord>> {
    if claims.is_empty() {
        return Err(Error::EmptyInput("claims"));
    }
    let aligned: Vec<DevClaim> = claims.iter().filter(|c| c.p_kge.is_some()).cloned().collect();
    if aligned.is_empty() {
        return Err(Error::NoAlignedClaims);
    }
    let decisions = |beta: f64| -> Result<Vec<bool>> {
        Ok(fused_scores(&aligned, alpha, beta, cal)?
            .into_iter()
            .map(|p| support_decision(p, tau))
            .collect())
    };
    let reference = decisions(grid.beta_ref)?;
    let n = aligned.len() as f64;
    grid.beta_grid
        .iter()
        .map(|&beta| {
            let sup = decisions(beta)?;
            let supported = sup.iter().filter(|s| **s).count();
            let flips = sup.iter().zip(&reference).filter(|(a, b)| a != b).count();
            Ok(SweepRecord {
                beta,
                fused_supported_rate: supported as f64 / n,
                flip_rate: flips as f64 / n,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauRecord {
    pub tau: f64,
    pub supported_rate: f64,
    /// Verdict-based, so the same at every tau.
    pub safety_err: Option<f64>,
    /// Safety error under the tau-thresholded verdict.
    pub safety_err_at_tau: Option<f64>,
}

pub fn tau_sweep(results: &[FusedClaimResult], tau_grid: &[f64]) -> Result<Vec<TauRecord>> {
    if results.is_empty() {
        return Err(Error::EmptyInput("claim results"));
    }
    let safety_err = safety_error_rate(results);
    let n = results.len() as f64;
    Ok(tau_grid
        .iter()
        .map(|&tau| TauRecord {
            tau,
            supported_rate: results.iter().filter(|r| support_decision(r.p_star, tau)).count() as f64 / n,
            safety_err,
            safety_err_at_tau: safety_error_rate_at(results, tau),
        })
        .collect())
}

fn write_csv<const N: usize>(path: &Path, header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        let wrap = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(wrap)?;
        for row in rows {
            w.write_record(&row).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn write_beta_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    write_csv(
        path,
        BETA_SWEEP_HEADER,
        records
            .iter()
            .map(|r| [r.beta.to_string(), r.fused_supported_rate.to_string(), r.flip_rate.to_string()]),
    )
}

/// Safety error is left empty when no claim is safety-flagged.
pub fn write_tau_sweep_csv(path: &Path, records: &[TauRecord]) -> Result<()> {
    write_csv(
        path,
        TAU_SWEEP_HEADER,
        records.iter().map(|r| {
            [
                r.tau.to_string(),
                r.supported_rate.to_string(),
                r.safety_err.map(|v| v.to_string()).unwrap_or_default(),
            ]
        }),
    )
}
