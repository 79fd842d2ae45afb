//! KG-score calibration, logit-space fusion of textual and KG support, and the
//! fused three-way verdict.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::sigmoid;
use crate::model::{argmax_label, LabelDistribution, NliLabel};

pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMode {
    #[default]
    None,
    Minmax,
}

impl std::str::FromStr for CalibrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CalibrationMode::None),
            "minmax" => Ok(CalibrationMode::Minmax),
            other => Err(Error::Config(format!("unknown calibration mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CalibrationMode::None => "none",
            CalibrationMode::Minmax => "minmax",
        })
    }
}

/// Maps raw KG scores into `[eps, 1 - eps]`. In min-max mode the range comes
/// from KG-aligned development claims.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub mode: CalibrationMode,
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub epsilon: f64,
}

impl Default for Calibrator {
    fn default() -> Self {
        Calibrator::none(DEFAULT_EPSILON)
    }
}

impl Calibrator {
    pub fn none(epsilon: f64) -> Self {
        Calibrator {
            mode: CalibrationMode::None,
            s_min: None,
            s_max: None,
            epsilon,
        }
    }

    pub fn minmax(s_min: f64, s_max: f64, epsilon: f64) -> Result<Self> {
        let cal = Calibrator {
            mode: CalibrationMode::Minmax,
            s_min: Some(s_min),
            s_max: Some(s_max),
            epsilon,
        };
        cal.validate()?;
        Ok(cal)
    }

    /// An unfitted calibrator of the given mode.
    pub fn unfitted(mode: CalibrationMode, epsilon: f64) -> Self {
        Calibrator {
            mode,
            ..Calibrator::none(epsilon)
        }
    }

    /// Fits the range on KG scores of aligned development claims. Mode `none`
    /// ignores the scores.
    pub fn fit(mode: CalibrationMode, aligned_scores: &[f64], epsilon: f64) -> Result<Self> {
        match mode {
            CalibrationMode::None => {
                let cal = Calibrator::none(epsilon);
                cal.validate()?;
                Ok(cal)
            }
            CalibrationMode::Minmax => {
                if aligned_scores.is_empty() {
                    return Err(Error::NoAlignedClaims);
                }
                let lo = aligned_scores.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = aligned_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Calibrator::minmax(lo, hi, epsilon)
            }
        }
    }

    pub fn is_fitted(&self) -> bool {
        self.mode == CalibrationMode::None || (self.s_min.is_some() && self.s_max.is_some())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::Config(format!("epsilon must lie in (0, 0.5), got {}", self.epsilon)));
        }
        if let (CalibrationMode::Minmax, Some(lo), Some(hi)) = (self.mode, self.s_min, self.s_max) {
            // written so that NaN bounds are rejected too
            if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::Config(format!(
                    "min-max calibration needs s_max > s_min, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn clip(&self, p: f64) -> f64 {
        p.clamp(self.epsilon, 1.0 - self.epsilon)
    }

    pub fn calibrate(&self, s: f64) -> Result<f64> {
        match self.mode {
            CalibrationMode::None => Ok(self.clip(s)),
            CalibrationMode::Minmax => {
                let (Some(lo), Some(hi)) = (self.s_min, self.s_max) else {
                    return Err(Error::UnfittedCalibrator);
                };
                Ok(self.clip((s - lo) / (hi - lo)))
            }
        }
    }
}

/// `logit(clip(p, eps, 1 - eps))`; finite for every input in [0,1].
pub fn safe_logit(p: f64, epsilon: f64) -> f64 {
    let q = p.clamp(epsilon, 1.0 - epsilon);
    (q / (1.0 - q)).ln()
}

/// Fusion hyperparameters. Recorded verbatim in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub tau_nli: f64,
    pub calibrator: Calibrator,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            alpha: 0.5,
            beta: 0.5,
            tau: 0.5,
            tau_nli: 0.5,
            calibrator: Calibrator::default(),
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0,1], got {v}")))
            }
        };
        let open = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0,1), got {v}")))
            }
        };
        unit("alpha", self.alpha)?;
        unit("beta", self.beta)?;
        open("tau", self.tau)?;
        open("tau_nli", self.tau_nli)?;
        self.calibrator.validate()
    }
}

/// Fused support score.
///
/// Without a KG score the textual probability is returned unchanged. Otherwise
/// `sigmoid(beta * logit(p_nli) + (1 - beta) * logit(calibrate(s_kg)))`; the
/// endpoints `beta = 1` and `beta = 0` return the clipped textual probability
/// and the calibrated KG score directly.
pub fn fuse(p_nli: f64, s_kg: Option<f64>, beta: f64, calibrator: &Calibrator) -> Result<f64> {
    let Some(s_kg) = s_kg else {
        return Ok(p_nli);
    };
    let kg = calibrator.calibrate(s_kg)?;
    if beta == 1.0 {
        return Ok(calibrator.clip(p_nli));
    }
    if beta == 0.0 {
        return Ok(kg);
    }
    let eps = calibrator.epsilon;
    Ok(sigmoid(beta * safe_logit(p_nli, eps) + (1.0 - beta) * safe_logit(kg, eps)))
}

/// Three-way distribution after substituting the fused Entail logit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedVerdict {
    pub label: NliLabel,
    pub dist: LabelDistribution,
}

/// Replaces the Entail logit of `nli_dist` with `logit(p_star)`, keeps the
/// Neutral and Contradict logits, and takes the softmax argmax.
pub fn fused_verdict(nli_dist: &LabelDistribution, p_star: f64, epsilon: f64) -> FusedVerdict {
    let logits = [
        safe_logit(p_star, epsilon),
        safe_logit(nli_dist.neutral, epsilon),
        safe_logit(nli_dist.contradict, epsilon),
    ];
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = logits.map(|l| (l - max).exp());
    // softmax is monotone, so the argmax is taken on the logits directly
    FusedVerdict {
        label: argmax_label(logits),
        dist: LabelDistribution::from_scores(exp),
    }
}

/// `p_star >= tau`.
pub fn support_decision(p_star: f64, tau: f64) -> bool {
    p_star >= tau
}

/// Verdict with the support threshold applied: Entail when `p_star >= tau`,
/// otherwise the larger of the Neutral and Contradict scores (Neutral on ties).
pub fn thresholded_verdict(nli_dist: &LabelDistribution, p_star: f64, tau: f64) -> NliLabel {
    if support_decision(p_star, tau) {
        NliLabel::Entail
    } else if nli_dist.contradict > nli_dist.neutral {
        NliLabel::Contradict
    } else {
        NliLabel::Neutral
    }
}
