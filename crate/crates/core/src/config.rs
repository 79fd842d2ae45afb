//! Run configuration, read from TOML. Relative paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backends::RemoteCheckerConfig;
use crate::diagnostics::DEFAULT_THETA_MATCH;
use crate::error::{Error, Result};
use crate::fusion::{CalibrationMode, Calibrator, FusionConfig, DEFAULT_EPSILON};
use crate::kg::DEFAULT_THETA_LINK;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckerKind {
    /// Precomputed outputs read from a file.
    Fixture,
    Heuristic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckerSpec {
    pub id: String,
    pub kind: CheckerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    /// Outputs for the same claims judged without passages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empty_context_outputs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<RemoteCheckerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KgConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Directory holding the triples and both embedding files.
    pub dir: PathBuf,
    /// Built-in biomedical mapping when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relmap: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub tau_nli: f64,
    pub calibration: CalibrationMode,
    pub epsilon: f64,
    /// Min-max range; fitted on the run's own aligned claims when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
}

impl Default for FusionSection {
    fn default() -> Self {
        let d = FusionConfig::default();
        FusionSection {
            alpha: d.alpha,
            beta: d.beta,
            tau: d.tau,
            tau_nli: d.tau_nli,
            calibration: CalibrationMode::None,
            epsilon: DEFAULT_EPSILON,
            s_min: None,
            s_max: None,
        }
    }
}

impl FusionSection {
    /// The calibrator given by the config alone; unfitted for min-max without
    /// an explicit range.
    pub fn calibrator(&self) -> Result<Calibrator> {
        match (self.calibration, self.s_min, self.s_max) {
            (CalibrationMode::None, None, None) => Ok(Calibrator::none(self.epsilon)),
            (CalibrationMode::None, _, _) => Err(Error::Config(
                "s_min/s_max are only meaningful with calibration = \"minmax\"".into(),
            )),
            (CalibrationMode::Minmax, Some(lo), Some(hi)) => Calibrator::minmax(lo, hi, self.epsilon),
            (CalibrationMode::Minmax, None, None) => Ok(Calibrator::unfitted(CalibrationMode::Minmax, self.epsilon)),
            _ => Err(Error::Config("s_min and s_max must be given together".into())),
        }
    }

    pub fn fusion_config(&self, calibrator: Calibrator) -> FusionConfig {
        FusionConfig {
            alpha: self.alpha,
            beta: self.beta,
            tau: self.tau,
            tau_nli: self.tau_nli,
            calibrator,
        }
    }
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub checkers: Vec<CheckerSpec>,
    /// Uniform weights when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kg: Option<KgConfig>,
    #[serde(default)]
    pub fusion: FusionSection,
    #[serde(default = "default_theta_link")]
    pub theta_link: f64,
    #[serde(default = "default_theta_match")]
    pub theta_match: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub self_know: bool,
    /// Average corpus metrics per dataset before averaging across datasets.
    #[serde(default)]
    pub group_by_dataset: bool,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_theta_link() -> f64 {
    DEFAULT_THETA_LINK
}

fn default_theta_match() -> f64 {
    DEFAULT_THETA_MATCH
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.checkers.is_empty() {
            return Err(Error::Config("at least one checker is required".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for spec in &self.checkers {
            if !ids.insert(spec.id.as_str()) {
                return Err(Error::DuplicateId {
                    kind: "checker",
                    id: spec.id.clone(),
                });
            }
            let bad = |msg: &str| Err(Error::Config(format!("checker {:?}: {msg}", spec.id)));
            match spec.kind {
                CheckerKind::Fixture if spec.outputs.is_none() => return bad("fixture checkers need `outputs`"),
                CheckerKind::Remote => match &spec.remote {
                    None => return bad("remote checkers need a [checkers.remote] table"),
                    Some(r) => r.validate()?,
                },
                _ => {}
            }
            if spec.kind != CheckerKind::Remote && spec.remote.is_some() {
                return bad("`remote` is only valid for remote checkers");
            }
            if spec.kind != CheckerKind::Fixture && (spec.outputs.is_some() || spec.empty_context_outputs.is_some()) {
                return bad("output files are only valid for fixture checkers");
            }
        }
        for (name, v) in [("theta_link", self.theta_link), ("theta_match", self.theta_match)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let cal = self.fusion.calibrator()?;
        self.fusion.fusion_config(cal).validate()
    }

    /// Every file the run reads, resolved.
    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut files = vec![self.resolve(&self.corpus)];
        for spec in &self.checkers {
            files.extend(spec.outputs.iter().map(|p| self.resolve(p)));
            if self.self_know {
                files.extend(spec.empty_context_outputs.iter().map(|p| self.resolve(p)));
            }
        }
        files.extend(self.f1_table.iter().map(|p| self.resolve(p)));
        if let Some(kg) = self.kg.as_ref().filter(|k| k.enabled) {
            let dir = self.resolve(&kg.dir);
            for name in [
                crate::kg::TRIPLES_FILE,
                crate::kg::ENTITY_EMBEDDINGS_FILE,
                crate::kg::RELATION_EMBEDDINGS_FILE,
            ] {
                files.push(dir.join(name));
            }
        }
        if let Some(relmap) = self.kg.as_ref().and_then(|k| k.relmap.as_ref()) {
            files.push(self.resolve(relmap));
        }
        files
    }

    /// Fails on the first referenced input that does not exist.
    pub fn check_files(&self) -> Result<()> {
        if self.self_know {
            if let Some(spec) = self
                .checkers
                .iter()
                .find(|s| s.kind == CheckerKind::Fixture && s.empty_context_outputs.is_none())
            {
                return Err(Error::Config(format!(
                    "self-knowledge needs `empty_context_outputs` for fixture checker {:?}",
                    spec.id
                )));
            }
        }
        match self.input_files().into_iter().find(|p| !p.is_file()) {
            Some(missing) => Err(Error::Config(format!("input file {} does not exist", missing.display()))),
            None => Ok(()),
        }
    }

    pub fn kg_enabled(&self) -> bool {
        self.kg.as_ref().is_some_and(|k| k.enabled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
corpus = "corpus.jsonl"

[[checkers]]
id = "h"
kind = "heuristic"
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::from_toml(MINIMAL, Path::new("/base")).unwrap();
        assert_eq!(cfg.theta_link, 0.8);
        assert_eq!(cfg.theta_match, 0.5);
        assert_eq!(cfg.fusion, FusionSection::default());
        assert_eq!(cfg.workers, 1);
        assert_eq!(cfg.resolve(&cfg.corpus), PathBuf::from("/base/corpus.jsonl"));
        assert!(!cfg.kg_enabled());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::from_toml(MINIMAL, Path::new("/base")).unwrap();
        let echoed = toml::to_string(&cfg).unwrap();
        let again = RunConfig::from_toml(&echoed, Path::new("/base")).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_bad_configs() {
        let dup = format!("{MINIMAL}\n[[checkers]]\nid = \"h\"\nkind = \"heuristic\"\n");
        assert!(matches!(RunConfig::from_toml(&dup, Path::new("")), Err(Error::DuplicateId { .. })));
        let fixture = "corpus = \"c\"\n[[checkers]]\nid = \"f\"\nkind = \"fixture\"\n";
        assert!(RunConfig::from_toml(fixture, Path::new("")).is_err());
        let beta = format!("{MINIMAL}\n[fusion]\nbeta = 1.5\n");
        assert!(RunConfig::from_toml(&beta, Path::new("")).is_err());
        let half = format!("{MINIMAL}\n[fusion]\ncalibration = \"minmax\"\ns_min = 0.1\n");
        assert!(RunConfig::from_toml(&half, Path::new("")).is_err());
        let unknown = format!("{MINIMAL}\ncolour = 1\n");
        assert!(RunConfig::from_toml(&unknown, Path::new("")).is_err());
    }

    #[test]
    fn remote_checker_table() {
        let text = r#"
corpus = "c.jsonl"
[[checkers]]
id = "r"
kind = "remote"
[checkers.remote]
endpoint_url = "http://127.0.0.1:9/v1"
model_name = "m"
timeout = 2.0
max_retries = 1
api_key_env = "CHECKER_KEY"
"#;
        let cfg = RunConfig::from_toml(text, Path::new("")).unwrap();
        let remote = cfg.checkers[0].remote.as_ref().unwrap();
        assert_eq!(remote.api_key_env.as_deref(), Some("CHECKER_KEY"));
    }

    #[test]
    fn missing_files_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_toml(MINIMAL, dir.path()).unwrap();
        assert!(cfg.check_files().is_err());
        std::fs::write(dir.path().join("corpus.jsonl"), "").unwrap();
        cfg.check_files().unwrap();
    }
}
