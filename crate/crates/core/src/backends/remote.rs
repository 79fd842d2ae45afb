//! HTTP checker backend for hosted student models.
//!
//! Request body:
//! `{"model", "template_id", "prompt", "claim", "passages": [{"doc_id", "text"}]}`.
//! The reply is the strict verdict object, either as the whole body or as the
//! message content of a chat-completion style `choices` array.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{CheckerReply, ProbPolicy};
use crate::error::{Error, Result};
use crate::model::{CheckerOutput, Claim, LabelDistribution, NeutralType, Passage};

use super::CheckerBackend;

pub const NLI_TEMPLATE_ID: &str = "nli-strict-json";

const NLI_TEMPLATE: &str = "You are a strict NLI verifier for biomedical QA.

Goal:
Decide whether the CLAIM is supported by the provided PASSAGES.

Input:
- CLAIM: a single atomic claim (hypothesis).
- PASSAGES: retrieved text snippets (premises). Each passage includes a doc_id.

Decision labels:
- Entail: at least one passage explicitly supports the claim.
- Contradict: at least one passage explicitly states the opposite of the claim.
- Neutral: the passages do not provide sufficient information to entail or contradict.
  Neutral includes:
  (a) insufficient evidence (relevant but incomplete)
  (b) irrelevant evidence (not about the claim)

Constraints:
- Use ONLY the information in PASSAGES. Do NOT use external knowledge.
- If evidence is missing, choose Neutral (insufficient).
- Prefer Entail/Contradict only with explicit textual support.

Output format (STRICT JSON):
Return ONLY:
{
  \"label\": \"Entail\" | \"Neutral\" | \"Contradict\",
  \"prob\": {\"Entail\": <float>, \"Neutral\": <float>, \"Contradict\": <float>},
  \"neutral_type\": \"insufficient\" | \"irrelevant\" | null,
  \"rationale\": <string>,
  \"spans\": [
    {\"doc_id\": <string>, \"quote\": <string>}
  ]
}
- prob values must sum to 1.
- quote should be a short supporting/contradicting span (<= 25 words).
- If label is Neutral, spans can be [].

Now verify.

CLAIM:
{{claim}}

PASSAGES:
{{topk_passages_with_doc_id}}
";

/// Renders the verifier prompt for one claim.
pub fn render_prompt(template_id: &str, claim: &str, passages: &[Passage]) -> Result<String> {
    if template_id != NLI_TEMPLATE_ID {
        return Err(Error::Config(format!("unknown request template {template_id:?}")));
    }
    let rendered: Vec<String> = passages
        .iter()
        .map(|p| format!("[{}] {}", p.doc_id, p.text))
        .collect();
    Ok(NLI_TEMPLATE
        .replace("{{claim}}", claim)
        .replace("{{topk_passages_with_doc_id}}", &rendered.join("\n")))
}

fn default_template() -> String {
    NLI_TEMPLATE_ID.to_string()
}

fn default_backoff_ms() -> u64 {
    250
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteCheckerConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Per-request timeout in seconds.
    pub timeout: f64,
    pub max_retries: u32,
    #[serde(default = "default_template")]
    pub request_template_id: String,
    /// Name of the environment variable holding a bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// First retry delay; doubles on each further attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

impl RemoteCheckerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(Error::Config(format!("timeout must be positive, got {}", self.timeout)));
        }
        if self.max_retries > 10 {
            return Err(Error::Config(format!(
                "max_retries must be at most 10, got {}",
                self.max_retries
            )));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be at least 1".into()));
        }
        render_prompt(&self.request_template_id, "", &[]).map(|_| ())
    }
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    template_id: &'a str,
    prompt: String,
    claim: &'a str,
    passages: &'a [Passage],
}

enum Attempt {
    Transport(String),
    Malformed(String),
}

pub struct RemoteBackend {
    checker_id: String,
    cfg: RemoteCheckerConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl RemoteBackend {
    pub fn new(checker_id: impl Into<String>, cfg: RemoteCheckerConfig) -> Result<Self> {
        cfg.validate()?;
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::Config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteBackend {
            checker_id: checker_id.into(),
            cfg,
            agent,
            api_key,
        })
    }

    pub fn config(&self) -> &RemoteCheckerConfig {
        &self.cfg
    }

    fn attempt(&self, body: &Request<'_>, claim_id: &str) -> std::result::Result<CheckerOutput, Attempt> {
        let mut req = self.agent.post(&self.cfg.endpoint_url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Attempt::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(Attempt::Transport(format!("HTTP {status}")));
        }
        let reply = parse_reply(&text).map_err(Attempt::Malformed)?;
        let mut warnings = Vec::new();
        let out = reply
            .into_output(&self.checker_id, claim_id, ProbPolicy::Lenient, &mut warnings)
            .map_err(|e| Attempt::Malformed(e.to_string()))?;
        for w in warnings {
            log::warn!("{w}");
        }
        Ok(out)
    }

    fn degraded(&self, claim_id: &str, reason: String) -> CheckerOutput {
        let dist = LabelDistribution {
            entail: 0.0,
            neutral: 1.0,
            contradict: 0.0,
        };
        let mut out = CheckerOutput::from_dist(&self.checker_id, claim_id, dist);
        out.neutral_type = Some(NeutralType::Insufficient);
        out.rationale = Some(format!("degraded: {reason}"));
        out.degraded = true;
        out
    }
}

impl CheckerBackend for RemoteBackend {
    fn checker_id(&self) -> &str {
        &self.checker_id
    }

    /// Retries transport failures and malformed replies up to `max_retries`
    /// times with exponential backoff. Exhausted transport failures are
    /// errors; a final malformed reply degrades to a Neutral output.
    fn classify(&self, claim: &Claim, passages: &[Passage]) -> Result<CheckerOutput> {
        let body = Request {
            model: &self.cfg.model_name,
            template_id: &self.cfg.request_template_id,
            prompt: render_prompt(&self.cfg.request_template_id, &claim.text, passages)?,
            claim: &claim.text,
            passages,
        };
        let attempts = self.cfg.max_retries + 1;
        let mut last = Attempt::Transport("no attempt made".into());
        for n in 0..attempts {
            if n > 0 {
                let delay = self.cfg.backoff_base_ms.saturating_mul(1 << (n - 1).min(16));
                thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(&body, &claim.claim_id) {
                Ok(out) => return Ok(out),
                Err(e) => last = e,
            }
        }
        match last {
            Attempt::Transport(message) => Err(Error::Transport { attempts, message }),
            Attempt::Malformed(reason) => {
                log::warn!("{}/{}: degraded reply: {reason}", self.checker_id, claim.claim_id);
                Ok(self.degraded(&claim.claim_id, reason))
            }
        }
    }
}

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

fn parse_reply(text: &str) -> std::result::Result<CheckerReply, String> {
    let value: Value = serde_json::from_str(strip_fences(text)).map_err(|e| e.to_string())?;
    let content = value
        .pointer("/choices/0/message/content")
        .or_else(|| value.pointer("/choices/0/text"))
        .and_then(Value::as_str);
    match content {
        Some(inner) => serde_json::from_str(strip_fences(inner)).map_err(|e| e.to_string()),
        None => serde_json::from_value(value).map_err(|e| e.to_string()),
    }
}
