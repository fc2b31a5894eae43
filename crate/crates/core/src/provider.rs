// SPDX-License-Identifier: Apache-2.0

//! Text-generation backends: a chat-completions HTTP client and a fixture-driven script.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::operators::{PromptBundle, PromptKind};

pub const OPERATOR_TEMPERATURE: f64 = 0.8;
pub const FIDELITY_TEMPERATURE: f64 = 0.2;
pub const DEFAULT_MAX_TOKENS: u32 = 4096;
pub const REQUEST_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerationRequest {
    pub bundle: PromptBundle,
    pub temperature: f64,
    pub max_tokens: u32,
    pub attempt_tag: String,
}

impl GenerationRequest {
    /// Request with the default temperature for the prompt kind.
    pub fn new(bundle: PromptBundle, attempt_tag: impl Into<String>) -> Self {
        let temperature = match bundle.kind {
            PromptKind::Init(_) | PromptKind::Operator(_) | PromptKind::VectorGeneration => OPERATOR_TEMPERATURE,
            PromptKind::Repair | PromptKind::SpecExtraction => FIDELITY_TEMPERATURE,
        };
        Self {
            bundle,
            temperature,
            max_tokens: DEFAULT_MAX_TOKENS,
            attempt_tag: attempt_tag.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::InvalidRequest(format!("temperature {} outside [0,2]", self.temperature)));
        }
        if self.max_tokens < 256 {
            return Err(ProviderError::InvalidRequest(format!("max_tokens {} < 256", self.max_tokens)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerationResponse {
    pub text: String,
    pub usage: Option<Usage>,
    pub latency_ms: u64,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("no fixture left for '{0}'")]
    FixtureExhausted(String),
    #[error("call budget of {0} exhausted")]
    BudgetExhausted(u64),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("fixture setup: {0}")]
    Fixture(String),
}

impl ProviderError {
    /// Errors after which no further calls can succeed.
    pub fn is_exhaustion(&self) -> bool {
        matches!(self, ProviderError::FixtureExhausted(_) | ProviderError::BudgetExhausted(_))
    }
}

pub trait Provider: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError>;
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct Fixture {
    /// Exact attempt tag, a prefix ending in `*`, or none for the plain sequence.
    #[serde(default)]
    pub tag: Option<String>,
    #[serde(skip)]
    pub text: String,
    /// Reusable fixtures are never consumed.
    #[serde(default)]
    pub repeat: bool,
}

impl Fixture {
    pub fn untagged(text: impl Into<String>) -> Self {
        Self { tag: None, text: text.into(), repeat: false }
    }

    pub fn tagged(tag: impl Into<String>, text: impl Into<String>) -> Self {
        Self { tag: Some(tag.into()), text: text.into(), repeat: false }
    }

    fn exact(&self, tag: &str) -> bool {
        self.tag.as_deref() == Some(tag)
    }

    fn prefix(&self, tag: &str) -> bool {
        matches!(self.tag.as_deref(), Some(t) if t.ends_with('*') && tag.starts_with(&t[..t.len() - 1]))
    }
}

#[derive(Deserialize)]
struct ManifestEntry {
    #[serde(flatten)]
    fixture: Fixture,
    file: PathBuf,
}

/// Replays canned responses. Tagged fixtures answer matching requests; the rest are served in order.
#[derive(Debug)]
pub struct ScriptedProvider {
    fixtures: Vec<Fixture>,
    used: Mutex<HashSet<usize>>,
}

impl ScriptedProvider {
    pub fn new(fixtures: Vec<Fixture>) -> Self {
        Self { fixtures, used: Mutex::new(HashSet::new()) }
    }

    /// `manifest.json` (array of `{tag, file, repeat}`) if present, otherwise every file by name order.
    pub fn from_dir(dir: &Path) -> Result<Self, ProviderError> {
        let io = |p: &Path, e: std::io::Error| ProviderError::Fixture(format!("{}: {e}", p.display()));
        let manifest = dir.join("manifest.json");
        let mut fixtures = Vec::new();
        if manifest.is_file() {
            let raw = std::fs::read_to_string(&manifest).map_err(|e| io(&manifest, e))?;
            let entries: Vec<ManifestEntry> =
                serde_json::from_str(&raw).map_err(|e| ProviderError::Fixture(format!("manifest.json: {e}")))?;
            for e in entries {
                let p = dir.join(&e.file);
                let mut f = e.fixture;
                f.text = std::fs::read_to_string(&p).map_err(|err| io(&p, err))?;
                fixtures.push(f);
            }
        } else {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| io(dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            paths.sort();
            for p in paths {
                fixtures.push(Fixture::untagged(std::fs::read_to_string(&p).map_err(|e| io(&p, e))?));
            }
        }
        Ok(Self::new(fixtures))
    }

    pub fn remaining(&self) -> usize {
        let used = self.used.lock().unwrap();
        (0..self.fixtures.len()).filter(|i| !used.contains(i)).count()
    }
}

impl Provider for ScriptedProvider {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        req.validate()?;
        let mut used = self.used.lock().unwrap();
        let free = |i: &usize| !used.contains(i);
        let tag = req.attempt_tag.as_str();
        let pick = (0..self.fixtures.len())
            .filter(free)
            .find(|&i| self.fixtures[i].exact(tag))
            .or_else(|| (0..self.fixtures.len()).filter(free).find(|&i| self.fixtures[i].prefix(tag)))
            .or_else(|| (0..self.fixtures.len()).filter(free).find(|&i| self.fixtures[i].tag.is_none()))
            .ok_or_else(|| ProviderError::FixtureExhausted(tag.to_string()))?;
        let f = &self.fixtures[pick];
        if !f.repeat {
            used.insert(pick);
        }
        Ok(GenerationResponse { text: f.text.clone(), usage: None, latency_ms: 0 })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RemoteSettings {
    pub base_url: String,
    pub model: String,
    pub api_key: String,
    pub timeout: Duration,
    pub retries: u32,
    pub backoff: Duration,
}

/// OpenAI-style `/chat/completions` client.
pub struct RemoteProvider {
    settings: RemoteSettings,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(settings: RemoteSettings) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { settings, agent }
    }

    /// Reads the credential from `key_env` now.
    pub fn from_env(base_url: &str, model: &str, key_env: &str) -> Result<Self, ProviderError> {
        let api_key = std::env::var(key_env).map_err(|_| ProviderError::Auth(format!("environment variable {key_env} is not set")))?;
        Ok(Self::new(RemoteSettings {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            timeout: REQUEST_TIMEOUT,
            retries: 3,
            backoff: Duration::from_secs(1),
        }))
    }

    fn once(&self, req: &GenerationRequest) -> Result<GenerationResponse, Attempt> {
        let body = json!({
            "model": self.settings.model,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "messages": [
                {"role": "system", "content": req.bundle.system_text},
                {"role": "user", "content": req.bundle.user_text},
            ],
        });
        let url = format!("{}/chat/completions", self.settings.base_url);
        let start = Instant::now();
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", format!("Bearer {}", self.settings.api_key))
            .send_json(&body)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap_or_default();
        match status {
            200..=299 => {}
            401 | 403 => return Err(Attempt::Fatal(ProviderError::Auth(format!("HTTP {status}")))),
            408 | 429 | 500..=599 => return Err(Attempt::Retry(format!("HTTP {status}: {text}"))),
            _ => return Err(Attempt::Fatal(ProviderError::Transport(format!("HTTP {status}: {text}")))),
        }
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Attempt::Retry(format!("bad JSON: {e}")))?;
        let content = v["choices"][0]["message"]["content"].as_str().unwrap_or_default().to_string();
        if content.is_empty() {
            return Err(Attempt::Retry("empty completion".into()));
        }
        let usage = v.get("usage").and_then(|u| {
            Some(Usage {
                prompt_tokens: u["prompt_tokens"].as_u64()?,
                completion_tokens: u["completion_tokens"].as_u64()?,
            })
        });
        Ok(GenerationResponse { text: content, usage, latency_ms: start.elapsed().as_millis() as u64 })
    }
}

enum Attempt {
    Retry(String),
    Fatal(ProviderError),
}

impl Provider for RemoteProvider {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        req.validate()?;
        let mut delay = self.settings.backoff;
        let mut last = String::new();
        for attempt in 0..=self.settings.retries {
            if attempt > 0 {
                log::warn!("{}: retry {attempt} after {last}", req.attempt_tag);
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.once(req) {
                Ok(r) => return Ok(r),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(ProviderError::Transport(format!("{} attempts failed; last: {last}", self.settings.retries + 1)))
    }
}

/// Caps calls to an inner provider. Calls whose tag starts with an exempt prefix are not counted.
pub struct Budgeted<P> {
    inner: P,
    limit: Option<u64>,
    exempt_prefix: String,
    counted: AtomicU64,
    total: AtomicU64,
}

impl<P: Provider> Budgeted<P> {
    pub fn new(inner: P, limit: Option<u64>, exempt_prefix: impl Into<String>) -> Self {
        Self {
            inner,
            limit,
            exempt_prefix: exempt_prefix.into(),
            counted: AtomicU64::new(0),
            total: AtomicU64::new(0),
        }
    }

    pub fn counted_calls(&self) -> u64 {
        self.counted.load(Ordering::SeqCst)
    }

    pub fn total_calls(&self) -> u64 {
        self.total.load(Ordering::SeqCst)
    }
}

impl<P: Provider> Provider for Budgeted<P> {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        let exempt = !self.exempt_prefix.is_empty() && req.attempt_tag.starts_with(&self.exempt_prefix);
        if !exempt {
            let prev = self
                .counted
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |c| match self.limit {
                    Some(l) if c >= l => None,
                    _ => Some(c + 1),
                });
            if prev.is_err() {
                return Err(ProviderError::BudgetExhausted(self.limit.unwrap_or(0)));
            }
        }
        self.total.fetch_add(1, Ordering::SeqCst);
        self.inner.generate(req)
    }
}

/// Applies configured temperatures and token limits by prompt kind.
pub struct Tempered<P> {
    pub inner: P,
    pub operator_temperature: f64,
    pub fidelity_temperature: f64,
    pub max_tokens: u32,
}

impl<P: Provider> Provider for Tempered<P> {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        let mut r = req.clone();
        r.temperature = match r.bundle.kind {
            PromptKind::Repair | PromptKind::SpecExtraction => self.fidelity_temperature,
            _ => self.operator_temperature,
        };
        r.max_tokens = self.max_tokens;
        self.inner.generate(&r)
    }
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        (**self).generate(req)
    }
}

impl<P: Provider + ?Sized> Provider for &P {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        (**self).generate(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(tag: &str) -> GenerationRequest {
        GenerationRequest::new(
            PromptBundle {
                system_text: "s".into(),
                user_text: "u".into(),
                kind: PromptKind::Repair,
                context_refs: vec![],
            },
            tag,
        )
    }

    #[test]
    fn sequence_then_exhausted() {
        let p = ScriptedProvider::new(vec![Fixture::untagged("f1"), Fixture::untagged("f2")]);
        assert_eq!(p.generate(&req("a")).unwrap().text, "f1");
        assert_eq!(p.generate(&req("b")).unwrap().text, "f2");
        assert_eq!(p.generate(&req("c")), Err(ProviderError::FixtureExhausted("c".into())));
    }

    #[test]
    fn tags_take_priority() {
        let p = ScriptedProvider::new(vec![
            Fixture::untagged("plain"),
            Fixture { tag: Some("gen1/*".into()), text: "wild".into(), repeat: true },
            Fixture::tagged("gen1/off0/improve", "exact"),
        ]);
        assert_eq!(p.generate(&req("gen1/off0/improve")).unwrap().text, "exact");
        assert_eq!(p.generate(&req("gen1/off1/fusion")).unwrap().text, "wild");
        assert_eq!(p.generate(&req("gen1/off2/fusion")).unwrap().text, "wild");
        assert_eq!(p.generate(&req("seed/0")).unwrap().text, "plain");
        assert!(p.generate(&req("seed/1")).is_err());
    }

    #[test]
    fn directory_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("02.txt"), "two").unwrap();
        std::fs::write(dir.path().join("01.txt"), "one").unwrap();
        let p = ScriptedProvider::from_dir(dir.path()).unwrap();
        assert_eq!(p.generate(&req("x")).unwrap().text, "one");
        std::fs::write(dir.path().join("manifest.json"), r#"[{"tag":"t","file":"02.txt"}]"#).unwrap();
        let p = ScriptedProvider::from_dir(dir.path()).unwrap();
        assert_eq!(p.remaining(), 1);
        assert_eq!(p.generate(&req("t")).unwrap().text, "two");
    }

    #[test]
    fn budget() {
        let inner = ScriptedProvider::new(vec![Fixture { tag: None, text: "x".into(), repeat: true }]);
        let p = Budgeted::new(inner, Some(1), "testbench/");
        p.generate(&req("testbench/spec")).unwrap();
        p.generate(&req("seed/0")).unwrap();
        assert_eq!(p.generate(&req("seed/1")), Err(ProviderError::BudgetExhausted(1)));
        assert_eq!((p.counted_calls(), p.total_calls()), (1, 2));
    }

    #[test]
    fn unreachable_endpoint_retries() {
        let p = RemoteProvider::new(RemoteSettings {
            base_url: "http://127.0.0.1:9".into(),
            model: "m".into(),
            api_key: "k".into(),
            timeout: Duration::from_secs(2),
            retries: 3,
            backoff: Duration::from_millis(1),
        });
        match p.generate(&req("x")) {
            Err(ProviderError::Transport(m)) => assert!(m.starts_with("4 attempts")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn request_validation() {
        let mut r = req("x");
        assert_eq!(r.temperature, FIDELITY_TEMPERATURE);
        r.max_tokens = 10;
        assert!(r.validate().is_err());
    }
}
