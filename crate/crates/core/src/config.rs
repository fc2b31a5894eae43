// SPDX-License-Identifier: Apache-2.0

//! TOML run configuration with defaults and validation.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::difftest::DifftestLimits;
use crate::operators::Templates;
use crate::provider::{Budgeted, Provider, ProviderError, RemoteProvider, RemoteSettings, ScriptedProvider};
use crate::tooling::{AnnotatedSynth, BuiltinSim, CommandSim, CommandSynth, SimDriver, SynthDriver, ToolCommand, SIM_TIMEOUT, SYNTH_TIMEOUT};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase", tag = "kind")]
pub enum ProviderConfig {
    Scripted {
        fixture_dir: PathBuf,
    },
    Remote {
        base_url: String,
        model: String,
        #[serde(default = "default_key_env")]
        api_key_env: String,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
        #[serde(default = "default_retries")]
        retries: u32,
        #[serde(default = "default_backoff")]
        backoff_secs: f64,
    },
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_timeout() -> f64 {
    120.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DifftestConfig {
    pub max_vectors: usize,
    pub max_cycles: usize,
    pub clock_period: u32,
    pub max_attempts: u32,
}

impl Default for DifftestConfig {
    fn default() -> Self {
        let d = DifftestLimits::default();
        Self {
            max_vectors: d.max_vectors,
            max_cycles: d.max_cycles,
            clock_period: d.clock_period,
            max_attempts: d.max_attempts,
        }
    }
}

impl DifftestConfig {
    pub fn limits(&self) -> DifftestLimits {
        DifftestLimits {
            max_vectors: self.max_vectors,
            max_cycles: self.max_cycles,
            clock_period: self.clock_period,
            max_attempts: self.max_attempts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase", tag = "kind")]
pub enum SimConfig {
    Builtin {
        #[serde(default = "sim_timeout")]
        timeout_secs: f64,
    },
    Command {
        command: String,
        #[serde(default = "sim_timeout")]
        timeout_secs: f64,
    },
}

fn sim_timeout() -> f64 {
    SIM_TIMEOUT.as_secs_f64()
}
fn synth_timeout() -> f64 {
    SYNTH_TIMEOUT.as_secs_f64()
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::Builtin { timeout_secs: sim_timeout() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase", tag = "kind")]
pub enum SynthConfig {
    #[default]
    Annotated,
    Command {
        command: String,
        #[serde(default)]
        liberty: String,
        #[serde(default = "synth_timeout")]
        timeout_secs: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToolsConfig {
    pub sim: SimConfig,
    pub synth: SynthConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplatesConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_n")]
    pub lambda: usize,
    #[serde(default = "d_n")]
    pub g: u32,
    #[serde(default = "d_r")]
    pub r: u32,
    #[serde(default = "d_c")]
    pub ucb_c: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub call_budget: Option<u64>,
    #[serde(default = "d_workers")]
    pub workers: usize,
    #[serde(default = "d_op_temp")]
    pub operator_temperature: f64,
    #[serde(default = "d_fid_temp")]
    pub fidelity_temperature: f64,
    #[serde(default = "d_tokens")]
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provider: Option<ProviderConfig>,
    #[serde(default)]
    pub difftest: DifftestConfig,
    #[serde(default)]
    pub tools: ToolsConfig,
    #[serde(default)]
    pub templates: TemplatesConfig,
}

fn d_n<T: From<u8>>() -> T {
    T::from(10)
}
fn d_r() -> u32 {
    3
}
fn d_c() -> f64 {
    crate::bandit::DEFAULT_EXPLORATION
}
fn d_workers() -> usize {
    1
}
fn d_op_temp() -> f64 {
    crate::provider::OPERATOR_TEMPERATURE
}
fn d_fid_temp() -> f64 {
    crate::provider::FIDELITY_TEMPERATURE
}
fn d_tokens() -> u32 {
    crate::provider::DEFAULT_MAX_TOKENS
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults parse")
    }
}

impl RunConfig {
    /// Every violated invariant, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                v.push(msg.to_string());
            }
        };
        need(self.n >= 1, "n must be >= 1");
        need(self.lambda >= 1, "lambda must be >= 1");
        need(self.g >= 1, "g must be >= 1");
        need(self.ucb_c > 0.0 && self.ucb_c.is_finite(), "ucb_c must be > 0");
        need(self.workers >= 1, "workers must be >= 1");
        need((0.0..=2.0).contains(&self.operator_temperature), "operator_temperature must be in [0, 2]");
        need((0.0..=2.0).contains(&self.fidelity_temperature), "fidelity_temperature must be in [0, 2]");
        need(self.max_tokens >= 256, "max_tokens must be >= 256");
        need(self.provider.is_some(), "[provider] section is required");
        need(self.difftest.max_vectors >= 1, "difftest.max_vectors must be >= 1");
        need(self.difftest.max_cycles >= 1, "difftest.max_cycles must be >= 1");
        need(self.difftest.clock_period >= 2, "difftest.clock_period must be >= 2");
        need(self.difftest.max_attempts >= 1, "difftest.max_attempts must be >= 1");
        let timeouts = [
            match &self.tools.sim {
                SimConfig::Builtin { timeout_secs } | SimConfig::Command { timeout_secs, .. } => *timeout_secs,
            },
            match &self.tools.synth {
                SynthConfig::Annotated => 1.0,
                SynthConfig::Command { timeout_secs, .. } => *timeout_secs,
            },
        ];
        need(timeouts.iter().all(|t| *t > 0.0 && t.is_finite()), "tool timeouts must be > 0");
        if let SimConfig::Command { command, .. } = &self.tools.sim {
            need(!command.trim().is_empty(), "tools.sim.command must not be empty");
        }
        if let SynthConfig::Command { command, .. } = &self.tools.synth {
            need(!command.trim().is_empty(), "tools.synth.command must not be empty");
        }
        v
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Resolve relative paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(ProviderConfig::Scripted { fixture_dir }) = &mut self.provider {
            fix(fixture_dir);
        }
        if let Some(d) = &mut self.templates.dir {
            fix(d);
        }
    }

    pub fn templates(&self) -> std::io::Result<Templates> {
        match &self.templates.dir {
            Some(d) => Templates::with_overrides(d),
            None => Ok(Templates::builtin()),
        }
    }

    /// Construct the configured provider, reading credentials now. The budget wrapper is applied by the engine.
    pub fn build_provider(&self) -> Result<Box<dyn Provider>, ProviderError> {
        match &self.provider {
            Some(ProviderConfig::Scripted { fixture_dir }) => Ok(Box::new(ScriptedProvider::from_dir(fixture_dir)?)),
            Some(ProviderConfig::Remote { base_url, model, api_key_env, timeout_secs, retries, backoff_secs }) => {
                let api_key = std::env::var(api_key_env)
                    .map_err(|_| ProviderError::Auth(format!("environment variable {api_key_env} is not set")))?;
                Ok(Box::new(RemoteProvider::new(RemoteSettings {
                    base_url: base_url.trim_end_matches('/').to_string(),
                    model: model.clone(),
                    api_key,
                    timeout: Duration::from_secs_f64(*timeout_secs),
                    retries: *retries,
                    backoff: Duration::from_secs_f64(*backoff_secs),
                })))
            }
            None => Err(ProviderError::InvalidRequest("no provider configured".into())),
        }
    }

    pub fn build_sim(&self) -> Box<dyn SimDriver> {
        match &self.tools.sim {
            SimConfig::Builtin { timeout_secs } => Box::new(BuiltinSim {
                timeout: Duration::from_secs_f64(*timeout_secs),
                ..Default::default()
            }),
            SimConfig::Command { command, timeout_secs } => Box::new(CommandSim {
                cmd: ToolCommand { template: command.clone(), timeout: Duration::from_secs_f64(*timeout_secs) },
            }),
        }
    }

    pub fn build_synth(&self) -> Box<dyn SynthDriver> {
        match &self.tools.synth {
            SynthConfig::Annotated => Box::new(AnnotatedSynth),
            SynthConfig::Command { command, liberty, timeout_secs } => Box::new(CommandSynth {
                cmd: ToolCommand { template: command.clone(), timeout: Duration::from_secs_f64(*timeout_secs) },
                liberty: liberty.clone(),
            }),
        }
    }
}

/// Parse, default, resolve relative paths and validate.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let mut cfg = RunConfig::from_toml(&text)?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    cfg.validate()?;
    Ok(cfg)
}

/// Convenience for tests and the CLI: wrap a provider with the configured budget.
pub fn with_budget<P: Provider>(p: P, cfg: &RunConfig) -> Budgeted<P> {
    Budgeted::new(p, cfg.call_budget, "testbench/")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_needs_provider() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!((cfg.n, cfg.lambda, cfg.g, cfg.r, cfg.ucb_c), (10, 10, 10, 3, 1.414));
        match cfg.validate() {
            Err(ConfigError::Invalid(v)) => assert_eq!(v, vec!["[provider] section is required".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_violations_listed() {
        let cfg = RunConfig::from_toml("n = 0\ng = 0\n[provider]\nkind = \"scripted\"\nfixture_dir = \"f\"\n").unwrap();
        match cfg.validate() {
            Err(ConfigError::Invalid(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn full_config_roundtrips() {
        let text = r#"
n = 3
lambda = 4
g = 2
r = 1
ucb_c = 2.0
seed = 7
call_budget = 50
workers = 2

[provider]
kind = "remote"
base_url = "https://api.example.com/v1"
model = "small-model"
api_key_env = "MY_KEY"

[difftest]
max_vectors = 8
max_cycles = 4
clock_period = 20
max_attempts = 2

[tools.sim]
kind = "command"
command = "assets/adapters/iverilog_sim.sh {design} {testbench} {workdir}"

[tools.synth]
kind = "command"
command = "assets/adapters/yosys_synth.sh {design} {top} {liberty} {out}"
liberty = "/pdk/nangate45.lib"
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!((cfg.n, cfg.lambda, cfg.g, cfg.r, cfg.seed, cfg.call_budget), (3, 4, 2, 1, 7, Some(50)));
        assert_eq!(cfg.difftest.clock_period, 20);
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        assert!(RunConfig::from_toml("bogus = 1").is_err());
    }
}
