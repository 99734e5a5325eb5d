//! Settings shared by the CLI and the HTTP service. Read from an optional
//! TOML file, then overridden by `HEALTHDIAL_*` environment variables.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::orchestration::{
    CompletionRequest, Completion, HttpProvider, HttpProviderConfig, LlmProvider,
    OrchestratorConfig, ProviderError, ScriptedProvider,
};

pub const ENV_CONFIG: &str = "HEALTHDIAL_CONFIG";
pub const ENV_LISTEN: &str = "HEALTHDIAL_LISTEN";
pub const ENV_STORE: &str = "HEALTHDIAL_STORE";
pub const ENV_FIXTURES: &str = "HEALTHDIAL_FIXTURES";
pub const ENV_PROVIDER_ENDPOINT: &str = "HEALTHDIAL_PROVIDER_ENDPOINT";
pub const ENV_PROVIDER_KEY: &str = "HEALTHDIAL_PROVIDER_KEY";
pub const ENV_PROVIDER_MODEL: &str = "HEALTHDIAL_PROVIDER_MODEL";
pub const ENV_MAX_REPAIR_ATTEMPTS: &str = "HEALTHDIAL_MAX_REPAIR_ATTEMPTS";
pub const ENV_TOKEN: &str = "HEALTHDIAL_TOKEN";
pub const ENV_FREE_ORDER: &str = "HEALTHDIAL_FREE_ORDER";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config file {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{var}={value:?} is not valid: {reason}")]
    BadEnv {
        var: &'static str,
        value: String,
        reason: String,
    },
    #[error("cannot load provider fixtures from {path}: {source}")]
    Fixtures {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSettings {
    /// Directory of scripted replies; takes precedence over `endpoint`.
    pub fixtures: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout_secs: u64,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        Self {
            fixtures: None,
            endpoint: None,
            api_key: None,
            model: "gpt-4o".into(),
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    pub store: PathBuf,
    pub max_repair_attempts: u32,
    pub coverage_threshold: f64,
    /// Let patients play sessions in any order.
    pub free_order: bool,
    /// Bearer token required by the service when set.
    pub token: Option<String>,
    pub material_cap: usize,
    pub provider: ProviderSettings,
}

impl Default for Config {
    fn default() -> Self {
        let orch = OrchestratorConfig::default();
        Self {
            listen: "127.0.0.1:8080".into(),
            store: PathBuf::from("healthdial-store"),
            max_repair_attempts: orch.max_repair_attempts,
            coverage_threshold: orch.coverage_threshold,
            free_order: false,
            token: None,
            material_cap: crate::model::DEFAULT_MATERIAL_CAP,
            provider: ProviderSettings::default(),
        }
    }
}

impl Config {
    pub fn from_toml(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// File named by `file` (or `HEALTHDIAL_CONFIG`), then the environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load_with(file, |k| std::env::var(k).ok())
    }

    pub fn load_with(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        let from_env = env(ENV_CONFIG).map(PathBuf::from);
        let mut config = match file.map(Path::to_path_buf).or(from_env) {
            Some(path) => Self::from_toml(&path)?,
            None => Self::default(),
        };
        config.apply_env(env)?;
        Ok(config)
    }

    fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = env(ENV_LISTEN) {
            self.listen = v;
        }
        if let Some(v) = env(ENV_STORE) {
            self.store = v.into();
        }
        if let Some(v) = env(ENV_FIXTURES) {
            self.provider.fixtures = Some(v.into());
        }
        if let Some(v) = env(ENV_PROVIDER_ENDPOINT) {
            self.provider.endpoint = Some(v);
        }
        if let Some(v) = env(ENV_PROVIDER_KEY) {
            self.provider.api_key = Some(v);
        }
        if let Some(v) = env(ENV_PROVIDER_MODEL) {
            self.provider.model = v;
        }
        if let Some(v) = env(ENV_TOKEN) {
            self.token = Some(v).filter(|t| !t.is_empty());
        }
        if let Some(v) = env(ENV_MAX_REPAIR_ATTEMPTS) {
            self.max_repair_attempts = match v.trim().parse::<u32>() {
                Ok(n) if n >= 1 => n,
                _ => {
                    return Err(ConfigError::BadEnv {
                        var: ENV_MAX_REPAIR_ATTEMPTS,
                        value: v,
                        reason: "expected a positive integer".into(),
                    })
                }
            };
        }
        if let Some(v) = env(ENV_FREE_ORDER) {
            self.free_order = match v.trim() {
                "1" | "true" | "yes" => true,
                "0" | "false" | "no" | "" => false,
                _ => {
                    return Err(ConfigError::BadEnv {
                        var: ENV_FREE_ORDER,
                        value: v,
                        reason: "expected true or false".into(),
                    })
                }
            };
        }
        Ok(())
    }

    pub fn orchestrator(&self) -> OrchestratorConfig {
        OrchestratorConfig {
            max_repair_attempts: self.max_repair_attempts,
            coverage_threshold: self.coverage_threshold,
            ..OrchestratorConfig::default()
        }
    }

    pub fn material_limits(&self) -> crate::model::MaterialLimits {
        crate::model::MaterialLimits {
            max_chars: self.material_cap,
        }
    }

    /// Scripted fixtures if configured, else the HTTP endpoint, else a
    /// provider that always reports being unreachable.
    pub fn build_provider(&self) -> Result<Arc<dyn LlmProvider>, ConfigError> {
        let p = &self.provider;
        if let Some(dir) = &p.fixtures {
            let scripted = ScriptedProvider::from_dir(dir).map_err(|source| {
                ConfigError::Fixtures {
                    path: dir.clone(),
                    source,
                }
            })?;
            return Ok(Arc::new(scripted));
        }
        if let Some(endpoint) = &p.endpoint {
            return Ok(Arc::new(HttpProvider::new(HttpProviderConfig {
                endpoint: endpoint.clone(),
                api_key: p.api_key.clone(),
                model: p.model.clone(),
                timeout: Duration::from_secs(p.timeout_secs),
            })));
        }
        Ok(Arc::new(NoProvider))
    }
}

/// Stands in when no model is configured.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoProvider;

impl LlmProvider for NoProvider {
    fn complete(&self, _request: &CompletionRequest) -> Result<Completion, ProviderError> {
        Err(ProviderError::Unreachable(format!(
            "no language model configured; set {ENV_FIXTURES} or {ENV_PROVIDER_ENDPOINT}"
        )))
    }
}
