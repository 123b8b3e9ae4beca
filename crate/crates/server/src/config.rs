use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use affectrec::extraction::{Backend, Lexicon, LexiconBackend, LlmBackend, LlmBackendConfig, StopWords};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "AFFECTREC_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Lexicon,
    Llm,
}

fn default_listen() -> String {
    "127.0.0.1".into()
}
fn default_port() -> u16 {
    8080
}
fn default_catalog_path() -> PathBuf {
    PathBuf::from("catalog.jsonl")
}
fn default_ttl() -> u64 {
    30 * 60
}
fn default_sweep() -> u64 {
    60
}
fn default_in_flight() -> usize {
    4
}

/// Service settings, read from TOML with `AFFECTREC_*` environment overrides.
///
/// ```toml
/// listen = "0.0.0.0"
/// port = 8080
/// catalog_path = "catalog.jsonl"
/// lexicon_path = "lexicon.tsv"     # optional, bundled list if absent
/// stopwords_path = "stopwords.txt" # optional, bundled list if absent
/// backend = "lexicon"              # or "llm"
/// session_ttl_secs = 1800
/// sweep_interval_secs = 60
/// max_in_flight = 4
///
/// [llm]
/// endpoint = "https://api.example.com/v1/chat/completions"
/// model = "some-model"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_catalog_path")]
    pub catalog_path: PathBuf,
    #[serde(default)]
    pub lexicon_path: Option<PathBuf>,
    #[serde(default)]
    pub stopwords_path: Option<PathBuf>,
    #[serde(default = "default_backend")]
    pub backend: BackendKind,
    #[serde(default)]
    pub llm: Option<LlmBackendConfig>,
    #[serde(default = "default_ttl")]
    pub session_ttl_secs: u64,
    #[serde(default = "default_sweep")]
    pub sweep_interval_secs: u64,
    /// Cap on concurrent LLM calls; overrides `llm.max_in_flight`.
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_backend() -> BackendKind {
    BackendKind::Lexicon
}

impl Default for ServiceConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads `path`, applies environment overrides, and validates.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_owned(),
                    source,
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        config.check()?;
        Ok(config)
    }

    /// Overrides fields from `AFFECTREC_<FIELD>` variables.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let get = |name: &str| var(&format!("{ENV_PREFIX}{name}"));
        fn num<T: std::str::FromStr>(name: &str, v: String) -> Result<T, ConfigError> {
            v.parse()
                .map_err(|_| ConfigError::Invalid(format!("{ENV_PREFIX}{name}={v:?} is not a number")))
        }
        if let Some(v) = get("LISTEN") {
            self.listen = v;
        }
        if let Some(v) = get("PORT") {
            self.port = num("PORT", v)?;
        }
        if let Some(v) = get("CATALOG_PATH") {
            self.catalog_path = v.into();
        }
        if let Some(v) = get("LEXICON_PATH") {
            self.lexicon_path = Some(v.into());
        }
        if let Some(v) = get("STOPWORDS_PATH") {
            self.stopwords_path = Some(v.into());
        }
        if let Some(v) = get("BACKEND") {
            self.backend = match v.as_str() {
                "lexicon" => BackendKind::Lexicon,
                "llm" => BackendKind::Llm,
                _ => return Err(ConfigError::Invalid(format!("{ENV_PREFIX}BACKEND={v:?}"))),
            };
        }
        if let Some(v) = get("SESSION_TTL_SECS") {
            self.session_ttl_secs = num("SESSION_TTL_SECS", v)?;
        }
        if let Some(v) = get("SWEEP_INTERVAL_SECS") {
            self.sweep_interval_secs = num("SWEEP_INTERVAL_SECS", v)?;
        }
        if let Some(v) = get("MAX_IN_FLIGHT") {
            self.max_in_flight = num("MAX_IN_FLIGHT", v)?;
        }
        let endpoint = get("LLM_ENDPOINT");
        let model = get("LLM_MODEL");
        if endpoint.is_some() || model.is_some() {
            let llm = self
                .llm
                .get_or_insert_with(|| LlmBackendConfig::new(String::new(), String::new()));
            if let Some(e) = endpoint {
                llm.endpoint = e;
            }
            if let Some(m) = model {
                llm.model = m;
            }
        }
        Ok(())
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.port == 0 {
            return invalid("port must be in [1, 65535]".into());
        }
        if self.session_ttl_secs == 0 {
            return invalid("session_ttl_secs must be > 0".into());
        }
        if self.sweep_interval_secs == 0 {
            return invalid("sweep_interval_secs must be > 0".into());
        }
        if self.max_in_flight == 0 {
            return invalid("max_in_flight must be >= 1".into());
        }
        for path in [&self.lexicon_path, &self.stopwords_path].into_iter().flatten() {
            if !path.is_file() {
                return invalid(format!("{} does not exist", path.display()));
            }
        }
        if let Some(parent) = self.catalog_path.parent().filter(|p| !p.as_os_str().is_empty()) {
            if !parent.is_dir() {
                return invalid(format!("catalog directory {} does not exist", parent.display()));
            }
        }
        match (&self.backend, &self.llm) {
            (BackendKind::Llm, None) => invalid("backend = \"llm\" requires an [llm] section".into()),
            (BackendKind::Llm, Some(llm)) => llm.check().map_err(ConfigError::Invalid),
            _ => Ok(()),
        }
    }

    pub fn session_ttl(&self) -> Duration {
        Duration::from_secs(self.session_ttl_secs)
    }

    pub fn sweep_interval(&self) -> Duration {
        Duration::from_secs(self.sweep_interval_secs)
    }

    pub fn load_lexicon_backend(&self) -> Result<LexiconBackend, ConfigError> {
        let lexicon = match &self.lexicon_path {
            Some(p) => {
                let text = read(p)?;
                Lexicon::parse_tsv(&p.display().to_string(), &text)
                    .map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())))?
            }
            None => Lexicon::english(),
        };
        let stopwords = match &self.stopwords_path {
            Some(p) => StopWords::parse(&read(p)?),
            None => StopWords::english(),
        };
        Ok(LexiconBackend::new(lexicon, stopwords))
    }

    pub fn build_backend(&self) -> Result<Backend, ConfigError> {
        match self.backend {
            BackendKind::Lexicon => Ok(Backend::Lexicon(self.load_lexicon_backend()?)),
            BackendKind::Llm => {
                let mut llm = self
                    .llm
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("missing [llm] section".into()))?;
                llm.max_in_flight = self.max_in_flight;
                LlmBackend::http(llm)
                    .map(Backend::Llm)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))
            }
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_owned(),
        source,
    })
}
