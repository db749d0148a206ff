use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::llm::EndpointConfig;
use crate::refine::Mode;

pub const DEFAULT_PROACTIVE_THROTTLE: f64 = 10.0;
pub const DEFAULT_CONVEYOR_CAPACITY: usize = 10;
pub const DEFAULT_SEED: u64 = 2024;

/// `fallback` or `llm:<endpoint name>`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BackendChoice {
    #[default]
    Fallback,
    Llm(String),
}

impl TryFrom<String> for BackendChoice {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        match s.trim() {
            "fallback" => Ok(BackendChoice::Fallback),
            other => match other.strip_prefix("llm:") {
                Some(name) if !name.trim().is_empty() => Ok(BackendChoice::Llm(name.trim().to_string())),
                _ => Err(format!("backend must be `fallback` or `llm:<endpoint>`, got `{other}`")),
            },
        }
    }
}

impl From<BackendChoice> for String {
    fn from(b: BackendChoice) -> String {
        b.to_string()
    }
}

impl fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendChoice::Fallback => f.write_str("fallback"),
            BackendChoice::Llm(name) => write!(f, "llm:{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub refine: BackendChoice,
    pub attributes: BackendChoice,
    pub stations: BackendChoice,
    pub transform: BackendChoice,
    pub chart_type: BackendChoice,
    pub summary: BackendChoice,
}

impl BackendConfig {
    fn choices(&self) -> [(&'static str, &BackendChoice); 6] {
        [
            ("refine", &self.refine),
            ("attributes", &self.attributes),
            ("stations", &self.stations),
            ("transform", &self.transform),
            ("chart_type", &self.chart_type),
            ("summary", &self.summary),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub mode: Mode,
    #[serde(default)]
    pub persona_name: Option<String>,
    #[serde(default = "default_pause")]
    pub pause_threshold: f64,
    #[serde(default = "default_throttle")]
    pub proactive_throttle: f64,
    #[serde(default = "default_capacity")]
    pub conveyor_capacity: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub dataset: PathBuf,
    /// Trained classifier; when absent the session trains one on the
    /// synthetic corpus with `seed`.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub backends: BackendConfig,
    #[serde(default)]
    pub endpoints: BTreeMap<String, EndpointConfig>,
}

fn default_pause() -> f64 {
    crate::segment::DEFAULT_PAUSE_THRESHOLD
}

fn default_throttle() -> f64 {
    DEFAULT_PROACTIVE_THROTTLE
}

fn default_capacity() -> usize {
    DEFAULT_CONVEYOR_CAPACITY
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl SessionConfig {
    /// Fallback-only configuration for `dataset`.
    pub fn new(mode: Mode, dataset: impl Into<PathBuf>) -> Self {
        SessionConfig {
            mode,
            persona_name: None,
            pause_threshold: default_pause(),
            proactive_throttle: default_throttle(),
            conveyor_capacity: default_capacity(),
            seed: default_seed(),
            dataset: dataset.into(),
            checkpoint: None,
            backends: BackendConfig::default(),
            endpoints: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, SessionError> {
        let cfg: SessionConfig = toml::from_str(text).map_err(|e| SessionError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SessionError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SessionError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.dataset = base.join(&cfg.dataset);
        cfg.checkpoint = cfg.checkpoint.map(|c| base.join(c));
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: String| Err(SessionError::Config(m));
        if !(self.pause_threshold.is_finite() && self.pause_threshold > 0.0) {
            return bad(format!("pause_threshold must be positive, got {}", self.pause_threshold));
        }
        if !(self.proactive_throttle.is_finite() && self.proactive_throttle >= 0.0) {
            return bad(format!(
                "proactive_throttle must be non-negative, got {}",
                self.proactive_throttle
            ));
        }
        if self.conveyor_capacity == 0 {
            return bad("conveyor_capacity must be at least 1".into());
        }
        for (stage, choice) in self.backends.choices() {
            if let BackendChoice::Llm(name) = choice {
                if !self.endpoints.contains_key(name) {
                    return bad(format!("backend `{stage}` names unknown endpoint `{name}`"));
                }
            }
        }
        Ok(())
    }

    pub fn persona(&self) -> &str {
        self.persona_name
            .as_deref()
            .unwrap_or_else(|| self.mode.default_persona())
    }
}
