//! Service configuration, loaded from a TOML file.
//!
//! ```toml
//! bind = "127.0.0.1"
//! port = 8080
//! db = "edubot.sqlite3"          # or ":memory:"
//! threshold = 0.3
//! fallback = "I do not understand yet."
//! seed = 7                       # optional; sample replies instead of ranking
//! read_only = false
//! allowed_origins = ["https://course.example.edu"]   # "*" allows any
//! max_input_chars = 1000
//! session_idle_minutes = 60
//! ```
//!
//! Every key is optional.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use edubot_core::engine::{DEFAULT_FALLBACK, DEFAULT_THRESHOLD};
use edubot_core::{EngineConfig, StoreLocation};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub db: String,
    pub threshold: f64,
    pub fallback: String,
    pub seed: Option<u64>,
    pub read_only: bool,
    pub allowed_origins: Vec<String>,
    pub max_input_chars: usize,
    pub session_idle_minutes: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            db: "edubot.sqlite3".to_owned(),
            threshold: DEFAULT_THRESHOLD,
            fallback: DEFAULT_FALLBACK.to_owned(),
            seed: None,
            read_only: false,
            allowed_origins: Vec::new(),
            max_input_chars: 1000,
            session_idle_minutes: 60,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let config: Self = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.port == 0 {
            return Err(ConfigError::Invalid("port must be in 1..=65535".into()));
        }
        if self.max_input_chars == 0 {
            return Err(ConfigError::Invalid("max_input_chars must be at least 1".into()));
        }
        if self.session_idle_minutes == 0 {
            return Err(ConfigError::Invalid("session_idle_minutes must be at least 1".into()));
        }
        self.engine()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            similarity_threshold: self.threshold,
            fallback_response: self.fallback.clone(),
            read_only: self.read_only,
            random_seed: self.seed,
        }
    }

    pub fn store_location(&self) -> StoreLocation {
        StoreLocation::parse(&self.db)
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }

    pub fn session_idle(&self) -> Duration {
        Duration::from_secs(self.session_idle_minutes.saturating_mul(60))
    }
}
