use std::fs;
use std::path::{Path, PathBuf};

use hashbridge_core::UserContext;
use serde::Deserialize;

/// Environment variables that override file settings.
pub const ENV_BIND: &str = "HASHBRIDGE_BIND";
pub const ENV_PORT: &str = "HASHBRIDGE_PORT";
pub const ENV_SNAPSHOT: &str = "HASHBRIDGE_SNAPSHOT";
pub const ENV_USER_CONTEXT: &str = "HASHBRIDGE_USER_CONTEXT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{var}: {message}")]
    Env { var: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub snapshot: Option<PathBuf>,
    pub user_context: UserContext,
    /// `n` when a request omits it.
    pub default_top_n: usize,
    /// Timestamps per search panel (most recent first).
    pub timestamp_sample: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            snapshot: None,
            user_context: UserContext::GlobalMean,
            default_top_n: 10,
            timestamp_sample: 5,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Applies `HASHBRIDGE_*` overrides from `lookup` (normally `std::env::var`).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = lookup(ENV_BIND) {
            self.bind = v;
        }
        if let Some(v) = lookup(ENV_PORT) {
            self.port = v.parse().map_err(|_| ConfigError::Env {
                var: ENV_PORT,
                message: format!("not a port number: {v:?}"),
            })?;
        }
        if let Some(v) = lookup(ENV_SNAPSHOT) {
            self.snapshot = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup(ENV_USER_CONTEXT) {
            self.user_context = match v.as_str() {
                "global_mean" => UserContext::GlobalMean,
                "hashtag_users" => UserContext::HashtagUsers,
                _ => {
                    return Err(ConfigError::Env {
                        var: ENV_USER_CONTEXT,
                        message: format!("expected global_mean or hashtag_users, got {v:?}"),
                    })
                }
            };
        }
        Ok(())
    }

    pub fn from_env(&mut self) -> Result<(), ConfigError> {
        self.apply_env(|k| std::env::var(k).ok())
    }
}
