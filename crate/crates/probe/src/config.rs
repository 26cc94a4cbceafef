use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{ProbeError, Result};

pub const DEFAULT_API_KEY_ENV: &str = "OCCAM_API_KEY";

/// A credential that prints as `***` and is never serialized.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("***")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the key.
    pub api_key_env: String,
    #[serde(skip)]
    pub api_key: Secret,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First retry delay; doubles on every further attempt.
    pub backoff_ms: u64,
    pub temperature: f64,
    pub max_in_flight: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            api_key: Secret::default(),
            timeout_secs: 60.0,
            max_retries: 5,
            backoff_ms: 500,
            temperature: 0.0,
            max_in_flight: 4,
        }
    }
}

impl ProbeConfig {
    /// Fills `api_key` from the variable named by `api_key_env`.
    pub fn load_key_from_env(&mut self) -> Result<()> {
        match std::env::var(&self.api_key_env) {
            Ok(v) if !v.is_empty() => {
                self.api_key = Secret::new(v);
                Ok(())
            }
            _ => Err(ProbeError::Config(format!(
                "environment variable {} is not set",
                self.api_key_env
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.endpoint_url.is_empty() {
            return Err(ProbeError::Config("endpoint_url is empty".into()));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(ProbeError::Config("timeout_secs must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(ProbeError::Config("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_never_leaks() {
        let cfg = ProbeConfig {
            api_key: Secret::new("sk-very-secret"),
            ..ProbeConfig::default()
        };
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(!json.contains("sk-very-secret"));
        assert!(!format!("{cfg:?}").contains("sk-very-secret"));
        let back: ProbeConfig = serde_json::from_str(&json).unwrap();
        assert!(back.api_key.is_empty());
    }

    #[test]
    fn missing_env_key_is_a_config_error() {
        let mut cfg = ProbeConfig {
            api_key_env: "OCCAM_TEST_KEY_THAT_IS_NOT_SET".into(),
            ..ProbeConfig::default()
        };
        assert!(matches!(cfg.load_key_from_env(), Err(ProbeError::Config(_))));
    }
}
