//! Flat TOML service configuration with `ELMO2EDS_*` environment overrides.
//!
//! ```toml
//! listen_address = "127.0.0.1:8080"
//! mode_default = "placeholder"        # or "signing"
//! issuer_key_path = "keys/issuer.jwk"
//! holder_key_path = "keys/holder.jwk" # or holder_did = "did:ebsi:z..."
//! registry_path = "registry.jsonl"
//! max_body_bytes = 10485760
//! mapping_override_path = "mapping.json"
//! schema_id = "https://example.org/schemas/diploma"
//! log_level = "info"
//! ```

use std::path::{Path, PathBuf};

use elmo2eds_core::elmo::DEFAULT_MAX_INPUT_BYTES;
use elmo2eds_core::transform::ConversionMode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "ELMO2EDS_";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("config: {0}")]
    Parse(String),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen_address: String,
    pub mode_default: ConversionMode,
    pub issuer_key_path: Option<PathBuf>,
    pub holder_key_path: Option<PathBuf>,
    pub holder_did: Option<String>,
    pub registry_path: PathBuf,
    pub max_body_bytes: usize,
    pub mapping_override_path: Option<PathBuf>,
    pub schema_id: Option<String>,
    pub log_level: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen_address: "127.0.0.1:8080".into(),
            mode_default: ConversionMode::Placeholder,
            issuer_key_path: None,
            holder_key_path: None,
            holder_did: None,
            registry_path: PathBuf::from("registry.jsonl"),
            max_body_bytes: DEFAULT_MAX_INPUT_BYTES,
            mapping_override_path: None,
            schema_id: None,
            log_level: "info".into(),
        }
    }
}

const INTEGER_KEYS: [&str; 1] = ["max_body_bytes"];

impl ServiceConfig {
    /// File (if any) overlaid with the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io {
                    path: p.display().to_string(),
                    reason: e.to_string(),
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| ConfigError::Parse(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in env {
            let Some(key) = k.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            let value = if INTEGER_KEYS.contains(&key.as_str()) {
                let n: i64 = v
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError::Invalid(format!("{k}=`{v}` is not an integer")))?;
                toml::Value::Integer(n)
            } else {
                toml::Value::String(v)
            };
            table.insert(key, value);
        }
        let cfg: ServiceConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_body_bytes == 0 {
            return Err(ConfigError::Invalid(
                "max_body_bytes must be positive".into(),
            ));
        }
        if self.mode_default == ConversionMode::Signing {
            if self.issuer_key_path.is_none() {
                return Err(ConfigError::Invalid(
                    "mode_default = signing needs issuer_key_path".into(),
                ));
            }
            if self.holder_key_path.is_none() && self.holder_did.is_none() {
                return Err(ConfigError::Invalid(
                    "mode_default = signing needs holder_key_path or holder_did".into(),
                ));
            }
        }
        if self.holder_key_path.is_some() && self.holder_did.is_some() {
            return Err(ConfigError::Invalid(
                "set holder_key_path or holder_did, not both".into(),
            ));
        }
        Ok(())
    }
}
