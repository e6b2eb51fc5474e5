//! The JSON configuration document shared by the CLI and the service.
//!
//! Every section is optional and partial documents are completed from the
//! defaults. Unknown keys are rejected with their path.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{NetworkContext, Violation};
use crate::cpf::Weights;
use crate::desim::{SimConfig, SimSettings};
use crate::error::join_violations;
use crate::radio::RadioProfile;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigDocument {
    pub context: NetworkContext,
    pub profile: RadioProfile,
    pub simulation: SimSettings,
    pub weights: Weights,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config at {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("invalid config: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Parses one section of the document (`context`, `profile`, ...) on its
/// own; error paths are prefixed with the section name.
pub fn parse_section<T: DeserializeOwned>(doc: &str, section: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(doc);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (section.is_empty(), inner.as_str()) {
            (true, _) => inner,
            (false, ".") => section.to_string(),
            (false, _) => format!("{section}.{inner}"),
        };
        ConfigError::Malformed {
            path,
            message: e.inner().to_string(),
        }
    })
}

impl ConfigDocument {
    /// Parses without validating values.
    pub fn parse(doc: &str) -> Result<ConfigDocument, ConfigError> {
        parse_section(doc, "")
    }

    pub fn from_json(doc: &str) -> Result<ConfigDocument, ConfigError> {
        let cfg = Self::parse(doc)?;
        let v = cfg.validate();
        if v.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    pub fn load(path: &Path) -> Result<ConfigDocument, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = self.context.validate();
        v.extend(self.profile.validate());
        v.extend(self.simulation.validate());
        v.extend(self.weights.validate());
        v
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig::new(self.context.clone(), self.profile.clone(), self.simulation.clone())
    }
}
