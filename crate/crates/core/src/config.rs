//! Application configuration: detector backend selection, endpoint
//! settings, hierarchy knobs, and the atomizer rule source. One JSON
//! document with all fields optional (defaults apply).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::atomizer::AtomizerRules;
use crate::conflict::{BackendKind, DetectorSpec};
use crate::context::HierarchyConfig;
use crate::error::{Error, Result};
use crate::nli::EndpointConfig;

/// Top-level configuration document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub detector: DetectorSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<EndpointConfig>,
    pub hierarchy: HierarchyConfig,
    /// Path to a marker-table JSON file; the built-in table when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atomizer_rules: Option<PathBuf>,
}

impl AppConfig {
    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        if self.detector.backend == BackendKind::External {
            match &self.endpoint {
                None => {
                    return Err(Error::Config(
                        "external detector requires an endpoint section".into(),
                    ));
                }
                Some(endpoint) => endpoint.validate()?,
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: AppConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Compiles the configured marker table (or the built-in one).
    pub fn load_atomizer_rules(&self) -> Result<AtomizerRules> {
        match &self.atomizer_rules {
            None => Ok(AtomizerRules::builtin().clone()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("reading marker table {}: {e}", path.display()))
                })?;
                AtomizerRules::from_json(&text)
            }
        }
    }
}
