//! JSON configuration files.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::segmentation::StratifyConfig;

/// Environment variable consulted when no config path is given.
pub const CONFIG_ENV: &str = "STRATOS_CONFIG";

/// Parses and validates a config document. Missing fields take defaults;
/// unknown fields are rejected.
pub fn parse_config(text: &str) -> Result<StratifyConfig> {
    let config: StratifyConfig =
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<StratifyConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_config(&text)
}

/// The explicit path if given, else the path in [`CONFIG_ENV`] if set.
pub fn resolve_config_path(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit.map(Path::to_path_buf).or_else(|| {
        std::env::var_os(CONFIG_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    })
}

/// Loads the resolved config, or the defaults when there is none.
pub fn load_config_or_default(explicit: Option<&Path>) -> Result<StratifyConfig> {
    match resolve_config_path(explicit) {
        Some(path) => load_config(path),
        None => Ok(StratifyConfig::default()),
    }
}

pub fn to_json_pretty(config: &StratifyConfig) -> String {
    let mut text = serde_json::to_string_pretty(config).expect("config serializes");
    text.push('\n');
    text
}
