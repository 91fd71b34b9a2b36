//! JSON config files merged under command-line flags.
//!
//! A config file is a JSON object. `seed` and `threads` may sit at the top
//! level; command options live either at the top level or in a section named
//! after the subcommand (e.g. `"eval": {...}`). Keys are the snake_case
//! forms of the long flags. Flags given on the command line win.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const GLOBAL_KEYS: [&str; 2] = ["seed", "threads"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    root: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text).map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        match serde_json::from_str(text) {
            Ok(Value::Object(root)) => Ok(Self { root }),
            Ok(_) => Err(CliError::validation("config must be a JSON object")),
            Err(e) => Err(CliError::validation(format!("invalid JSON: {e}"))),
        }
    }

    pub fn global_u64(&self, key: &str) -> CliResult<Option<u64>> {
        match self.root.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| CliError::validation(format!("config field `{key}` must be a non-negative integer"))),
        }
    }

    /// Options for one subcommand.
    pub fn section(&self, command: &str) -> Map<String, Value> {
        if let Some(Value::Object(section)) = self.root.get(command) {
            return section.clone();
        }
        self.root
            .iter()
            .filter(|(k, v)| !GLOBAL_KEYS.contains(&k.as_str()) && !v.is_object())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

/// Overlay non-empty flag values onto the config section and deserialize.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&ConfigFile>, command: &str) -> CliResult<T> {
    let mut merged = config.map(|c| c.section(command)).unwrap_or_default();
    if let Value::Object(given) = serde_json::to_value(flags).expect("options serialize") {
        for (k, v) in given {
            let empty = v.is_null() || v.as_array().is_some_and(Vec::is_empty);
            if !empty {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::validation(format!("{command} config: {e}")))
}

/// Unwrap a required option or name the missing field.
pub fn require<T>(value: Option<T>, field: &str) -> CliResult<T> {
    value.ok_or_else(|| {
        CliError::validation(format!(
            "missing required field `{field}` (flag --{} or config key \"{field}\")",
            field.replace('_', "-")
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    struct Opts {
        hr_dir: Option<String>,
        scale: Option<usize>,
        dirs: Vec<String>,
    }

    #[test]
    fn flags_override_config() {
        let cfg = ConfigFile::parse(r#"{"seed": 3, "hr_dir": "a", "scale": 2, "dirs": ["x"]}"#).unwrap();
        let flags = Opts {
            scale: Some(4),
            ..Default::default()
        };
        let o: Opts = resolve(&flags, Some(&cfg), "degrade").unwrap();
        assert_eq!(o, Opts { hr_dir: Some("a".into()), scale: Some(4), dirs: vec!["x".into()] });
        assert_eq!(cfg.global_u64("seed").unwrap(), Some(3));
    }

    #[test]
    fn sections_and_unknown_fields() {
        let cfg = ConfigFile::parse(r#"{"degrade": {"scale": 8}, "eval": {"bogus": 1}}"#).unwrap();
        let o: Opts = resolve(&Opts::default(), Some(&cfg), "degrade").unwrap();
        assert_eq!(o.scale, Some(8));
        let err = resolve::<Opts>(&Opts::default(), Some(&cfg), "eval").unwrap_err();
        assert!(err.to_string().contains("bogus"));
        assert!(ConfigFile::parse("[1]").is_err());
        let missing = require::<u8>(None, "hr_dir").unwrap_err().to_string();
        assert!(missing.contains("hr_dir") && missing.contains("--hr-dir"));
    }
}
