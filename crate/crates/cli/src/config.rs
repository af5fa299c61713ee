//! Strict JSON configs, flag merging and config digests.
//!
//! A config file is one JSON object. The keys `command`, `seed`, `threads`,
//! `format` and `out` are shared by every subcommand; all other keys are the
//! subcommand's own parameters, spelled as the long flags with `_` for `-`.
//! Unknown keys are rejected before any computation starts.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::Format;

/// Environment variable consulted when neither `--seed` nor the config file
/// provides a seed.
pub const SEED_ENV: &str = "RWRE_SEED";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FileConfig {
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub params: Map<String, Value>,
}

pub fn load(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config { name, reason } => CliError::config(name, format!("{reason} (in {})", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<FileConfig, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::config("config", e))?;
    let Value::Object(mut map) = value else {
        return Err(CliError::config("config", "must be a JSON object"));
    };
    let mut take = |key: &str| map.remove(key).filter(|v| !v.is_null());
    let command = match take("command") {
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(CliError::config("command", "must be a string")),
        None => None,
    };
    let seed = match take("seed") {
        Some(v) => Some(serde_json::from_value(v).map_err(|e| CliError::config("seed", e))?),
        None => None,
    };
    let threads = match take("threads") {
        Some(v) => Some(serde_json::from_value(v).map_err(|e| CliError::config("threads", e))?),
        None => None,
    };
    let format = match take("format") {
        Some(v) => Some(serde_json::from_value(v).map_err(|e| CliError::config("format", e))?),
        None => None,
    };
    let out = match take("out") {
        Some(v) => Some(serde_json::from_value(v).map_err(|e| CliError::config("out", e))?),
        None => None,
    };
    Ok(FileConfig { command, seed, threads, format, out, params: map })
}

/// Overlay the flags given on the command line onto the file parameters and
/// decode the result strictly.
pub fn merge<P: Serialize + DeserializeOwned + Default>(flags: &P, file: &Map<String, Value>) -> Result<P, CliError> {
    // every parameter serializes (as null when unset), so the default value
    // lists the accepted keys, including flattened groups
    let Value::Object(known) = serde_json::to_value(P::default()).map_err(|e| CliError::config("flags", e))? else {
        unreachable!("parameter sets are structs")
    };
    if let Some(k) = file.keys().find(|k| !known.contains_key(*k)) {
        let mut expected: Vec<&str> = known.keys().map(String::as_str).collect();
        expected.extend(["command", "seed", "threads", "format", "out"]);
        return Err(CliError::config(k.clone(), format!("unknown key; expected one of {}", expected.join(", "))));
    }
    let mut merged = file.clone();
    if let Value::Object(given) = serde_json::to_value(flags).map_err(|e| CliError::config("flags", e))? {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged.clone())).map_err(|e| {
        // serde names unknown keys but not mistyped ones; find the key that
        // fails on its own
        let name = merged
            .iter()
            .find(|(k, v)| serde_json::from_value::<P>(Value::Object(Map::from_iter([((*k).clone(), (*v).clone())]))).is_err())
            .map(|(k, _)| k.clone())
            .unwrap_or_else(|| "config".into());
        CliError::config(name, e)
    })
}

/// The fully resolved run configuration. Worker count and output path are
/// left out: they must not change results.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Resolved {
    pub command: String,
    pub seed: Option<u64>,
    pub format: Format,
    pub params: Value,
}

impl Resolved {
    /// Canonical JSON (sorted keys, no whitespace).
    pub fn canonical(&self) -> String {
        serde_json::to_value(self).expect("serializable").to_string()
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

pub fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config("seed", format!("{SEED_ENV}={s} is not an unsigned integer"))),
        _ => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, Default, Debug, PartialEq)]
    #[serde(deny_unknown_fields, default)]
    struct P {
        law: Option<String>,
        grid: Option<Vec<usize>>,
    }

    #[test]
    fn flags_override_file() {
        let file = parse(r#"{"seed": 3, "law": "gauss", "grid": [1, 2]}"#).unwrap();
        assert_eq!(file.seed, Some(3));
        let flags = P { law: Some("rademacher".into()), grid: None };
        let p: P = merge(&flags, &file.params).unwrap();
        assert_eq!(p, P { law: Some("rademacher".into()), grid: Some(vec![1, 2]) });
    }

    #[test]
    fn unknown_keys_are_named() {
        let file = parse(r#"{"lwa": "gauss"}"#).unwrap();
        match merge(&P::default(), &file.params) {
            Err(CliError::Config { name, .. }) => assert_eq!(name, "lwa"),
            other => panic!("{other:?}"),
        }
        let file = parse(r#"{"law": "gauss", "grid": "x"}"#).unwrap();
        assert!(matches!(merge(&P::default(), &file.params), Err(CliError::Config { name, .. }) if name == "grid"));
        assert!(parse("[1]").is_err());
        assert!(matches!(parse(r#"{"seed": -1}"#), Err(CliError::Config { name, .. }) if name == "seed"));
    }

    #[test]
    fn digest_ignores_key_order() {
        let a = Resolved { command: "x".into(), seed: Some(1), format: Format::Csv, params: serde_json::json!({"a": 1, "b": 2}) };
        let b = Resolved { params: serde_json::from_str(r#"{"b": 2, "a": 1}"#).unwrap(), ..a.clone() };
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
