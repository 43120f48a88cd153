//! JSON config documents with `key.path=value` overrides.

use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::BenchError;
use crate::experiment::ExperimentConfig;

/// Sets `key` (dotted path) in `doc` to `raw`, read as JSON when it
/// parses and as a plain string otherwise.
pub fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<(), BenchError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut parts = key.split('.').peekable();
    let mut node = doc;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(BenchError::Config(format!("bad override key {key:?}")));
        }
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
        let map = node.as_object_mut().expect("just made an object");
        if parts.peek().is_none() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Err(BenchError::Config("empty override key".into()))
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(&str, &str), BenchError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| BenchError::Config(format!("override {s:?} is not key=value")))
}

/// Reads `path` (or starts from defaults when `None`) and applies
/// `key=value` overrides in order.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<ExperimentConfig, BenchError> {
    let mut doc = match path {
        Some(p) => {
            let raw = fs::read_to_string(p).map_err(BenchError::io(p))?;
            serde_json::from_str(&raw).map_err(|source| BenchError::Json {
                path: p.to_path_buf(),
                source,
            })?
        }
        None => Value::Object(Map::new()),
    };
    for o in overrides {
        let (k, v) = parse_assignment(o)?;
        apply_override(&mut doc, k, v)?;
    }
    serde_json::from_value(doc).map_err(|e| BenchError::Config(format!("invalid config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_nest_and_type() {
        let cfg = load_config(
            None,
            &[
                "train.lr=0.01".into(),
                "merge.mode=static".into(),
                "runs=2".into(),
                "name=cora baseline".into(),
                "augment=true".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.train.lr, 0.01);
        assert_eq!(cfg.merge.mode, demograph_core::MergeMode::Static);
        assert_eq!(cfg.runs, 2);
        assert_eq!(cfg.name, "cora baseline");
        assert!(cfg.augment);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let err = load_config(None, &["trian.lr=1".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(load_config(None, &["runs".into()]).is_err());
        assert!(load_config(None, &["a..b=1".into()]).is_err());
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"runs": 3, "train": {"hidden": 32}}"#).unwrap();
        let cfg = load_config(Some(&path), &["train.hidden=8".into()]).unwrap();
        assert_eq!((cfg.runs, cfg.train.hidden), (3, 8));
        assert_eq!(cfg.train.lr, demograph_gnn::TrainConfig::default().lr);
    }
}
