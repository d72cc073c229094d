//! Plain-text `key = value` configuration.
//!
//! A config file holds one `key = value` pair per line; `#` starts a
//! comment. Command-line `key=value` arguments override file entries. Each
//! typed section takes the keys matching its field names, and any key left
//! over at the end is rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

fn split_pair(text: &str) -> Option<(String, String)> {
    let (k, v) = text.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    (!k.is_empty()).then(|| (k.to_string(), v.to_string()))
}

impl KeyValues {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_pair(line)
                .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected `key = value`", i + 1)))?;
            entries.insert(k, v);
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn from_args(args: &[String]) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for a in args {
            let (k, v) = split_pair(a).ok_or_else(|| CliError::Usage(format!("expected key=value, got `{a}`")))?;
            entries.insert(k, v);
        }
        Ok(Self { entries })
    }

    /// The file at `path` (if any) overridden by `args`.
    pub fn load(path: Option<&Path>, args: &[String]) -> Result<Self, CliError> {
        let mut kv = match path {
            Some(p) => Self::read(p)?,
            None => Self::default(),
        };
        kv.entries.extend(Self::from_args(args)?.entries);
        Ok(kv)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn take_raw(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.take_raw(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Usage(format!("{key}: {e}"))))
            .transpose()
    }

    /// Fills the fields of `base` named by remaining keys, removing them.
    pub fn take<T: Serialize + DeserializeOwned>(&mut self, base: &T) -> Result<T, CliError> {
        let Value::Object(mut fields) = serde_json::to_value(base).map_err(|e| CliError::Runtime(e.to_string()))? else {
            return Err(CliError::Runtime("config section is not a struct".into()));
        };
        let keys: Vec<String> = fields.keys().cloned().collect();
        for key in keys {
            if let Some(raw) = self.entries.remove(&key) {
                let value = convert(&fields[&key], &raw).map_err(|e| CliError::Usage(format!("{key}: {e}")))?;
                fields.insert(key, value);
            }
        }
        serde_json::from_value(Value::Object(fields)).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
    }

    /// Fails on any key no section claimed.
    pub fn finish(self) -> Result<(), CliError> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let keys: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        Err(CliError::Usage(format!("unknown configuration key(s): {}", keys.join(", "))))
    }
}

fn number(raw: &str) -> Result<Value, String> {
    if let Ok(u) = raw.parse::<u64>() {
        return Ok(Value::Number(u.into()));
    }
    if let Ok(i) = raw.parse::<i64>() {
        return Ok(Value::Number(i.into()));
    }
    let f: f64 = raw.parse().map_err(|_| format!("`{raw}` is not a number"))?;
    Number::from_f64(f).map(Value::Number).ok_or_else(|| format!("`{raw}` is not finite"))
}

/// Parses `raw` as the JSON type of `template`.
fn convert(template: &Value, raw: &str) -> Result<Value, String> {
    match template {
        Value::Bool(_) => raw.parse().map(Value::Bool).map_err(|_| format!("`{raw}` is not true/false")),
        Value::Number(_) => number(raw),
        Value::String(_) | Value::Null => Ok(Value::String(raw.to_string())),
        Value::Array(items) => {
            let item = items.first().cloned().unwrap_or(Value::Number(0.into()));
            raw.split(',')
                .filter(|p| !p.trim().is_empty())
                .map(|p| convert(&item, p.trim()))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Array)
        }
        Value::Object(_) => Err("nested values cannot be set from the command line".into()),
    }
}

fn render_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(render_value).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

/// Flattens sections into `key = value` lines that [`KeyValues::parse`]
/// reads back.
pub fn render(sections: &[Value]) -> String {
    let mut out = String::new();
    for section in sections {
        if let Value::Object(fields) = section {
            for (k, v) in fields {
                let _ = writeln!(out, "{k} = {}", render_value(v));
            }
        }
    }
    out
}

/// A string-valued section for path and run keys.
pub fn section(pairs: &[(&str, String)]) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert(k.to_string(), Value::String(v.clone()));
    }
    Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use simplify_core::model::ModelConfig;
    use simplify_core::training::{TrainingConfig, Variant};

    #[test]
    fn file_then_overrides() {
        let mut kv = KeyValues::parse("# comment\nbatch_size = 4\nhidden=16 # trailing\n", "f").unwrap();
        kv.entries.extend(KeyValues::from_args(&["batch_size=12".into()]).unwrap().entries);
        let t = kv.take(&TrainingConfig::desk()).unwrap();
        assert_eq!(t.batch_size, 12);
        let m = kv.take(&ModelConfig::desk()).unwrap();
        assert_eq!(m.hidden, 16);
        kv.finish().unwrap();
    }

    #[test]
    fn typed_values() {
        let mut kv = KeyValues::from_args(&[
            "variant=UNTS-div".into(),
            "generator_lr=1".into(),
            "cnn_widths=1,3".into(),
            "tie_decoder_embeddings=true".into(),
        ])
        .unwrap();
        let t = kv.take(&TrainingConfig::desk()).unwrap();
        assert_eq!(t.variant, Variant::NoDiversification);
        assert_eq!(t.generator_lr, 1.0);
        let m = kv.take(&ModelConfig::desk()).unwrap();
        assert_eq!(m.cnn_widths, vec![1, 3]);
        assert!(m.tie_decoder_embeddings);
    }

    #[test]
    fn bad_input_is_a_usage_error() {
        assert!(KeyValues::from_args(&["novalue".into()]).is_err());
        assert!(KeyValues::parse("just words\n", "f").is_err());
        let mut kv = KeyValues::from_args(&["variant=UNTS-foo".into()]).unwrap();
        assert!(matches!(kv.take(&TrainingConfig::desk()), Err(CliError::Usage(_))));
        let mut kv = KeyValues::from_args(&["batch_size=many".into()]).unwrap();
        assert!(kv.take(&TrainingConfig::desk()).is_err());
        let kv = KeyValues::from_args(&["learning_rate=1".into()]).unwrap();
        assert!(matches!(kv.finish(), Err(CliError::Usage(m)) if m.contains("learning_rate")));
    }

    #[test]
    fn rendered_config_reads_back() {
        let t = TrainingConfig::paper();
        let m = ModelConfig::desk();
        let text = render(&[serde_json::to_value(&t).unwrap(), serde_json::to_value(&m).unwrap()]);
        let mut kv = KeyValues::parse(&text, "echo").unwrap();
        assert_eq!(kv.take(&TrainingConfig::desk()).unwrap(), t);
        assert_eq!(kv.take(&ModelConfig::paper()).unwrap(), m);
        kv.finish().unwrap();
    }
}
