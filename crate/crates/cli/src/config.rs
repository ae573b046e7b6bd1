use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gtruth_core::morphology::{GroupingRecipe, GroupingStep, StructuringElement};
use gtruth_core::session::DEFAULT_EPSILON;
use gtruth_core::{Rgb, ThresholdParams};
use gtruth_service::ServiceConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Prefix of environment variables that override config keys, e.g.
/// `GTRUTH_SERVICE_BIND` for `service.bind`.
pub const ENV_PREFIX: &str = "GTRUTH_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub threshold: ThresholdParams,
    pub recipe: GroupingRecipe,
    pub epsilon: f64,
    /// Labels created up front, in index order.
    pub labels: Vec<LabelSpec>,
    /// Scripted assignment for headless runs.
    pub label_map: Option<LabelMap>,
    pub output_dir: PathBuf,
    pub service: ServiceConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threshold: ThresholdParams::otsu(),
            recipe: default_recipe(),
            epsilon: DEFAULT_EPSILON,
            labels: Vec::new(),
            label_map: None,
            output_dir: PathBuf::from("out"),
            service: ServiceConfig::default(),
        }
    }
}

/// A wide, flat closing that joins letters into words.
pub fn default_recipe() -> GroupingRecipe {
    GroupingRecipe::new(vec![GroupingStep::Close(
        StructuringElement::rect(15, 3).expect("odd element"),
    )])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Rgb>,
}

/// Unit ordinal (the 1-based unit id) to label name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelMap {
    /// Label for every unit not listed in `units`.
    pub default: Option<String>,
    pub units: BTreeMap<u32, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config after environment overrides: {0}")]
    Invalid(String),
}

impl PipelineConfig {
    /// Reads TOML (`.toml`) or JSON (anything else) and applies environment
    /// overrides; with no path the defaults are used.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut tree = match path {
            Some(p) => read_tree(p)?,
            None => Value::Object(Map::new()),
        };
        let mut base = serde_json::to_value(Self::default()).expect("serializable");
        merge(&mut base, tree.take());
        apply_env(&mut base, env);
        serde_json::from_value(base).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

fn read_tree(path: &Path) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |message: String| ConfigError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let tree = if path.extension().is_some_and(|e| e == "toml") {
        let t: toml::Table = toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
        serde_json::to_value(t).map_err(|e| parse_err(e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
    };
    // Validate the file on its own so unknown keys point at the file.
    serde_json::from_value::<PipelineConfig>(tree.clone()).map_err(|e| parse_err(e.to_string()))?;
    Ok(tree)
}

/// Overlays `top` onto `base`; objects merge recursively, anything else replaces.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// `GTRUTH_A_B_C=v` sets the key path matching `A_B_C`. Path segments are
/// matched greedily against existing keys; a trailing unmatched remainder
/// becomes a new key. Values parse as JSON, falling back to a string.
/// Variables whose first segment names no top-level key are ignored.
fn apply_env(tree: &mut Value, env: impl IntoIterator<Item = (String, String)>) {
    let mut vars: Vec<(String, String)> = env
        .into_iter()
        .filter_map(|(k, v)| {
            k.strip_prefix(ENV_PREFIX)
                .map(|rest| (rest.to_ascii_lowercase(), v))
        })
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        set_path(tree, &key, value, true);
    }
}

fn set_path(node: &mut Value, key: &str, value: Value, top: bool) -> bool {
    let Value::Object(map) = node else {
        return false;
    };
    // Longest matching key first, so `snapshot_dir` wins over `snapshot`.
    let mut keys: Vec<String> = map
        .keys()
        .filter(|k| key == *k || key.starts_with(&format!("{k}_")))
        .cloned()
        .collect();
    keys.sort_by_key(|k| std::cmp::Reverse(k.len()));
    for k in keys {
        if k == key {
            map.insert(k, value);
            return true;
        }
        let rest = &key[k.len() + 1..];
        let child = map.get_mut(&k).expect("listed key");
        if child.is_null() {
            *child = Value::Object(Map::new());
        }
        if set_path(child, rest, value.clone(), false) {
            return true;
        }
    }
    if top {
        return false;
    }
    map.insert(key.to_string(), value);
    true
}
