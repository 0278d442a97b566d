//! Run configuration: JSON or flat `key = value` files, with overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{AbxError, Result};
use crate::rng::{derive_seed, fnv1a64};
use crate::triplet::TripletMode;

fn default_modes() -> Vec<TripletMode> {
    vec![TripletMode::Ld, TripletMode::Md]
}

fn default_n_triplets() -> usize {
    100_000
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Store manifest.
    pub store: PathBuf,
    /// Corpus (line-delimited JSON) or a saved index (`.json`).
    pub corpus: PathBuf,
    /// Defaults to every language in both the store and the corpus.
    #[serde(default)]
    pub languages: Option<Vec<String>>,
    /// Defaults to every layer in the store.
    #[serde(default)]
    pub layers: Option<Vec<u32>>,
    /// Defaults to every checkpoint in the store.
    #[serde(default)]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default)]
    pub exclude_checkpoints: Vec<u64>,
    #[serde(default = "default_modes")]
    pub modes: Vec<TripletMode>,
    #[serde(default = "default_n_triplets")]
    pub n_triplets: usize,
    #[serde(default)]
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 picks the machine's parallelism.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default = "default_true")]
    pub retrieval: bool,
    /// Retrieval layer; the last configured layer when unset.
    #[serde(default)]
    pub retrieval_layer: Option<u32>,
    /// Optional `language,checkpoint,accuracy` probe table.
    #[serde(default)]
    pub accuracy: Option<PathBuf>,
    /// Final checkpoint for selection and final-checkpoint analyses; the
    /// latest kept checkpoint when unset.
    #[serde(default)]
    pub final_checkpoint: Option<u64>,
}

const LIST_KEYS: [&str; 5] = ["languages", "layers", "checkpoints", "exclude_checkpoints", "modes"];

fn scalar(raw: &str) -> Value {
    let raw = raw.trim();
    if let Ok(n) = raw.parse::<u64>() {
        return Value::from(n);
    }
    match raw {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::String(raw.to_string()),
    }
}

fn kv_value(key: &str, raw: &str) -> Value {
    if LIST_KEYS.contains(&key) {
        let raw = raw.trim();
        if raw.is_empty() || raw == "all" {
            return match key {
                "exclude_checkpoints" => Value::Array(Vec::new()),
                "modes" => TripletMode::ALL.iter().map(|m| Value::from(m.as_str())).collect(),
                _ => Value::Null,
            };
        }
        let items: Vec<Value> = raw.split(',').map(|s| {
            // modes stay strings even when they look numeric
            if key == "languages" || key == "modes" {
                Value::String(s.trim().to_string())
            } else {
                scalar(s)
            }
        }).collect();
        Value::Array(items)
    } else {
        scalar(raw)
    }
}

/// Parses `key = value` lines; `#` starts a comment.
fn parse_kv(text: &str) -> Result<Map<String, Value>> {
    let mut map = Map::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| AbxError::Config(format!("line {}: expected key = value", i + 1)))?;
        let k = k.trim().replace('-', "_");
        map.insert(k.clone(), kv_value(&k, v));
    }
    Ok(map)
}

impl RunConfig {
    /// Reads a config file (JSON when it starts with `{`, key=value
    /// otherwise) and applies `overrides` given as raw `key, value` strings.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| AbxError::io(p, e))?;
                if text.trim_start().starts_with('{') {
                    match serde_json::from_str::<Value>(&text)
                        .map_err(|e| AbxError::Config(e.to_string()))?
                    {
                        Value::Object(m) => m,
                        _ => return Err(AbxError::Config("config must be a JSON object".into())),
                    }
                } else {
                    parse_kv(&text)?
                }
            }
            None => Map::new(),
        };
        for (k, v) in overrides {
            let k = k.replace('-', "_");
            let value = kv_value(&k, v);
            map.insert(k, value);
        }
        serde_json::from_value(Value::Object(map)).map_err(|e| AbxError::Config(e.to_string()))
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        serde_json::from_value(Value::Object(parse_kv(text)?)).map_err(|e| AbxError::Config(e.to_string()))
    }

    /// Seed of one scoring cell: the master seed folded with the mode code,
    /// both language codes (FNV-1a), the layer and the checkpoint.
    pub fn cell_seed(&self, mode: TripletMode, lang1: &str, lang2: &str, layer: u32, checkpoint: u64) -> u64 {
        cell_seed(self.seed, mode, lang1, lang2, layer, checkpoint)
    }
}

pub fn cell_seed(master: u64, mode: TripletMode, lang1: &str, lang2: &str, layer: u32, checkpoint: u64) -> u64 {
    derive_seed(
        master,
        &[
            mode.code(),
            fnv1a64(lang1.as_bytes()),
            fnv1a64(lang2.as_bytes()),
            u64::from(layer),
            checkpoint,
        ],
    )
}
