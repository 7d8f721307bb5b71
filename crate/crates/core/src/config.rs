//! Flat `key=value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored; keys and values are
//! trimmed. Later lines override earlier ones.

use std::path::Path;

use crate::error::ConfigError;
use crate::scoring::TrainerConfig;

/// Key/value pairs in file order.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: line.to_string(),
            });
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: line.to_string(),
            });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    parse_key_values(&std::fs::read_to_string(path)?)
}

fn value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_string(),
        value: v.to_string(),
        message: e.to_string(),
    })
}

/// Trainer keys accepted in configuration files.
pub const TRAINER_KEYS: [&str; 16] = [
    "epochs",
    "lr",
    "beta1",
    "beta2",
    "epsilon",
    "batch_size",
    "anneal_factor",
    "anneal_after",
    "anneal_every",
    "dropout",
    "unk_replace",
    "seed",
    "word_dim",
    "pos_dim",
    "window",
    "repr_dim",
];

/// Sets one trainer field. Returns `Ok(false)` if `key` is not a trainer key.
pub fn set_trainer_key(cfg: &mut TrainerConfig, key: &str, v: &str) -> Result<bool, ConfigError> {
    match key {
        "epochs" => cfg.epochs = value(key, v)?,
        "lr" => cfg.lr0 = value(key, v)?,
        "beta1" => cfg.adam.beta1 = value(key, v)?,
        "beta2" => cfg.adam.beta2 = value(key, v)?,
        "epsilon" => cfg.adam.epsilon = value(key, v)?,
        "batch_size" => cfg.batch_size = value(key, v)?,
        "anneal_factor" => cfg.anneal_factor = value(key, v)?,
        "anneal_after" => cfg.anneal_after = value(key, v)?,
        "anneal_every" => cfg.anneal_every = value(key, v)?,
        "dropout" => cfg.dropout = value(key, v)?,
        "unk_replace" => cfg.unk_replace = value(key, v)?,
        "seed" => cfg.seed = value(key, v)?,
        "word_dim" => cfg.dims.word_dim = value(key, v)?,
        "pos_dim" => cfg.dims.pos_dim = value(key, v)?,
        "window" => cfg.dims.window = value(key, v)?,
        "repr_dim" => cfg.dims.repr_dim = value(key, v)?,
        _ => return Ok(false),
    }
    Ok(true)
}
