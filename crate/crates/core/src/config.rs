//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! d_model = 64
//! heads = 4
//! toy = true
//! ```
//!
//! Keys: `d_model`, `d_e`, `d_h`, `blocks`, `heads`, `d_ff`, `seed`,
//! `position_signal`, `toy`, `dropout`. With `toy = true` every dimension
//! not set explicitly takes its [`ModelConfig::toy`] value instead of the
//! default.

use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::ModelConfig;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub d_model: Option<usize>,
    pub d_e: Option<usize>,
    pub d_h: Option<usize>,
    pub blocks: Option<usize>,
    pub heads: Option<usize>,
    pub d_ff: Option<usize>,
    pub seed: Option<u64>,
    pub position_signal: Option<bool>,
    pub toy: bool,
    /// Reserved; only `0` is accepted.
    pub dropout: f64,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}` expects a non-negative integer, got `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("`{key}` expects true or false, got `{value}`"))),
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.update(text)?;
        Ok(cfg)
    }

    /// Applies every `key = value` line of `text` on top of the current
    /// values.
    pub fn update(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, e.message())))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key; used both by the file parser and for `key=value`
    /// overrides given on the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "d_model" => self.d_model = Some(parse_num(key, value)?),
            "d_e" => self.d_e = Some(parse_num(key, value)?),
            "d_h" => self.d_h = Some(parse_num(key, value)?),
            "blocks" | "N" => self.blocks = Some(parse_num(key, value)?),
            "heads" => self.heads = Some(parse_num(key, value)?),
            "d_ff" => self.d_ff = Some(parse_num(key, value)?),
            "seed" => self.seed = Some(parse_num(key, value)?),
            "position_signal" => self.position_signal = Some(parse_bool(key, value)?),
            "toy" => self.toy = parse_bool(key, value)?,
            "dropout" => {
                let p: f64 = value
                    .parse()
                    .map_err(|_| Error::Config(format!("`dropout` expects a number, got `{value}`")))?;
                if p != 0.0 {
                    return Err(Error::Config("dropout is not supported; only 0 is accepted".into()));
                }
                self.dropout = p;
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{pair}` is not of the form key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Resolved, validated model dimensions.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let base = if self.toy { ModelConfig::toy() } else { ModelConfig::default() };
        let cfg = ModelConfig {
            d_model: self.d_model.unwrap_or(base.d_model),
            heads: self.heads.unwrap_or(base.heads),
            blocks: self.blocks.unwrap_or(base.blocks),
            d_ff: self.d_ff.unwrap_or(base.d_ff),
            label_dim: self.d_e.unwrap_or(base.label_dim),
            gru_hidden: self.d_h.unwrap_or(base.gru_hidden),
            position_signal: self.position_signal.unwrap_or(base.position_signal),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Error {
    fn message(&self) -> String {
        match self {
            Error::Config(m) => m.clone(),
            other => other.to_string(),
        }
    }
}
