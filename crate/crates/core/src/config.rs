//! Run configuration files.
//!
//! A config is a TOML document with up to three tables:
//!
//! ```toml
//! [sim]
//! epsilon = 0.0001
//! nu = 0.001
//! lambda = 0.01
//! h = 0.01
//! horizon = 2000000
//! seed = 0
//! delta = 0.05
//!
//! [sweep]
//! lambdas = [0.05, 0.02, 0.01]
//! hs = [0.5, 0.1, 0.01]
//! replicates = 10
//!
//! [chain]
//! episodes = 10000
//! ```
//!
//! Every key is optional. `key=value` overrides (as given on the command line)
//! are applied on top of the file; a bare key such as `epsilon` refers to the
//! `[sim]` table.

use serde::{Deserialize, Serialize};

use crate::chain::{ChainOptions, DEFAULT_KICK_LAMBDA};
use crate::dynamics::SimConfig;
use crate::error::{Error, Result};
use crate::simulate::SweepGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
    pub hs: Vec<f64>,
    pub replicates: usize,
    pub derive_seeds: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            lambdas: vec![0.05, 0.02, 0.01],
            hs: vec![0.5, 0.1, 0.01],
            replicates: 10,
            derive_seeds: true,
        }
    }
}

impl SweepSection {
    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            lambdas: self.lambdas.clone(),
            hs: self.hs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub episodes: u64,
    pub episode_cap: Option<u64>,
    pub kick_lambda: f64,
    pub tolerance: f64,
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            episodes: 10_000,
            episode_cap: None,
            kick_lambda: DEFAULT_KICK_LAMBDA,
            tolerance: 1e-10,
        }
    }
}

impl ChainSection {
    pub fn options(&self) -> ChainOptions {
        ChainOptions {
            episodes: self.episodes,
            episode_cap: self.episode_cap,
            kick_lambda: self.kick_lambda,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub sweep: SweepSection,
    pub chain: ChainSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        Self::from_toml_named(text, "config")
    }

    pub fn from_toml_named(text: &str, source_name: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Applies one `key=value` override. `value` is read as a TOML value
    /// (`0.1`, `[0.1, 0.2]`, `true`, ...); integers are accepted for float keys.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let bad = |m: String| Error::Config(format!("override `{assignment}`: {m}"));
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| bad("expected key=value".into()))?;
        let key = key.trim();
        let (section, field) = match key.split_once('.') {
            Some((s, f)) => (s, f),
            None => ("sim", key),
        };
        let parsed: toml::Table = toml::from_str(&format!("v = {}", raw.trim()))
            .map_err(|e| bad(format!("cannot parse value: {e}")))?;
        let mut value = parsed["v"].clone();

        let mut doc = toml::Value::try_from(&*self).map_err(|e| bad(e.to_string()))?;
        let table = doc
            .get_mut(section)
            .and_then(|t| t.as_table_mut())
            .ok_or_else(|| bad(format!("unknown section `{section}`")))?;
        if let (Some(toml::Value::Float(_)), toml::Value::Integer(i)) = (table.get(field), &value) {
            value = toml::Value::Float(*i as f64);
        }
        if let toml::Value::Array(items) = &mut value {
            for item in items.iter_mut() {
                if let toml::Value::Integer(i) = item {
                    if field == "lambdas" || field == "hs" {
                        *item = toml::Value::Float(*i as f64);
                    }
                }
            }
        }
        table.insert(field.to_string(), value);
        *self = doc.try_into().map_err(|e: toml::de::Error| bad(e.to_string().trim_end().to_string()))?;
        Ok(())
    }
}
