//! Run configuration. Every field has a default; an optional TOML file
//! overrides defaults and command-line flags override the file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram::model::{DEFAULT_ORDER, DEFAULT_PRUNE};
use crate::ngram::search::{DEFAULT_BEAM_WIDTH, DEFAULT_ENTROPY_THRESHOLDS, DEFAULT_MAX_CHARS};
use crate::ngram::vocab::DEFAULT_VOCAB_SIZE;
use crate::trie::{DEFAULT_K, DEFAULT_MAX_LEN, DEFAULT_MIN_FREQ};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub order: usize,
    pub vocab_size: usize,
    pub prune: Vec<u32>,
    pub beam_width: usize,
    pub max_chars: usize,
    pub entropy_thresholds: Vec<f64>,
    pub truncate: Vec<usize>,
    pub max_index_len: usize,
    pub min_suffix_freq: u32,
    pub buckets: bool,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: DEFAULT_K,
            alpha: 0.5,
            beta: 0.3,
            gamma: 0.2,
            order: DEFAULT_ORDER,
            vocab_size: DEFAULT_VOCAB_SIZE,
            prune: DEFAULT_PRUNE.to_vec(),
            beam_width: DEFAULT_BEAM_WIDTH,
            max_chars: DEFAULT_MAX_CHARS,
            entropy_thresholds: DEFAULT_ENTROPY_THRESHOLDS.to_vec(),
            truncate: (1..=10).collect(),
            max_index_len: DEFAULT_MAX_LEN,
            min_suffix_freq: DEFAULT_MIN_FREQ,
            buckets: true,
            jobs: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
    }

    /// Loads `path` if given, defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    pub fn jobs(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}
