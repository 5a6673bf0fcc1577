//! Run configuration: defaults, then a `key = value` file, then flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use unravel_core::rules::{default_grid, CONFIDENCE_GRID, MIN_INSTANCES_GRID};
use unravel_core::skipgram::{DEFAULT_TOP_PER_DOC, DEFAULT_VOCAB_LIMIT};
use unravel_core::{InductionParams, Pooling};

use crate::error::{CliError, CliResult};

pub const ALLOWED_DIMS: [usize; 2] = [50, 100];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub keyword_docs: usize,
    pub distractor_docs: usize,
    pub hidden: usize,
    pub embed: usize,
    pub epochs: usize,
    pub pool: Pooling,
    pub top_per_doc: usize,
    pub vocab_limit: usize,
    pub grid: Vec<InductionParams>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            out_dir: PathBuf::from("unravel-out"),
            threads: 1,
            keyword_docs: 2000,
            distractor_docs: 800,
            hidden: 50,
            embed: 100,
            epochs: 30,
            pool: Pooling::Dot,
            top_per_doc: DEFAULT_TOP_PER_DOC,
            vocab_limit: DEFAULT_VOCAB_LIMIT,
            grid: default_grid(),
        }
    }
}

/// Values given on the command line; `None` means "not given".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub keyword_docs: Option<usize>,
    pub distractor_docs: Option<usize>,
    pub hidden: Option<usize>,
    pub embed: Option<usize>,
    pub epochs: Option<usize>,
    pub pool: Option<Pooling>,
    pub top_per_doc: Option<usize>,
    pub vocab_limit: Option<usize>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("invalid value '{value}' for '{key}': {e}"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|v| parse_value(key, v.trim()))
        .collect()
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "threads" => self.threads = parse_value(key, value)?,
            "keyword_docs" => self.keyword_docs = parse_value(key, value)?,
            "distractor_docs" => self.distractor_docs = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "embed" => self.embed = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "pool" => self.pool = parse_value(key, value)?,
            "top_per_doc" => self.top_per_doc = parse_value(key, value)?,
            "vocab_limit" => self.vocab_limit = parse_value(key, value)?,
            "grid_confidence" | "grid_min_instances" => {
                let (mut cfs, mut ms) = self.grid_axes();
                if key == "grid_confidence" {
                    cfs = parse_list(key, value)?;
                } else {
                    ms = parse_list(key, value)?;
                }
                self.grid = cfs
                    .iter()
                    .flat_map(|&confidence| {
                        ms.iter().map(move |&min_instances| InductionParams {
                            confidence,
                            min_instances,
                        })
                    })
                    .collect();
            }
            other => return Err(format!("unknown configuration key '{other}'")),
        }
        Ok(())
    }

    fn grid_axes(&self) -> (Vec<f64>, Vec<usize>) {
        let mut cfs: Vec<f64> = Vec::new();
        let mut ms: Vec<usize> = Vec::new();
        for p in &self.grid {
            if !cfs.contains(&p.confidence) {
                cfs.push(p.confidence);
            }
            if !ms.contains(&p.min_instances) {
                ms.push(p.min_instances);
            }
        }
        if cfs.is_empty() {
            cfs = CONFIDENCE_GRID.to_vec();
        }
        if ms.is_empty() {
            ms = MIN_INSTANCES_GRID.to_vec();
        }
        (cfs, ms)
    }

    /// Applies every setting of a configuration file. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected 'key = value'", i + 1))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &o.$field {
                    self.$field = v.clone();
                })*
            };
        }
        take!(
            seed,
            out_dir,
            threads,
            keyword_docs,
            distractor_docs,
            hidden,
            embed,
            epochs,
            pool,
            top_per_doc,
            vocab_limit
        );
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("hidden", self.hidden), ("embed", self.embed)] {
            if !ALLOWED_DIMS.contains(&v) {
                return Err(format!("{name} must be one of {ALLOWED_DIMS:?}, got {v}"));
            }
        }
        if self.threads == 0 {
            return Err("threads must be at least 1".into());
        }
        if self.keyword_docs < 100 || self.distractor_docs < 40 {
            return Err(format!(
                "need at least 100 keyword and 40 distractor documents, got {} and {}",
                self.keyword_docs, self.distractor_docs
            ));
        }
        if self.top_per_doc == 0 || self.vocab_limit == 0 {
            return Err("top_per_doc and vocab_limit must be positive".into());
        }
        if self.grid.is_empty() {
            return Err("induction grid is empty".into());
        }
        for p in &self.grid {
            p.validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    /// Defaults, then the optional file, then flags.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> CliResult<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| CliError::reading(path, e))?;
            config
                .apply_text(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        }
        config.apply(overrides);
        config.validate().map_err(CliError::Usage)?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let mut config = RunConfig::default();
        config
            .apply_text("# comment\nseed = 11\nepochs = 4\npool = sum\n")
            .unwrap();
        config.apply(&Overrides {
            epochs: Some(9),
            ..Overrides::default()
        });
        assert_eq!(config.seed, 11);
        assert_eq!(config.epochs, 9);
        assert_eq!(config.pool, Pooling::Sum);
        assert_eq!(config.hidden, 50);
    }

    #[test]
    fn grid_axes_are_settable() {
        let mut config = RunConfig::default();
        config.apply_text("grid_confidence = 0.25\ngrid_min_instances = 2, 5").unwrap();
        assert_eq!(
            config.grid,
            vec![
                InductionParams {
                    confidence: 0.25,
                    min_instances: 2
                },
                InductionParams {
                    confidence: 0.25,
                    min_instances: 5
                },
            ]
        );
    }

    #[test]
    fn rejects_bad_input() {
        let mut config = RunConfig::default();
        assert!(config.apply_text("colour = blue").is_err());
        assert!(config.apply_text("seed").is_err());
        assert!(config.apply_text("pool = max").is_err());
        config.hidden = 64;
        assert!(config.validate().unwrap_err().contains("hidden"));
    }
}
