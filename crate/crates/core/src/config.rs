//! Run configuration: built-in defaults, optionally overridden by a TOML file.
//!
//! ```toml
//! grid_n = 5
//! jobs = 4
//! oracle_cap = 5000
//! csv = false
//!
//! [matcher]
//! min_edge = 15.0
//! max_edge = 100.0
//! neighbors_k = 4
//! score_threshold = 90.0
//! min_matched_descriptors = 0
//! side_tolerance = 5.0
//! angle_tolerance = 0.2618
//! ```

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::dedup::DEFAULT_ORACLE_CAP;
use crate::error::{Error, Result};
use crate::grid::{GridParams, DEFAULT_GRID_SIZE};
use crate::matcher::MatchParams;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid_n: u32,
    pub matcher: MatchParams,
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
    pub oracle_cap: usize,
    pub csv: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid_n: DEFAULT_GRID_SIZE,
            matcher: MatchParams::default(),
            jobs: None,
            oracle_cap: DEFAULT_ORACLE_CAP,
            csv: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format(origin, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml(&text, path)
    }

    pub fn grid(&self) -> Result<GridParams> {
        GridParams::new(self.grid_n)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.matcher.validate()?;
        if self.jobs == Some(0) {
            return Err(Error::InvalidParams("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_setup() {
        let c = RunConfig::default();
        assert_eq!(c.grid_n, 5);
        assert_eq!(c.matcher.min_edge, 15.0);
        assert_eq!(c.matcher.max_edge, 100.0);
        assert_eq!(c.matcher.neighbors_k, 4);
        assert_eq!(c.matcher.score_threshold, 90.0);
        assert_eq!(c.matcher.min_matched_descriptors, 0);
        assert_eq!(c.oracle_cap, 5000);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let c = RunConfig::from_toml("grid_n = 4\n[matcher]\nscore_threshold = 80.0\n", Path::new("c.toml")).unwrap();
        assert_eq!(c.grid_n, 4);
        assert_eq!(c.matcher.score_threshold, 80.0);
        assert_eq!(c.matcher.neighbors_k, 4);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("grid = 4\n", Path::new("c.toml")).is_err());
        assert!(RunConfig::from_toml("[matcher]\nfoo = 1\n", Path::new("c.toml")).is_err());
        let c = RunConfig::from_toml("grid_n = 0\n", Path::new("c.toml")).unwrap();
        assert!(c.validate().is_err());
    }
}
