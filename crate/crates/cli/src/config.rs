//! Optional pipeline configuration file.
//!
//! A JSON object whose keys fill in parameters that were not given on the
//! command line. Flags always win over the file, and the file wins over the
//! built-in defaults:
//!
//! ```json
//! {"tau": 0.2, "buffer": 1, "weighting": "inverse-distance",
//!  "sampling": "nearest", "classes": 11, "mapping": "classes.txt",
//!  "seed": 7, "threads": 8}
//! ```
//!
//! Relative paths in the file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::failure::{Failure, Outcome};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub tau: Option<f64>,
    pub buffer: Option<u32>,
    pub weighting: Option<String>,
    pub sampling: Option<String>,
    pub classes: Option<usize>,
    pub mapping: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Outcome<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::from(e).at(path))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Failure::usage(e.to_string()).at(path))?;
        if let Some(m) = &cfg.mapping {
            if m.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.mapping = Some(base.join(m));
            }
        }
        Ok(cfg)
    }
}
