//! Reference selection series shipped with the scenarios.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use react_core::selectors::Algorithm;

use crate::error::Result;
use crate::files::read_json;
use crate::runs::Mode;

/// A published selection sequence for one scenario, algorithm and mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSeries {
    pub scenario: String,
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub impact: f64,
    pub indices: Vec<u32>,
    pub costs: Vec<f64>,
    pub benefits: Vec<f64>,
    #[serde(default)]
    pub notes: String,
}

impl ReferenceSeries {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `(index, cost, benefit)` per step.
    pub fn steps(&self) -> Vec<(u32, f64, f64)> {
        self.indices
            .iter()
            .zip(&self.costs)
            .zip(&self.benefits)
            .map(|((&i, &c), &b)| (i, c, b))
            .collect()
    }
}

/// Path of the reference file for a scenario name, algorithm and mode.
pub fn reference_path(dir: &Path, scenario: &str, algorithm: Algorithm, mode: Mode) -> PathBuf {
    dir.join(format!("{scenario}_{algorithm}_{mode}.json"))
}

pub fn load_reference(path: &Path) -> Result<ReferenceSeries> {
    read_json(path)
}
