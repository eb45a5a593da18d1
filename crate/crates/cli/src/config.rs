//! Pipeline settings from an optional `key = value` file, overridden by flags.
//!
//! Recognized keys:
//!
//! ```text
//! graph = "g.json"        # road graph
//! world = "w.json"        # synthetic world
//! taxonomy = "classes.csv"
//! remap = "remap.csv"
//! d_min = 30.0            # minimum pose separation, meters
//! d_max = 100.0           # visibility range, meters
//! fov = 90.0              # field of view, degrees
//! eps = 25.0              # interchange clustering radius, meters
//! min_pts = 3             # interchange clustering density
//! k = 7                   # target votes per section
//! p = 0.2814              # simulated annotator accuracy
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use roadlabel_core::annotation::DEFAULT_TARGET_ACCURACY;
use roadlabel_core::roadgraph::{DEFAULT_CLUSTER_EPS, DEFAULT_CLUSTER_MIN_PTS};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub graph: Option<PathBuf>,
    pub world: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub remap: Option<PathBuf>,
    pub d_min: Option<f64>,
    pub d_max: Option<f64>,
    pub fov: Option<f64>,
    pub eps: Option<f64>,
    pub min_pts: Option<usize>,
    pub k: Option<usize>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| CliError::new("config", format!("{}: {e}", path.display())))
    }
}

/// Resolved settings after merging defaults, file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub graph: Option<PathBuf>,
    pub world: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub remap: Option<PathBuf>,
    pub d_min: f64,
    pub d_max: f64,
    pub fov: f64,
    pub eps: f64,
    pub min_pts: usize,
    pub k: usize,
    pub p: f64,
    pub seed: u64,
    pub target: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            graph: None,
            world: None,
            taxonomy: None,
            remap: None,
            d_min: 30.0,
            d_max: 100.0,
            fov: 90.0,
            eps: DEFAULT_CLUSTER_EPS,
            min_pts: DEFAULT_CLUSTER_MIN_PTS,
            k: 7,
            p: 0.2814,
            seed: 0,
            target: DEFAULT_TARGET_ACCURACY,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(file: &FileConfig) -> Self {
        let d = PipelineConfig::default();
        PipelineConfig {
            graph: file.graph.clone(),
            world: file.world.clone(),
            taxonomy: file.taxonomy.clone(),
            remap: file.remap.clone(),
            d_min: file.d_min.unwrap_or(d.d_min),
            d_max: file.d_max.unwrap_or(d.d_max),
            fov: file.fov.unwrap_or(d.fov),
            eps: file.eps.unwrap_or(d.eps),
            min_pts: file.min_pts.unwrap_or(d.min_pts),
            k: file.k.unwrap_or(d.k),
            p: file.p.unwrap_or(d.p),
            seed: file.seed.unwrap_or(d.seed),
            target: d.target,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |what: &str| Err(CliError::new("invalid_value", what.to_string()));
        if !(self.d_min > 0.0 && self.d_min.is_finite()) {
            return bad("d_min must be a positive number");
        }
        if !(self.d_max > 0.0 && self.d_max.is_finite()) {
            return bad("d_max must be a positive number");
        }
        if !(self.fov > 0.0 && self.fov <= 360.0) {
            return bad("fov must lie in (0, 360]");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps must be a positive number");
        }
        if self.min_pts == 0 {
            return bad("min_pts must be at least 1");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad("p must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.target) {
            return bad("target must lie in [0, 1]");
        }
        Ok(())
    }
}
