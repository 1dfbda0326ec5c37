//! TOML experiment files: world sources plus training and benchmark settings.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::BenchSettings;
use crate::error::{AdpError, Result};
use crate::train::TrainConfig;
use crate::world::{generate_world, CaParams, OccupancyWorld};

/// File extension used for saved worlds.
pub const WORLD_EXT: &str = "world";

/// Either a directory of saved worlds or a seeded batch to generate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSource {
    /// When set, every `*.world` file in the directory, in file-name order.
    pub dir: Option<PathBuf>,
    pub first_seed: u64,
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub ca: CaParams,
}

impl Default for WorldSource {
    fn default() -> Self {
        Self {
            dir: None,
            first_seed: 0,
            count: 5,
            width: 30,
            height: 30,
            resolution: 0.15,
            ca: CaParams::default(),
        }
    }
}

impl WorldSource {
    pub fn generated(first_seed: u64, count: usize) -> Self {
        Self {
            first_seed,
            count,
            ..Self::default()
        }
    }

    pub fn from_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            ..Self::default()
        }
    }

    /// Loads or generates the worlds. Relative directories resolve against `base`.
    pub fn resolve(&self, base: &Path) -> Result<Vec<OccupancyWorld>> {
        match &self.dir {
            Some(dir) => load_world_dir(&base.join(dir)),
            None => generate_worlds(
                self.first_seed,
                self.count,
                self.width,
                self.height,
                self.resolution,
                &self.ca,
            ),
        }
    }
}

/// Worlds for seeds `first_seed..first_seed + count`, generated in parallel.
pub fn generate_worlds(
    first_seed: u64,
    count: usize,
    width: usize,
    height: usize,
    resolution: f64,
    ca: &CaParams,
) -> Result<Vec<OccupancyWorld>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| generate_world(first_seed + i, width, height, resolution, ca))
        .collect()
}

pub fn world_file_name(index: usize, world: &OccupancyWorld) -> String {
    format!("world_{index:04}_{}.{WORLD_EXT}", world.seed())
}

/// Writes `worlds` into `dir` (created if missing) and returns the paths.
pub fn save_worlds(dir: &Path, worlds: &[OccupancyWorld]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    worlds
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let path = dir.join(world_file_name(i, w));
            w.save(&path)?;
            Ok(path)
        })
        .collect()
}

pub fn load_world_dir(dir: &Path) -> Result<Vec<OccupancyWorld>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == WORLD_EXT));
    paths.sort();
    if paths.is_empty() {
        return Err(AdpError::Config(format!("no .{WORLD_EXT} files in {}", dir.display())));
    }
    paths.iter().map(|p| OccupancyWorld::load(p)).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub worlds: WorldSource,
    /// Evaluation worlds; the training worlds when absent.
    pub eval_worlds: Option<WorldSource>,
    /// Also carries the environment and planner (`[train.env]`, `[train.env.planner]`).
    pub train: TrainConfig,
    pub bench: BenchSettings,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| AdpError::Parse(e.to_string()))?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| AdpError::Parse(e.to_string()))
    }

    /// Overrides the training and benchmark seeds together.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self.bench.seed = seed;
        self
    }
}
