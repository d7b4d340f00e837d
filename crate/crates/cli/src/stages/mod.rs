//! Pipeline stages. Each stage owns one directory under the output root
//! and records a manifest there.

mod evaluate;
mod fit;
mod mask;
mod remap;
mod rx5day;
mod synth;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use tracing::info;

use crate::config::PipelineConfig;
use crate::error::Failure;
use crate::manifest::StageKey;

pub use evaluate::run as evaluate;
pub use fit::run as fit;
pub use mask::run as mask;
pub use remap::run as remap;
pub use rx5day::run as rx5day;
pub use synth::{run as synth, scenario_spec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub skipped: bool,
    /// Convergence warnings; results were still written.
    pub warnings: Vec<String>,
}

/// Files written by a stage body plus its warnings.
pub(crate) struct Produced {
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

pub(crate) fn stage_dir(cfg: &PipelineConfig, stage: &str) -> PathBuf {
    cfg.out_dir.join(stage)
}

/// Skip when the manifest matches, otherwise run `body` in the stage
/// directory and record a fresh manifest.
pub(crate) fn run_stage<C: Serialize>(
    cfg: &PipelineConfig,
    stage: &str,
    stage_config: &C,
    inputs: &[PathBuf],
    body: impl FnOnce(&Path) -> Result<Produced>,
) -> Result<Outcome> {
    let dir = stage_dir(cfg, stage);
    let key = StageKey::new(stage, &(stage_config, crate::manifest::VERSION), cfg.seed, inputs)?;
    if let Some(m) = key.up_to_date(&dir) {
        info!(stage, "inputs unchanged; skipping");
        return Ok(Outcome { skipped: true, warnings: m.warnings });
    }
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let produced = body(&dir)?;
    key.finish(&dir, &produced.outputs, produced.warnings.clone())?;
    info!(stage, outputs = produced.outputs.len(), "stage complete");
    Ok(Outcome { skipped: false, warnings: produced.warnings })
}

/// Map core errors to data failures, keeping the message.
pub(crate) fn data(e: xtreval_core::Error) -> Failure {
    Failure::Data(e.to_string())
}

pub(crate) fn season_max_path(cfg: &PipelineConfig, product: &str) -> Option<PathBuf> {
    if let Some(p) = cfg.products.get(product).and_then(|p| p.season_max.clone()) {
        return Some(p);
    }
    let p = stage_dir(cfg, "rx5day").join(format!("{product}.json"));
    p.exists().then_some(p)
}

pub(crate) fn return_value_path(cfg: &PipelineConfig, product: &str) -> PathBuf {
    stage_dir(cfg, "fit").join(format!("{product}_rv.json"))
}

pub(crate) fn write_text(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Regions from the configured file, or the whole grid as `domain`.
pub(crate) fn load_regions(cfg: &PipelineConfig, grid: &xtreval_core::grid::RegularGrid) -> Result<Vec<xtreval_core::region::Region>> {
    use xtreval_core::region::{regions_from_file, Region, RegionFile};
    let Some(path) = &cfg.regions else {
        return Ok(vec![Region::whole(grid, "domain")]);
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: RegionFile =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let regions = regions_from_file(grid, &file).map_err(|e| Failure::Config(e.to_string()))?;
    if regions.is_empty() {
        return Err(Failure::Config(format!("{} defines no regions", path.display())).into());
    }
    Ok(regions)
}

/// Stage inputs that exist among optional settings.
pub(crate) fn present(paths: &[&Option<PathBuf>]) -> Vec<PathBuf> {
    paths.iter().filter_map(|p| (*p).clone()).collect()
}
