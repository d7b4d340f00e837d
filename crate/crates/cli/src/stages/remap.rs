//! `remap`: conservative remapping of daily stores onto the target grid.

use std::path::PathBuf;

use anyhow::{Context, Result};
use tracing::info;
use xtreval_core::io::{read_daily, read_grid, read_store_header, write_daily, Stage, StoreMeta};
use xtreval_core::remap::{apply, build_plan};

use super::{data, run_stage, Outcome, Produced};
use crate::config::PipelineConfig;
use crate::error::Failure;

pub fn run(cfg: &PipelineConfig) -> Result<Outcome> {
    let target = cfg.need(&cfg.target_grid, "target_grid")?.to_path_buf();
    let mut jobs: Vec<(String, PathBuf)> = Vec::new();
    for (name, p) in &cfg.products {
        if let Some(sm) = &p.season_max {
            return Err(Failure::Provenance(format!(
                "product {name} is a season-maximum store ({}); only daily fields can be remapped",
                sm.display()
            ))
            .into());
        }
        if let Some(d) = &p.daily {
            jobs.push((name.clone(), d.clone()));
        }
    }
    if jobs.is_empty() {
        return Err(Failure::Config("no product has a daily store to remap".into()).into());
    }
    for (name, path) in &jobs {
        let h = read_store_header(path).map_err(data)?;
        if let StoreMeta::SeasonMax { .. } = h.meta {
            return Err(Failure::Provenance(format!("{name}: {} holds season maxima, not daily values", path.display())).into());
        }
    }
    let mut inputs: Vec<PathBuf> = jobs.iter().map(|(_, p)| p.clone()).collect();
    inputs.push(target.clone());
    let stage_cfg = (&jobs, cfg.thresholds.coverage);
    run_stage(cfg, "remap", &stage_cfg, &inputs, |dir| {
        let grid = read_grid(&target).map_err(data)?;
        let mut outputs = Vec::new();
        for (name, path) in &jobs {
            let (field, _) = read_daily(path).map_err(data).with_context(|| format!("reading {}", path.display()))?;
            let plan = build_plan(field.grid(), &grid).map_err(data)?;
            let out = apply(&plan, &field, cfg.thresholds.coverage).map_err(data)?;
            let file = format!("{name}.json");
            write_daily(&dir.join(&file), &out, Stage::Remapped).map_err(data)?;
            info!(product = %name, days = out.n_days(), "remapped");
            outputs.push(file);
            outputs.push(format!("{name}.f32"));
        }
        Ok(Produced { outputs, warnings: Vec::new() })
    })
}
