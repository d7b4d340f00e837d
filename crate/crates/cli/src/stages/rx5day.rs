//! `rx5day`: DJF block maxima from daily stores.

use std::path::PathBuf;

use anyhow::Result;
use tracing::info;
use xtreval_core::io::{read_daily, write_season_max};
use xtreval_core::seasonal::{rx5day_djf, Season};

use super::{data, run_stage, stage_dir, Outcome, Produced};
use crate::config::PipelineConfig;
use crate::error::Failure;

/// Remapped store when present, otherwise the configured daily store.
fn daily_input(cfg: &PipelineConfig, name: &str) -> Option<PathBuf> {
    let remapped = stage_dir(cfg, "remap").join(format!("{name}.json"));
    if remapped.exists() {
        return Some(remapped);
    }
    cfg.products.get(name).and_then(|p| p.daily.clone())
}

pub fn run(cfg: &PipelineConfig) -> Result<Outcome> {
    let jobs: Vec<(String, PathBuf)> = cfg
        .products
        .keys()
        .filter_map(|n| daily_input(cfg, n).map(|p| (n.clone(), p)))
        .collect();
    if jobs.is_empty() {
        return Err(Failure::Config("no daily input for any product".into()).into());
    }
    let inputs: Vec<PathBuf> = jobs.iter().map(|(_, p)| p.clone()).collect();
    run_stage(cfg, "rx5day", &jobs, &inputs, |dir| {
        let mut outputs = Vec::new();
        for (name, path) in &jobs {
            let (field, header) = read_daily(path).map_err(data)?;
            let series = rx5day_djf(&field).map_err(data)?;
            let file = format!("{name}.json");
            write_season_max(&dir.join(&file), &series, Season::Djf, header.stage).map_err(data)?;
            info!(product = %name, seasons = series.n_years(), "block maxima");
            outputs.push(file);
            outputs.push(format!("{name}.f32"));
        }
        Ok(Produced { outputs, warnings: Vec::new() })
    })
}
