//! `mask`: station-based cell masks and their summaries.

use std::fs::File;
use std::io::BufWriter;

use anyhow::Result;
use serde::Serialize;
use tracing::{info, warn};
use xtreval_core::io::{read_elevation, read_grid, read_stations};
use xtreval_core::rng::derive_seed;
use xtreval_core::sampling::{
    build_a1_mask, build_a2_mask, elevation_threshold_mask, high_quality_filter, subsample_mask, CellMask,
};

use super::{data, load_regions, present, run_stage, write_text, Outcome, Produced};
use crate::config::{MaskConfig, PipelineConfig};
use crate::error::Failure;

#[derive(Serialize)]
struct MaskStageConfig<'a> {
    mask: &'a MaskConfig,
    completeness: f64,
    land: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    region: String,
    approach: String,
    n_c: usize,
    n_cs: usize,
    p_cs: Option<f64>,
}

#[derive(Serialize)]
struct Summary {
    stations_total: usize,
    stations_high_quality: usize,
    masks: Vec<SummaryRow>,
}

const SUBSAMPLE_STREAM: u64 = 0x4d41_534b;

pub fn run(cfg: &PipelineConfig) -> Result<Outcome> {
    let grid_path = cfg.need(&cfg.target_grid, "target_grid")?.to_path_buf();
    let stations_path = cfg.need(&cfg.stations, "stations")?.to_path_buf();
    let mut inputs = vec![grid_path.clone(), stations_path.clone()];
    inputs.extend(present(&[&cfg.elevation, &cfg.regions]));
    let stage_cfg = MaskStageConfig { mask: &cfg.mask, completeness: cfg.thresholds.completeness, land: cfg.thresholds.land };
    run_stage(cfg, "mask", &stage_cfg, &inputs, |dir| {
        let grid = read_grid(&grid_path).map_err(data)?;
        let regions = load_regions(cfg, &grid)?;
        let all = read_stations(File::open(&stations_path)?).map_err(data)?;
        let stations = high_quality_filter(&all, cfg.thresholds.completeness);
        if stations.is_empty() {
            warn!(total = all.len(), "no station passes the completeness threshold; A1 is empty");
        }
        let land = cfg.land_threshold();
        let a1 = build_a1_mask(&grid, &stations, land, cfg.mask.min_stations);
        let a2 = build_a2_mask(&grid, &stations, land);
        let mut masks: Vec<CellMask> = vec![a1.clone(), a2.clone()];
        if let Some(path) = &cfg.elevation {
            let z = read_elevation(&grid, land, File::open(path)?).map_err(data)?;
            masks.push(elevation_threshold_mask(&a2, &a1, &z).map_err(data)?);
        }
        if let Some(sub) = &cfg.mask.subsample {
            let base = match &sub.region {
                Some(id) => {
                    let r = regions
                        .iter()
                        .find(|r| &r.id == id)
                        .ok_or_else(|| Failure::Config(format!("subsample region {id:?} is not defined")))?;
                    a1.restrict(r)
                }
                None => a1.clone(),
            };
            let seed = derive_seed(cfg.seed, &[SUBSAMPLE_STREAM]);
            masks.push(subsample_mask(&base, sub.target_proportion, seed).map_err(|e| Failure::Config(e.to_string()))?);
        }

        let mut outputs = Vec::new();
        let mut rows = Vec::new();
        for m in &masks {
            let file = format!("{}.csv", m.provenance());
            m.write_csv(BufWriter::new(File::create(dir.join(&file))?)).map_err(data)?;
            outputs.push(file);
            for r in &regions {
                let s = m.restrict(r).summary();
                rows.push(SummaryRow {
                    region: r.id.clone(),
                    approach: m.provenance().to_string(),
                    n_c: s.n_c,
                    n_cs: s.n_cs,
                    p_cs: s.p_cs.is_finite().then_some(s.p_cs),
                });
            }
            info!(mask = %m.provenance(), cells = m.len(), "mask built");
        }
        let summary = Summary { stations_total: all.len(), stations_high_quality: stations.len(), masks: rows };
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        write_text(&dir.join("summary.json"), text.as_bytes())?;
        outputs.push("summary.json".into());
        Ok(Produced { outputs, warnings: Vec::new() })
    })
}
