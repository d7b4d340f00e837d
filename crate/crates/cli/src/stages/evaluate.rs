//! `evaluate`: extreme bias and Taylor statistics per region and approach,
//! with paired bootstrap intervals for changes in bias.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::Result;
use serde::Serialize;
use tracing::{info, warn};
use xtreval_core::io::read_return_values;
use xtreval_core::metrics::{
    compare_approaches, write_change_csv, write_replicate_csv, write_report_csv, write_taylor_csv, Approach,
    BootstrapFields, CompareOptions,
};
use xtreval_core::sampling::CellMask;

use super::{data, load_regions, present, return_value_path, run_stage, stage_dir, Outcome, Produced};
use crate::config::{approach_mask, EvaluateConfig, PipelineConfig};
use crate::error::Failure;

#[derive(Serialize)]
struct EvalStageConfig<'a> {
    evaluate: &'a EvaluateConfig,
    level: f64,
    land: f64,
}

pub fn run(cfg: &PipelineConfig) -> Result<Outcome> {
    let ev = &cfg.evaluate;
    let model_path = return_value_path(cfg, &ev.model);
    let ref_path = return_value_path(cfg, &ev.reference);
    for (p, name) in [(&model_path, &ev.model), (&ref_path, &ev.reference)] {
        if !p.exists() {
            return Err(Failure::Config(format!("no return values for {name} at {}; run fit first", p.display())).into());
        }
    }
    let mask_dir = stage_dir(cfg, "mask");
    let mut mask_paths: Vec<(String, PathBuf)> = Vec::new();
    for a in &ev.approaches {
        let stem = approach_mask(a).ok_or_else(|| Failure::Config(format!("unknown approach {a:?}")))?;
        let p = mask_dir.join(format!("{stem}.csv"));
        if !p.exists() {
            return Err(Failure::Config(format!("mask for {a} missing at {}; run mask first", p.display())).into());
        }
        mask_paths.push((a.clone(), p));
    }
    let mut inputs = vec![model_path.clone(), ref_path.clone()];
    inputs.extend(mask_paths.iter().map(|(_, p)| p.clone()));
    inputs.extend(present(&[&cfg.regions]));
    let stage_cfg = EvalStageConfig { evaluate: ev, level: cfg.bootstrap.level, land: cfg.thresholds.land };

    run_stage(cfg, "evaluate", &stage_cfg, &inputs, |dir| {
        let model = read_return_values(&model_path).map_err(data)?;
        let reference = read_return_values(&ref_path).map_err(data)?;
        if !model.grid.same_geometry(&reference.grid) {
            return Err(Failure::Data("model and reference return values are on different grids".into()).into());
        }
        if model.bootstrap_seed != reference.bootstrap_seed || model.replicates.len() != reference.replicates.len() {
            return Err(Failure::Provenance(format!(
                "bootstrap ensembles are not paired (seeds {} / {}, replicates {} / {})",
                model.bootstrap_seed,
                reference.bootstrap_seed,
                model.replicates.len(),
                reference.replicates.len()
            ))
            .into());
        }
        if model.return_period != reference.return_period {
            return Err(Failure::Provenance("model and reference use different return periods".into()).into());
        }
        let mut warnings_log = Vec::new();
        if model.season_years != reference.season_years {
            warnings_log.push("model and reference season years differ; replicates are resampled on each axis".to_string());
        }
        let grid = &reference.grid;
        let regions = load_regions(cfg, grid)?;
        let approaches: Vec<Approach> = mask_paths
            .iter()
            .map(|(name, p)| {
                let mask = CellMask::read_csv(grid, cfg.land_threshold(), File::open(p)?).map_err(data)?;
                Ok(Approach { name: name.clone(), mask })
            })
            .collect::<Result<_>>()?;
        let opts = CompareOptions { level: cfg.bootstrap.level, weighting: ev.weighting, bias_mode: ev.bias_mode };
        let boot = BootstrapFields { model: &model.replicates, reference: &reference.replicates };
        let cmp = compare_approaches(&model.point, &reference.point, &approaches, &ev.baseline, &regions, Some(boot), &opts)
            .map_err(data)?;
        for r in &cmp.reports {
            if let Some(note) = &r.note {
                warnings_log.push(format!("{}/{}: {note}", r.region, r.approach));
            }
            info!(region = %r.region, approach = %r.approach, bias = r.bias, cells = r.n_cells, "evaluated");
        }
        for w in &warnings_log {
            warn!("{w}");
        }
        let files = ["report.csv", "taylor.csv", "change.csv", "replicates.csv"];
        let open = |f: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(f))?)) };
        write_report_csv(&cmp.reports, open(files[0])?).map_err(data)?;
        write_taylor_csv(&cmp.reports, open(files[1])?).map_err(data)?;
        write_change_csv(&cmp.changes, open(files[2])?).map_err(data)?;
        write_replicate_csv(&cmp.replicate_biases, open(files[3])?).map_err(data)?;
        Ok(Produced { outputs: files.iter().map(|f| f.to_string()).collect(), warnings: Vec::new() })
    })
}
