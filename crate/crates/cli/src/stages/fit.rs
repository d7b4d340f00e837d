//! `fit`: nonstationary GEV per cell, point return values and the year-block
//! bootstrap ensemble.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::Result;
use serde::Serialize;
use tracing::{info, warn};
use xtreval_core::extremes::{fit_field, FitOptions};
use xtreval_core::io::{covariate_from_gmt, read_gmt, read_season_max, write_fit_csv, write_return_values, ReturnValueStore, Stage, StoreMeta};
use xtreval_core::uncertainty::{bootstrap_return_values, cell_failure_fraction, MAX_FAILURE_FRACTION};

use super::{data, run_stage, season_max_path, Outcome, Produced};
use crate::config::PipelineConfig;
use crate::error::Failure;

#[derive(Serialize)]
struct FitStageConfig<'a> {
    products: &'a [(String, PathBuf)],
    return_period: f64,
    replicates: usize,
    baseline: Option<[i32; 2]>,
    require_remapped: bool,
    options: FitOptions,
}

pub fn run(cfg: &PipelineConfig) -> Result<Outcome> {
    let gmt = cfg.need(&cfg.gmt, "gmt")?.to_path_buf();
    let mut jobs: Vec<(String, PathBuf)> = Vec::new();
    for name in cfg.products.keys() {
        let path = season_max_path(cfg, name)
            .ok_or_else(|| Failure::Config(format!("product {name}: no season-maximum store; run rx5day first")))?;
        jobs.push((name.clone(), path));
    }
    if jobs.is_empty() {
        return Err(Failure::Config("no products configured".into()).into());
    }
    for (name, path) in &jobs {
        let h = xtreval_core::io::read_store_header(path).map_err(data)?;
        let StoreMeta::SeasonMax { daily_stage, .. } = h.meta else {
            return Err(Failure::Provenance(format!("{name}: {} is not a season-maximum store", path.display())).into());
        };
        if cfg.fit.require_remapped && daily_stage == Stage::Native {
            return Err(Failure::Provenance(format!(
                "{name}: maxima were taken from native-grid data; remap before fitting or set fit.require_remapped = false"
            ))
            .into());
        }
    }
    let options = FitOptions { seed: cfg.seed, ..cfg.fit.options };
    let stage_cfg = FitStageConfig {
        products: &jobs,
        return_period: cfg.return_period,
        replicates: cfg.bootstrap.replicates,
        baseline: cfg.gmt_baseline,
        require_remapped: cfg.fit.require_remapped,
        options,
    };
    let mut inputs: Vec<PathBuf> = jobs.iter().map(|(_, p)| p.clone()).collect();
    inputs.push(gmt.clone());
    run_stage(cfg, "fit", &stage_cfg, &inputs, |dir| {
        let baseline = match cfg.gmt_baseline {
            Some([a, b]) => (a, b),
            None => {
                let (years, _) = read_gmt(File::open(&gmt)?).map_err(data)?;
                match (years.first(), years.last()) {
                    (Some(&a), Some(&b)) => (a, b),
                    _ => return Err(Failure::Data(format!("{} has no rows", gmt.display())).into()),
                }
            }
        };
        let covariate = covariate_from_gmt(File::open(&gmt)?, baseline).map_err(data)?;
        let mut outputs = Vec::new();
        let mut warnings = Vec::new();
        for (name, path) in &jobs {
            let (series, _) = read_season_max(path).map_err(data)?;
            let point = fit_field(&series.all_years(), &covariate, cfg.return_period, &options, None).map_err(data)?;
            let attempted = point.fits.iter().flatten().count();
            if attempted > 0 && point.n_failed() as f64 > MAX_FAILURE_FRACTION * attempted as f64 {
                warnings.push(format!("{name}: {} of {attempted} cell fits did not converge", point.n_failed()));
            }
            let ens = bootstrap_return_values(&series, &covariate, &point, cfg.bootstrap.replicates, cfg.seed, &options)
                .map_err(data)?;
            if ens.warning() {
                warnings.push(format!("{name}: {} of {} bootstrap replicates failed", ens.n_failed(), ens.len()));
            }
            let cell_fail = cell_failure_fraction(&point, &ens);
            if cell_fail > MAX_FAILURE_FRACTION {
                warnings.push(format!("{name}: {:.1}% of bootstrap cell refits failed", 100.0 * cell_fail));
            }
            info!(product = %name, converged = point.n_converged(), replicates = ens.len(), failed = ens.n_failed(), "fitted");

            let csv = format!("{name}.csv");
            write_fit_csv(series.grid(), &point, BufWriter::new(File::create(dir.join(&csv))?)).map_err(data)?;
            let store = ReturnValueStore {
                grid: series.grid().clone(),
                return_period: cfg.return_period,
                xbar: point.xbar,
                season_years: series.season_years().to_vec(),
                bootstrap_seed: cfg.seed,
                point: point.return_values.clone(),
                replicates: ens.replicates,
            };
            let rv = format!("{name}_rv.json");
            write_return_values(&dir.join(&rv), &store).map_err(data)?;
            outputs.extend([csv, rv, format!("{name}_rv.f64")]);
        }
        for w in &warnings {
            warn!("{w}");
        }
        Ok(Produced { outputs, warnings })
    })
}
