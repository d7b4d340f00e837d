//! `synth`: write a synthetic scenario as pipeline inputs plus a ready
//! configuration (`pipeline.json`) that runs the remaining stages on it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tracing::info;
use xtreval_core::extremes::GevParams;
use xtreval_core::grid::RegularGrid;
use xtreval_core::io::{write_daily, write_elevation, write_gmt, write_grid, write_season_max, write_stations, Stage};
use xtreval_core::region::{RegionFile, RegionSpec};
use xtreval_core::sampling::{build_a1_mask, high_quality_filter};
use xtreval_core::seasonal::Season;
use xtreval_core::synth::{generate_scenario, Scenario, ScenarioSpec};

use super::{data, run_stage, write_text, Outcome, Produced};
use crate::config::{
    EvaluateConfig, MaskConfig, PipelineConfig, ProductConfig, ScenarioSource, SubsampleConfig,
};
use crate::error::Failure;

/// Resolve the configured scenario; `seed` replaces the scenario seed.
pub fn scenario_spec(cfg: &PipelineConfig, seed: Option<u64>) -> Result<ScenarioSpec> {
    let source = cfg.scenario.as_ref().ok_or_else(|| Failure::Config("scenario is required for synth".into()))?;
    let mut spec = match source {
        ScenarioSource::Named(n) if n == "utah-like" => ScenarioSpec::utah_like(),
        ScenarioSource::Named(n) if n == "kansas-like" => ScenarioSpec::kansas_like(),
        ScenarioSource::Named(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{path}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{path}: {e}")))?
        }
        ScenarioSource::Inline(s) => (**s).clone(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(spec)
}

pub fn run(cfg: &PipelineConfig, seed: Option<u64>) -> Result<Outcome> {
    let spec = scenario_spec(cfg, seed)?;
    run_stage(cfg, "synth", &(&spec, cfg.return_period, cfg.thresholds), &[], |dir| {
        let sc = generate_scenario(&spec).map_err(|e| Failure::Config(e.to_string()))?;
        let outputs = write_scenario(cfg, &sc, dir)?;
        info!(scenario = %spec.name, cells = sc.grid.n_cells(), stations = sc.stations.len(), "scenario written");
        Ok(Produced { outputs, warnings: Vec::new() })
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
}

fn truth_csv(grid: &RegularGrid, params: &[GevParams], rv: &[f64], r: f64) -> String {
    let mut s = format!("row,col,mu0,mu1,sigma,xi,rv{r}\n");
    for (i, c) in grid.cells().enumerate() {
        let p = &params[i];
        let _ = writeln!(s, "{},{},{},{},{},{},{}", c.row, c.col, p.mu0, p.mu1, p.sigma, p.xi, rv[i]);
    }
    s
}

fn write_scenario(cfg: &PipelineConfig, sc: &Scenario, dir: &Path) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    write_grid(&dir.join("grid.json"), &sc.grid).map_err(data)?;
    write_stations(&sc.stations, create(dir, "stations.csv")?).map_err(data)?;
    write_elevation(&sc.elevation, create(dir, "elevation.csv")?).map_err(data)?;
    write_gmt(&sc.gmt_years, &sc.gmt_anomaly, create(dir, "gmt.csv")?).map_err(data)?;
    out.extend(["grid.json", "stations.csv", "elevation.csv", "gmt.csv"].map(String::from));

    let lat = sc.spec.grid.lat;
    let lon = sc.spec.grid.lon;
    let regions = RegionFile {
        regions: vec![RegionSpec { id: "domain".into(), cells: None, polygon: None, bbox: Some([lon[0], lat[0], lon[1], lat[1]]) }],
    };
    write_text(&dir.join("regions.json"), (serde_json::to_string_pretty(&regions)? + "\n").as_bytes())?;
    out.push("regions.json".into());

    let mut products = BTreeMap::new();
    match (&sc.reference_daily, &sc.model_daily) {
        (Some(rd), Some(md)) => {
            for (name, field) in [("reference", rd), ("model", md)] {
                write_daily(&dir.join(format!("{name}.json")), field, Stage::Native).map_err(data)?;
                out.extend([format!("{name}.json"), format!("{name}.f32")]);
                products.insert(name.to_string(), ProductConfig { daily: Some(format!("{name}.json").into()), season_max: None });
            }
        }
        _ => {
            for (name, series) in [("reference", &sc.reference), ("model", &sc.model)] {
                write_season_max(&dir.join(format!("{name}.json")), series, Season::Djf, Stage::Synthetic).map_err(data)?;
                out.extend([format!("{name}.json"), format!("{name}.f32")]);
                products.insert(name.to_string(), ProductConfig { daily: None, season_max: Some(format!("{name}.json").into()) });
            }
            let r = cfg.return_period;
            let (rv_ref, rv_model) = sc.truth_return_values(r).map_err(data)?;
            write_text(&dir.join("truth_reference.csv"), truth_csv(&sc.grid, &sc.truth_reference, &rv_ref, r).as_bytes())?;
            write_text(&dir.join("truth_model.csv"), truth_csv(&sc.grid, &sc.truth_model, &rv_model, r).as_bytes())?;
            out.extend(["truth_reference.csv", "truth_model.csv"].map(String::from));
        }
    }

    let stations = high_quality_filter(&sc.stations, cfg.thresholds.completeness);
    let p_a1 = build_a1_mask(&sc.grid, &stations, cfg.land_threshold(), 1).summary().p_cs;
    let mut approaches = vec!["A1".to_string(), "A2".to_string()];
    let mut subsample = None;
    if p_a1.is_finite() && p_a1 > 0.0 {
        approaches.push("A3-elevation".into());
        approaches.push("A3-subsample".into());
        subsample = Some(SubsampleConfig { target_proportion: 0.5 * p_a1, region: None });
    }
    let pipeline = PipelineConfig {
        out_dir: PathBuf::from(".."),
        seed: sc.spec.seed,
        return_period: cfg.return_period,
        bootstrap: cfg.bootstrap,
        thresholds: cfg.thresholds,
        products,
        target_grid: Some("grid.json".into()),
        stations: Some("stations.csv".into()),
        elevation: Some("elevation.csv".into()),
        gmt: Some("gmt.csv".into()),
        gmt_baseline: None,
        regions: Some("regions.json".into()),
        fit: cfg.fit,
        mask: MaskConfig { min_stations: 1, subsample },
        evaluate: EvaluateConfig { approaches, ..cfg.evaluate.clone() },
        scenario: None,
    };
    write_text(&dir.join("pipeline.json"), (serde_json::to_string_pretty(&pipeline)? + "\n").as_bytes())?;
    out.push("pipeline.json".into());
    Ok(out)
}
