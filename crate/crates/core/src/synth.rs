//! Synthetic scenarios and brute-force oracles.
//!
//! Every random draw comes from a counter-based stream keyed by
//! `(seed, stream, cell, replicate)`, so output is identical for any number
//! of worker threads.

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariate::CovariateSeries;
use crate::error::{Error, Result};
use crate::extremes::{return_value, GevParams};
use crate::field::{DailyField, ElevationField, StationRecord};
use crate::grid::{RegularGrid, FULL_LAND};
use crate::region::Region;
use crate::rng::job_rng;
use crate::seasonal::{rx5day_djf, smooth_gmt, SeasonMaxSeries, WINDOW_DAYS};
use crate::uncertainty::quantile_sorted;

const STREAM_REFERENCE: u64 = 1;
const STREAM_MODEL: u64 = 2;
const STREAM_STATIONS: u64 = 3;

/// Draw from the trend GEV by inverting its CDF at `u` in (0, 1).
pub fn gev_sample(params: &GevParams, x: f64, u: f64) -> f64 {
    params.quantile(u, x)
}

/// Exhaustive maximum over all complete 5-day windows without a missing day.
pub fn brute_force_rx5day(daily: &[f64]) -> Result<f64> {
    if daily.len() < WINDOW_DAYS {
        return Err(Error::InsufficientData { got: daily.len(), need: WINDOW_DAYS });
    }
    daily
        .windows(WINDOW_DAYS)
        .filter(|w| w.iter().all(|v| !v.is_nan()))
        .map(|w| w.iter().sum::<f64>())
        .reduce(f64::max)
        .ok_or_else(|| Error::Input("every 5-day window has a missing day".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lat: [f64; 2],
    pub nlat: usize,
    pub lon: [f64; 2],
    pub nlon: usize,
}

/// Mean elevation: `base + ridge * exp(-((lon - ridge_lon) / ridge_width)^2) + lat_slope * (lat - lat0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElevationSpec {
    pub base_m: f64,
    #[serde(default)]
    pub ridge_m: f64,
    #[serde(default)]
    pub ridge_lon: f64,
    #[serde(default = "one")]
    pub ridge_width_deg: f64,
    #[serde(default)]
    pub lat_slope_m_per_deg: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSpec {
    /// Probability that an eligible land cell holds a station.
    pub density: f64,
    /// Only cells strictly below this percentile of land elevation are eligible.
    #[serde(default)]
    pub max_elevation_percentile: Option<f64>,
    #[serde(default = "default_completeness")]
    pub completeness: f64,
    /// Extra stations with completeness 0.5, placed anywhere on land.
    #[serde(default)]
    pub low_quality_fraction: f64,
}

fn default_completeness() -> f64 {
    0.97
}

/// Reference parameters per cell: `mu0 + mu0_per_km * z`, `sigma + sigma_per_km * z`
/// with `z` the cell elevation in km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    pub mu0: f64,
    #[serde(default)]
    pub mu0_per_km: f64,
    #[serde(default)]
    pub mu1: f64,
    pub sigma: f64,
    #[serde(default)]
    pub sigma_per_km: f64,
    pub xi: f64,
}

/// Model departures: `mu0 + offset_mm + mu0_per_km * max(0, z - link_start_km)`, `sigma * sigma_factor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub offset_mm: f64,
    #[serde(default)]
    pub mu0_per_km: f64,
    #[serde(default)]
    pub link_start_km: f64,
    #[serde(default = "one")]
    pub sigma_factor: f64,
    #[serde(default = "one_usize")]
    pub replicates: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProcessSpec {
    /// Season maxima drawn directly from the cell GEV.
    Gev,
    /// Bernoulli wet days with gamma amounts; maxima via Rx5Day. The gamma
    /// scale is `scale_mm * (1 + scale_per_km * z)`, times
    /// `1 + model_scale_per_km * max(0, z - link_start_km)` for the model.
    Daily {
        wet_prob: f64,
        gamma_shape: f64,
        scale_mm: f64,
        #[serde(default)]
        scale_per_km: f64,
        #[serde(default)]
        model_scale_per_km: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub grid: GridSpec,
    /// First and last season year (inclusive).
    pub years: [i32; 2],
    #[serde(default)]
    pub gmt_slope_k_per_year: f64,
    pub elevation: ElevationSpec,
    pub stations: StationSpec,
    pub truth: TruthSpec,
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default = "default_process")]
    pub process: ProcessSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_model() -> ModelSpec {
    ModelSpec { offset_mm: 0.0, mu0_per_km: 0.0, link_start_km: 0.0, sigma_factor: 1.0, replicates: 1 }
}

fn default_process() -> ProcessSpec {
    ProcessSpec::Gev
}

impl ScenarioSpec {
    /// Orographic domain: a north-south ridge, stations only in the lower
    /// 60% of terrain, and a model too dry above 1.5 km.
    pub fn utah_like() -> Self {
        Self {
            name: "utah-like".into(),
            grid: GridSpec { lat: [37.0, 42.0], nlat: 10, lon: [-114.0, -108.0], nlon: 12 },
            years: [1951, 2014],
            gmt_slope_k_per_year: 0.012,
            elevation: ElevationSpec {
                base_m: 1300.0,
                ridge_m: 1800.0,
                ridge_lon: -111.25,
                ridge_width_deg: 1.3,
                lat_slope_m_per_deg: 25.0,
            },
            stations: StationSpec {
                density: 0.6,
                max_elevation_percentile: Some(60.0),
                completeness: 0.97,
                low_quality_fraction: 0.2,
            },
            truth: TruthSpec { mu0: 25.0, mu0_per_km: 14.0, mu1: 2.0, sigma: 7.0, sigma_per_km: 2.5, xi: 0.1 },
            model: ModelSpec { offset_mm: 1.0, mu0_per_km: -16.0, link_start_km: 1.5, sigma_factor: 1.0, replicates: 1 },
            process: ProcessSpec::Gev,
            seed: 20_240_601,
        }
    }

    /// Homogeneous plains: flat terrain, dense unbiased stations and a
    /// spatially uniform model offset.
    pub fn kansas_like() -> Self {
        Self {
            name: "kansas-like".into(),
            grid: GridSpec { lat: [37.0, 40.0], nlat: 6, lon: [-102.0, -95.0], nlon: 14 },
            years: [1951, 2014],
            gmt_slope_k_per_year: 0.012,
            elevation: ElevationSpec {
                base_m: 450.0,
                ridge_m: 0.0,
                ridge_lon: 0.0,
                ridge_width_deg: 1.0,
                lat_slope_m_per_deg: 0.0,
            },
            stations: StationSpec {
                density: 0.84,
                max_elevation_percentile: None,
                completeness: 0.97,
                low_quality_fraction: 0.2,
            },
            truth: TruthSpec { mu0: 40.0, mu0_per_km: 0.0, mu1: 2.0, sigma: 11.0, sigma_per_km: 0.0, xi: 0.1 },
            model: ModelSpec { offset_mm: 3.0, mu0_per_km: 0.0, link_start_km: 0.0, sigma_factor: 1.0, replicates: 1 },
            process: ProcessSpec::Gev,
            seed: 20_240_602,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Scenario(format!("{}: {m}", self.name)));
        if self.grid.nlat == 0 || self.grid.nlon == 0 {
            return bad("grid needs at least one cell");
        }
        if self.years[1] < self.years[0] {
            return bad("last year precedes first year");
        }
        if !(0.0..=1.0).contains(&self.stations.density) || !(0.0..=1.0).contains(&self.stations.low_quality_fraction) {
            return bad("station density and low-quality fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.stations.completeness) {
            return bad("station completeness must lie in [0, 1]");
        }
        if self.stations.max_elevation_percentile.is_some_and(|p| !(p > 0.0 && p <= 100.0)) {
            return bad("elevation percentile must lie in (0, 100]");
        }
        if self.elevation.ridge_width_deg <= 0.0 {
            return bad("ridge width must be positive");
        }
        if self.model.replicates == 0 {
            return bad("model needs at least one replicate");
        }
        if !(self.model.sigma_factor > 0.0) {
            return bad("model sigma factor must be positive");
        }
        if let ProcessSpec::Daily { wet_prob, gamma_shape, scale_mm, .. } = self.process {
            if !(wet_prob > 0.0 && wet_prob <= 1.0) || !(gamma_shape > 0.0) || !(scale_mm > 0.0) {
                return bad("daily process needs wet_prob in (0, 1], positive shape and scale");
            }
        }
        Ok(())
    }
}

/// Everything a scenario produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub grid: RegularGrid,
    pub elevation: ElevationField,
    pub stations: Vec<StationRecord>,
    /// Raw (unsmoothed) anomalies, one per season year.
    pub gmt_years: Vec<i32>,
    pub gmt_anomaly: Vec<f64>,
    pub covariate: CovariateSeries,
    pub reference: SeasonMaxSeries,
    pub model: SeasonMaxSeries,
    pub reference_daily: Option<DailyField>,
    pub model_daily: Option<DailyField>,
    /// Per-cell GEV truth; empty for the daily process.
    pub truth_reference: Vec<GevParams>,
    pub truth_model: Vec<GevParams>,
    pub regions: Vec<Region>,
}

impl Scenario {
    /// Return values of the truth fields at the covariate baseline mean.
    pub fn truth_return_values(&self, r: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let xbar = self.covariate.xbar();
        let rv = |p: &[GevParams]| p.iter().map(|p| return_value(p, r, xbar)).collect::<Result<Vec<_>>>();
        Ok((rv(&self.truth_reference)?, rv(&self.truth_model)?))
    }
}

fn elevation_field(spec: &ScenarioSpec, grid: &RegularGrid) -> Vec<f64> {
    let e = &spec.elevation;
    grid.cells()
        .map(|c| {
            let (lat, lon) = grid.center(c);
            let d = (lon - e.ridge_lon) / e.ridge_width_deg;
            e.base_m + e.ridge_m * (-d * d).exp() + e.lat_slope_m_per_deg * (lat - spec.grid.lat[0])
        })
        .collect()
}

fn place_stations(spec: &ScenarioSpec, grid: &RegularGrid, elev: &[f64]) -> Result<Vec<StationRecord>> {
    let land: Vec<usize> = (0..grid.n_cells()).filter(|&i| grid.is_land(i, FULL_LAND)).collect();
    let cutoff = match spec.stations.max_elevation_percentile {
        Some(p) => {
            let mut z: Vec<f64> = land.iter().map(|&i| elev[i]).collect();
            z.sort_by(f64::total_cmp);
            if z.is_empty() { f64::INFINITY } else { quantile_sorted(&z, p / 100.0) }
        }
        None => f64::INFINITY,
    };
    let mut out = Vec::new();
    for &i in &land {
        let mut rng = job_rng(spec.seed, &[STREAM_STATIONS, i as u64]);
        let c = grid.cell(i);
        let (lat0, lat1) = grid.lat_bounds(c.row);
        let (lon0, lon1) = grid.lon_bounds(c.col);
        let interior = |rng: &mut rand_chacha::ChaCha8Rng| {
            let a: f64 = rng.random_range(0.05..0.95);
            let b: f64 = rng.random_range(0.05..0.95);
            (lat0 + a * (lat1 - lat0), lon0 + b * (lon1 - lon0))
        };
        if elev[i] < cutoff && rng.random::<f64>() < spec.stations.density {
            let (lat, lon) = interior(&mut rng);
            out.push(StationRecord::new(format!("S{i:05}"), lat, lon, elev[i], spec.stations.completeness)?);
        }
        if rng.random::<f64>() < spec.stations.low_quality_fraction {
            let (lat, lon) = interior(&mut rng);
            out.push(StationRecord::new(format!("L{i:05}"), lat, lon, elev[i], 0.5)?);
        }
    }
    Ok(out)
}

fn truth_fields(spec: &ScenarioSpec, elev: &[f64]) -> Result<(Vec<GevParams>, Vec<GevParams>)> {
    let t = &spec.truth;
    let m = &spec.model;
    let mut reference = Vec::with_capacity(elev.len());
    let mut model = Vec::with_capacity(elev.len());
    for &z in elev {
        let km = z / 1000.0;
        let sigma = t.sigma + t.sigma_per_km * km;
        let r = GevParams::new(t.mu0 + t.mu0_per_km * km, t.mu1, sigma, t.xi)
            .map_err(|e| Error::Scenario(format!("{}: reference truth invalid at {z} m: {e}", spec.name)))?;
        let shift = m.offset_mm + m.mu0_per_km * (km - m.link_start_km).max(0.0);
        let p = GevParams::new(r.mu0 + shift, t.mu1, sigma * m.sigma_factor, t.xi)
            .map_err(|e| Error::Scenario(format!("{}: model truth invalid at {z} m: {e}", spec.name)))?;
        reference.push(r);
        model.push(p);
    }
    Ok((reference, model))
}

/// Season maxima `[year][replicate][cell]` drawn directly from `truth`.
fn gev_series(
    grid: &RegularGrid,
    years: &[i32],
    x: &[f64],
    truth: &[GevParams],
    replicates: usize,
    seed: u64,
    stream: u64,
) -> Result<SeasonMaxSeries> {
    let n = grid.n_cells();
    let per_cell: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|c| {
            let mut v = Vec::with_capacity(years.len() * replicates);
            for r in 0..replicates {
                let mut rng = job_rng(seed, &[stream, c as u64, r as u64]);
                for &xt in x {
                    let u: f64 = rng.sample(Open01);
                    v.push(gev_sample(&truth[c], xt, u));
                }
            }
            v
        })
        .collect();
    let ny = years.len();
    let mut values = vec![0.0; ny * replicates * n];
    for (c, v) in per_cell.iter().enumerate() {
        for r in 0..replicates {
            for y in 0..ny {
                values[(y * replicates + r) * n + c] = v[r * ny + y];
            }
        }
    }
    SeasonMaxSeries::new(grid.clone(), years.to_vec(), replicates, values)
}

/// Daily rain from 1 December before the first season to the last day of
/// February of the last season.
fn daily_field(grid: &RegularGrid, years: [i32; 2], scale: &[f64], wet_prob: f64, shape: f64, seed: u64, stream: u64) -> Result<DailyField> {
    let start = NaiveDate::from_ymd_opt(years[0] - 1, 12, 1).ok_or_else(|| Error::Scenario("year out of range".into()))?;
    let end = NaiveDate::from_ymd_opt(years[1], 3, 1).ok_or_else(|| Error::Scenario("year out of range".into()))?;
    let n_days = (end - start).num_days() as usize;
    let n = grid.n_cells();
    let per_cell: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|c| {
            let mut rng = job_rng(seed, &[stream, c as u64]);
            let g = Gamma::new(shape, scale[c]).expect("validated gamma parameters");
            (0..n_days)
                .map(|_| if rng.random::<f64>() < wet_prob { g.sample(&mut rng) } else { 0.0 })
                .collect()
        })
        .collect();
    let mut values = vec![0.0; n_days * n];
    for (c, v) in per_cell.iter().enumerate() {
        for (d, x) in v.iter().enumerate() {
            values[d * n + c] = *x;
        }
    }
    DailyField::new(grid.clone(), start, values)
}

/// Build every artifact of `spec`.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let g = &spec.grid;
    let grid = RegularGrid::uniform((g.lat[0], g.lat[1]), g.nlat, (g.lon[0], g.lon[1]), g.nlon)?;
    let elev = elevation_field(spec, &grid);
    let elevation = ElevationField::new(grid.clone(), elev.clone(), FULL_LAND)?;
    let stations = place_stations(spec, &grid, &elev)?;

    let years: Vec<i32> = (spec.years[0]..=spec.years[1]).collect();
    let mid = 0.5 * (spec.years[0] + spec.years[1]) as f64;
    let gmt_anomaly: Vec<f64> = years.iter().map(|&y| spec.gmt_slope_k_per_year * (y as f64 - mid)).collect();
    let covariate = smooth_gmt(&years, &gmt_anomaly, (spec.years[0], spec.years[1]))?;
    let x: Vec<f64> = years.iter().map(|&y| covariate.value(y).expect("covariate spans the season years")).collect();

    let (mut truth_reference, mut truth_model) = truth_fields(spec, &elev)?;
    let (reference, model, reference_daily, model_daily) = match spec.process {
        ProcessSpec::Gev => {
            let r = gev_series(&grid, &years, &x, &truth_reference, 1, spec.seed, STREAM_REFERENCE)?;
            let m = gev_series(&grid, &years, &x, &truth_model, spec.model.replicates, spec.seed, STREAM_MODEL)?;
            (r, m, None, None)
        }
        ProcessSpec::Daily { wet_prob, gamma_shape, scale_mm, scale_per_km, model_scale_per_km } => {
            let ref_scale: Vec<f64> = elev.iter().map(|z| scale_mm * (1.0 + scale_per_km * z / 1000.0)).collect();
            let model_scale: Vec<f64> = elev
                .iter()
                .zip(&ref_scale)
                .map(|(z, s)| s * spec.model.sigma_factor * (1.0 + model_scale_per_km * (z / 1000.0 - spec.model.link_start_km).max(0.0)))
                .collect();
            if ref_scale.iter().chain(&model_scale).any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(Error::Scenario(format!("{}: gamma scale must stay positive", spec.name)));
            }
            let rd = daily_field(&grid, spec.years, &ref_scale, wet_prob, gamma_shape, spec.seed, STREAM_REFERENCE)?;
            let md = daily_field(&grid, spec.years, &model_scale, wet_prob, gamma_shape, spec.seed, STREAM_MODEL)?;
            truth_reference.clear();
            truth_model.clear();
            (rx5day_djf(&rd)?, rx5day_djf(&md)?, Some(rd), Some(md))
        }
    };
    let regions = vec![Region::whole(&grid, "domain")];
    Ok(Scenario {
        spec: spec.clone(),
        grid,
        elevation,
        stations,
        gmt_years: years,
        gmt_anomaly,
        covariate,
        reference,
        model,
        reference_daily,
        model_daily,
        truth_reference,
        truth_model,
        regions,
    })
}
