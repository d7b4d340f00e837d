//! Pipeline configuration (JSON). Relative paths resolve against the
//! directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xtreval_core::extremes::FitOptions;
use xtreval_core::metrics::{BiasMode, Weighting};
use xtreval_core::synth::ScenarioSpec;
use xtreval_core::uncertainty::{DEFAULT_REPLICATES, MIN_CI_REPLICATES};

use crate::error::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_return_period")]
    pub return_period: f64,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Named products (e.g. `model`, `reference`) and their inputs.
    #[serde(default)]
    pub products: BTreeMap<String, ProductConfig>,
    #[serde(default)]
    pub target_grid: Option<PathBuf>,
    #[serde(default)]
    pub stations: Option<PathBuf>,
    #[serde(default)]
    pub elevation: Option<PathBuf>,
    #[serde(default)]
    pub gmt: Option<PathBuf>,
    /// Years averaged for the covariate mean; defaults to the GMT span.
    #[serde(default)]
    pub gmt_baseline: Option<[i32; 2]>,
    #[serde(default)]
    pub regions: Option<PathBuf>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub mask: MaskConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub scenario: Option<ScenarioSource>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_return_period() -> f64 {
    20.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { replicates: DEFAULT_REPLICATES, level: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub completeness: f64,
    pub coverage: f64,
    /// Minimum land fraction; 1 means fully land up to rounding.
    pub land: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { completeness: 0.90, coverage: 0.5, land: 1.0 }
    }
}

impl Thresholds {
    pub fn land_threshold(&self) -> f64 {
        self.land - 1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductConfig {
    /// Daily store header.
    #[serde(default)]
    pub daily: Option<PathBuf>,
    /// Season-maximum store header, bypassing `remap` and `rx5day`.
    #[serde(default)]
    pub season_max: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub require_remapped: bool,
    pub options: FitOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { require_remapped: true, options: FitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampleConfig {
    pub target_proportion: f64,
    /// Region whose land cells form the denominator; whole grid when absent.
    #[serde(default)]
    pub region: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskConfig {
    pub min_stations: u32,
    pub subsample: Option<SubsampleConfig>,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self { min_stations: 1, subsample: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub model: String,
    pub reference: String,
    pub approaches: Vec<String>,
    pub baseline: String,
    pub weighting: Weighting,
    pub bias_mode: BiasMode,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            model: "model".into(),
            reference: "reference".into(),
            approaches: vec!["A1".into(), "A2".into()],
            baseline: "A1".into(),
            weighting: Weighting::Area,
            bias_mode: BiasMode::Signed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    /// `"utah-like"`, `"kansas-like"` or a path to a scenario JSON file.
    Named(String),
    Inline(Box<ScenarioSpec>),
}

/// Mask file stem for an approach label.
pub fn approach_mask(name: &str) -> Option<&'static str> {
    match name {
        "A1" => Some("A1-station"),
        "A2" => Some("A2-all-land"),
        "A3-subsample" => Some("A3-subsample"),
        "A3-elevation" => Some("A3-elevation"),
        _ => None,
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        for p in self.products.values_mut() {
            p.daily.iter_mut().for_each(fix);
            p.season_max.iter_mut().for_each(fix);
        }
        for p in [&mut self.target_grid, &mut self.stations, &mut self.elevation, &mut self.gmt, &mut self.regions] {
            p.iter_mut().for_each(fix);
        }
        if let Some(ScenarioSource::Named(n)) = &mut self.scenario {
            if n != "utah-like" && n != "kansas-like" && Path::new(n).is_relative() {
                *n = base.join(&*n).to_string_lossy().into_owned();
            }
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::Config(m));
        if !(self.return_period.is_finite() && self.return_period > 1.0) {
            return bad(format!("return_period must exceed 1, got {}", self.return_period));
        }
        if self.bootstrap.replicates < MIN_CI_REPLICATES {
            return bad(format!("bootstrap.replicates must be at least {MIN_CI_REPLICATES}"));
        }
        if !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) {
            return bad("bootstrap.level must lie in (0, 1)".into());
        }
        let t = &self.thresholds;
        if ![t.completeness, t.coverage, t.land].iter().all(|v| (0.0..=1.0).contains(v)) {
            return bad("thresholds must lie in [0, 1]".into());
        }
        for (name, p) in &self.products {
            if p.daily.is_some() && p.season_max.is_some() {
                return bad(format!("product {name}: set daily or season_max, not both"));
            }
            for path in p.daily.iter().chain(&p.season_max) {
                require(path)?;
            }
        }
        for path in [&self.target_grid, &self.stations, &self.elevation, &self.gmt, &self.regions].into_iter().flatten() {
            require(path)?;
        }
        for a in &self.evaluate.approaches {
            if approach_mask(a).is_none() {
                return bad(format!("unknown approach {a:?}; expected A1, A2, A3-subsample or A3-elevation"));
            }
        }
        if !self.evaluate.approaches.contains(&self.evaluate.baseline) {
            return bad(format!("baseline {:?} is not among the approaches", self.evaluate.baseline));
        }
        Ok(())
    }

    pub fn land_threshold(&self) -> f64 {
        self.thresholds.land_threshold()
    }

    /// Required path-valued setting.
    pub fn need<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, Failure> {
        value.as_deref().ok_or_else(|| Failure::Config(format!("{key} is required for this stage")))
    }
}

fn require(path: &Path) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Config(format!("{} does not exist", path.display())))
    }
}
