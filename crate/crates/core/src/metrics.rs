//! Extreme bias, centered Taylor statistics and the modified skill score
//! over masked regions.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::Region;
use crate::sampling::CellMask;
use crate::uncertainty::{basic_ci, Interval, MIN_CI_REPLICATES};

/// Fewest cells for which pattern statistics are reported.
pub const MIN_TAYLOR_CELLS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Area,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasMode {
    /// Mean of `model - reference`; positive means the model is too wet.
    #[default]
    Signed,
    /// Mean of `|model - reference|`.
    Absolute,
}

/// `(weight, model, reference)` for cells included in `mask` and `region`
/// with finite values in both fields.
fn paired_cells(model: &[f64], reference: &[f64], mask: &CellMask, region: Option<&Region>, weighting: Weighting) -> Result<Vec<(f64, f64, f64)>> {
    let n = mask.grid().n_cells();
    if model.len() != n || reference.len() != n {
        return Err(Error::Input(format!("fields must have {n} cells to match the mask grid")));
    }
    let area = match weighting {
        Weighting::Area => mask.grid().area_weights(),
        Weighting::Uniform => vec![1.0; n],
    };
    Ok((0..n)
        .filter(|&i| mask.is_included(i) && region.is_none_or(|r| r.contains(i)))
        .filter(|&i| model[i].is_finite() && reference[i].is_finite())
        .map(|i| (area[i], model[i], reference[i]))
        .collect())
}

fn bias_of(cells: &[(f64, f64, f64)], mode: BiasMode) -> f64 {
    let sw: f64 = cells.iter().map(|c| c.0).sum();
    let d = |m: f64, r: f64| match mode {
        BiasMode::Signed => m - r,
        BiasMode::Absolute => (m - r).abs(),
    };
    cells.iter().map(|&(w, m, r)| w * d(m, r)).sum::<f64>() / sw
}

/// Weighted mean difference over the mask.
pub fn extreme_bias(model: &[f64], reference: &[f64], mask: &CellMask, weighting: Weighting, mode: BiasMode) -> Result<f64> {
    region_bias(model, reference, mask, None, weighting, mode)
}

fn region_bias(model: &[f64], reference: &[f64], mask: &CellMask, region: Option<&Region>, weighting: Weighting, mode: BiasMode) -> Result<f64> {
    let cells = paired_cells(model, reference, mask, region, weighting)?;
    if cells.is_empty() {
        return Err(Error::RegionSkipped(format!(
            "no {} cell with values in both fields",
            mask.provenance()
        )));
    }
    Ok(bias_of(&cells, mode))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorStats {
    pub r: f64,
    pub s_model: f64,
    pub s_ref: f64,
    /// `s_model / s_ref`.
    pub ratio: f64,
    pub skill: f64,
    /// Model field constant on the mask: `r` is undefined and `ratio` is 0.
    pub model_constant: bool,
}

/// Modified skill score from the pattern correlation and `s_model / s_ref`.
pub fn skill_score(r: f64, ratio: f64) -> f64 {
    (-(1.0 + ratio * ratio - 2.0 * ratio * r) / (2.0 * ratio)).exp()
}

fn taylor_of(cells: &[(f64, f64, f64)]) -> Result<TaylorStats> {
    if cells.len() < MIN_TAYLOR_CELLS {
        return Err(Error::InsufficientData { got: cells.len(), need: MIN_TAYLOR_CELLS });
    }
    let sw: f64 = cells.iter().map(|c| c.0).sum();
    let mm = cells.iter().map(|&(w, m, _)| w * m).sum::<f64>() / sw;
    let mr = cells.iter().map(|&(w, _, r)| w * r).sum::<f64>() / sw;
    let (mut vm, mut vr, mut cov) = (0.0, 0.0, 0.0);
    for &(w, m, r) in cells {
        let (dm, dr) = (m - mm, r - mr);
        vm += w * dm * dm;
        vr += w * dr * dr;
        cov += w * dm * dr;
    }
    let s_model = (vm / sw).sqrt();
    let s_ref = (vr / sw).sqrt();
    let scale = |k: usize| cells.iter().map(|c| if k == 1 { c.1.abs() } else { c.2.abs() }).fold(0.0, f64::max);
    // spread at rounding level of the values counts as constant
    if s_ref <= 1e-13 * scale(2) {
        return Err(Error::UndefinedCorrelation("reference field is constant on the mask".into()));
    }
    if s_model <= 1e-13 * scale(1) {
        return Ok(TaylorStats { r: f64::NAN, s_model: 0.0, s_ref, ratio: 0.0, skill: 0.0, model_constant: true });
    }
    let r = (cov / sw / (s_model * s_ref)).clamp(-1.0, 1.0);
    let ratio = s_model / s_ref;
    Ok(TaylorStats { r, s_model, s_ref, ratio, skill: skill_score(r, ratio), model_constant: false })
}

/// Weighted centered pattern statistics over the mask.
pub fn taylor_stats(model: &[f64], reference: &[f64], mask: &CellMask, weighting: Weighting) -> Result<TaylorStats> {
    taylor_of(&paired_cells(model, reference, mask, None, weighting)?)
}

/// Polar plot record: radius is the deviation ratio, angle is `acos r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorPoint {
    pub radius: f64,
    pub angle_rad: f64,
    pub skill: f64,
}

pub fn taylor_coordinates(stats: &TaylorStats) -> TaylorPoint {
    TaylorPoint { radius: stats.ratio, angle_rad: stats.r.clamp(-1.0, 1.0).acos(), skill: stats.skill }
}

/// One comparison protocol: a label and its mask.
#[derive(Debug, Clone)]
pub struct Approach {
    pub name: String,
    pub mask: CellMask,
}

/// Paired replicate fields: entry `b` of both sides comes from the same
/// year resample. `None` marks a failed replicate.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapFields<'a> {
    pub model: &'a [Option<Vec<f64>>],
    pub reference: &'a [Option<Vec<f64>>],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub level: f64,
    pub weighting: Weighting,
    pub bias_mode: BiasMode,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { level: 0.95, weighting: Weighting::Area, bias_mode: BiasMode::Signed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub region: String,
    pub approach: String,
    /// NaN when the region was skipped.
    pub bias: f64,
    pub bias_ci: Option<Interval>,
    pub taylor: Option<TaylorStats>,
    /// Cells with values in both fields.
    pub n_cells: usize,
    pub mask_size: usize,
    pub note: Option<String>,
}

/// `approach - baseline` bias with its paired basic interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasChange {
    pub region: String,
    pub approach: String,
    pub baseline: String,
    pub delta: f64,
    pub ci: Option<Interval>,
    pub n_replicates: usize,
}

/// Per-replicate biases of one (region, approach); NaN marks a failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateBiases {
    pub region: String,
    pub approach: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Comparison {
    pub reports: Vec<EvalReport>,
    pub changes: Vec<BiasChange>,
    pub replicate_biases: Vec<ReplicateBiases>,
}

/// Per-replicate biases of one (region, approach); NaN where the replicate
/// failed or left the region without data.
fn replicate_biases(boot: &BootstrapFields<'_>, mask: &CellMask, region: &Region, opts: &CompareOptions) -> Vec<f64> {
    boot.model
        .iter()
        .zip(boot.reference)
        .map(|(m, r)| match (m, r) {
            (Some(m), Some(r)) => region_bias(m, r, mask, Some(region), opts.weighting, opts.bias_mode).unwrap_or(f64::NAN),
            _ => f64::NAN,
        })
        .collect()
}

/// Bias and Taylor reports for every (region, approach), plus changes in
/// bias of every other approach relative to `baseline`.
pub fn compare_approaches(
    model: &[f64],
    reference: &[f64],
    approaches: &[Approach],
    baseline: &str,
    regions: &[Region],
    boot: Option<BootstrapFields<'_>>,
    opts: &CompareOptions,
) -> Result<Comparison> {
    let base_idx = approaches
        .iter()
        .position(|a| a.name == baseline)
        .ok_or_else(|| Error::Input(format!("baseline approach {baseline:?} not among the approaches")))?;
    if let Some(a) = approaches.iter().find(|a| !a.mask.grid().same_geometry(approaches[0].mask.grid())) {
        return Err(Error::Input(format!("mask for {} is on a different grid", a.name)));
    }
    if let Some(b) = &boot {
        if b.model.len() != b.reference.len() {
            return Err(Error::Input("model and reference replicate counts differ".into()));
        }
    }
    let mut out = Comparison::default();
    for region in regions {
        let mut reps: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut points = vec![f64::NAN; approaches.len()];
        for (k, a) in approaches.iter().enumerate() {
            let cells = paired_cells(model, reference, &a.mask, Some(region), opts.weighting)?;
            let mask_size = (0..region.cells().len()).filter(|&i| a.mask.is_included(i) && region.contains(i)).count();
            let mut report = EvalReport {
                region: region.id.clone(),
                approach: a.name.clone(),
                bias: f64::NAN,
                bias_ci: None,
                taylor: None,
                n_cells: cells.len(),
                mask_size,
                note: None,
            };
            if cells.is_empty() {
                report.note = Some("region skipped: no cells".into());
                out.reports.push(report);
                continue;
            }
            report.bias = bias_of(&cells, opts.bias_mode);
            points[k] = report.bias;
            match taylor_of(&cells) {
                Ok(t) => report.taylor = Some(t),
                Err(e) => report.note = Some(e.to_string()),
            }
            if let Some(b) = &boot {
                let rb = replicate_biases(b, &a.mask, region, opts);
                report.bias_ci = basic_ci(report.bias, &rb, opts.level).ok();
                out.replicate_biases.push(ReplicateBiases {
                    region: region.id.clone(),
                    approach: a.name.clone(),
                    values: rb.clone(),
                });
                reps.insert(k, rb);
            }
            out.reports.push(report);
        }
        for (k, a) in approaches.iter().enumerate() {
            if k == base_idx || points[k].is_nan() || points[base_idx].is_nan() {
                continue;
            }
            let delta = points[k] - points[base_idx];
            let (ci, n_replicates) = match (reps.get(&k), reps.get(&base_idx)) {
                (Some(x), Some(y)) => {
                    let d: Vec<f64> = x.iter().zip(y).map(|(x, y)| x - y).collect();
                    let n = d.iter().filter(|v| v.is_finite()).count();
                    (if n >= MIN_CI_REPLICATES { basic_ci(delta, &d, opts.level).ok() } else { None }, n)
                }
                _ => (None, 0),
            };
            out.changes.push(BiasChange {
                region: region.id.clone(),
                approach: a.name.clone(),
                baseline: baseline.to_string(),
                delta,
                ci,
                n_replicates,
            });
        }
    }
    Ok(out)
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// CSV `region,approach,bias_mm,bias_lo,bias_hi,r,ratio,skill,n_cells`.
pub fn write_report_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region", "approach", "bias_mm", "bias_lo", "bias_hi", "r", "ratio", "skill", "n_cells"])?;
    for r in reports {
        let ci = r.bias_ci.unwrap_or(Interval { lo: f64::NAN, hi: f64::NAN });
        let t = r.taylor.map_or([f64::NAN; 3], |t| [t.r, t.ratio, t.skill]);
        w.write_record([
            r.region.clone(),
            r.approach.clone(),
            num(r.bias),
            num(ci.lo),
            num(ci.hi),
            num(t[0]),
            num(t[1]),
            num(t[2]),
            r.n_cells.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `region,approach,radius,angle_rad,skill`; reports without pattern
/// statistics are omitted.
pub fn write_taylor_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region", "approach", "radius", "angle_rad", "skill"])?;
    for r in reports {
        if let Some(t) = &r.taylor {
            let p = taylor_coordinates(t);
            w.write_record([r.region.clone(), r.approach.clone(), num(p.radius), num(p.angle_rad), num(p.skill)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// CSV `region,approach,baseline,delta_mm,delta_lo,delta_hi,n_replicates`.
pub fn write_change_csv<W: Write>(changes: &[BiasChange], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["region", "approach", "baseline", "delta_mm", "delta_lo", "delta_hi", "n_replicates"])?;
    for c in changes {
        let ci = c.ci.unwrap_or(Interval { lo: f64::NAN, hi: f64::NAN });
        w.write_record([
            c.region.clone(),
            c.approach.clone(),
            c.baseline.clone(),
            num(c.delta),
            num(ci.lo),
            num(ci.hi),
            c.n_replicates.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `replicate,statistic_name,value` with statistics named
/// `bias:<region>:<approach>`.
pub fn write_replicate_csv<W: Write>(reps: &[ReplicateBiases], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replicate", "statistic_name", "value"])?;
    for r in reps {
        let name = format!("bias:{}:{}", r.region, r.approach);
        for (b, v) in r.values.iter().enumerate() {
            w.write_record([b.to_string(), name.clone(), num(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}
