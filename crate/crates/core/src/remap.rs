//! First-order conservative remapping between regular lat-lon grids.
//!
//! Overlap weights are exact spherical areas of the intersection rectangles
//! on the unit sphere. Only daily fields are remappable: block maxima must be
//! taken after the data are on the target grid.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::DailyField;
use crate::grid::RegularGrid;

/// Default minimum fraction of a target cell that must be covered by
/// non-missing source data.
pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.5;

/// Sparse source-to-target overlap table.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapPlan {
    source: RegularGrid,
    target: RegularGrid,
    /// Per target cell: `(source cell, overlap area)`, ascending source index.
    entries: Vec<Vec<(usize, f64)>>,
    target_area: Vec<f64>,
}

impl RemapPlan {
    pub fn source(&self) -> &RegularGrid {
        &self.source
    }

    pub fn target(&self) -> &RegularGrid {
        &self.target
    }

    /// Raw overlap areas for one target cell.
    pub fn overlaps(&self, target_cell: usize) -> &[(usize, f64)] {
        &self.entries[target_cell]
    }

    /// Overlap weights normalized to sum to one over the contributing sources.
    pub fn weights(&self, target_cell: usize) -> Vec<(usize, f64)> {
        let e = &self.entries[target_cell];
        let total: f64 = e.iter().map(|(_, w)| w).sum();
        e.iter().map(|&(s, w)| (s, w / total)).collect()
    }

    /// Fraction of each target cell's area lying inside the source domain.
    pub fn coverage(&self) -> Vec<f64> {
        self.entries
            .iter()
            .zip(&self.target_area)
            .map(|(e, a)| e.iter().map(|(_, w)| w).sum::<f64>() / a)
            .collect()
    }

    /// CSV `target_row,target_col,source_row,source_col,weight` with
    /// normalized weights.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["target_row", "target_col", "source_row", "source_col", "weight"])?;
        for t in 0..self.target.n_cells() {
            let tc = self.target.cell(t);
            for (s, wt) in self.weights(t) {
                let sc = self.source.cell(s);
                w.write_record([
                    tc.row.to_string(),
                    tc.col.to_string(),
                    sc.row.to_string(),
                    sc.col.to_string(),
                    format!("{wt:.17e}"),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Overlap extents between two sorted edge lists: `(target bin, source bin, extent)`.
fn axis_overlaps(target: &[f64], source: &[f64], extent: impl Fn(f64, f64) -> f64) -> Vec<Vec<(usize, f64)>> {
    let mut out = vec![Vec::new(); target.len() - 1];
    let mut j0 = 0;
    for (i, slot) in out.iter_mut().enumerate() {
        let (lo, hi) = (target[i], target[i + 1]);
        while j0 + 1 < source.len() && source[j0 + 1] <= lo {
            j0 += 1;
        }
        let mut j = j0;
        while j + 1 < source.len() && source[j] < hi {
            let a = lo.max(source[j]);
            let b = hi.min(source[j + 1]);
            if a < b {
                let e = extent(a, b);
                if e > 0.0 {
                    slot.push((j, e));
                }
            }
            j += 1;
        }
    }
    out
}

/// Build the area-overlap plan from `source` to `target`.
pub fn build_plan(source: &RegularGrid, target: &RegularGrid) -> Result<RemapPlan> {
    let lat = axis_overlaps(target.lat_edges(), source.lat_edges(), |a, b| {
        b.to_radians().sin() - a.to_radians().sin()
    });
    let lon = axis_overlaps(target.lon_edges(), source.lon_edges(), |a, b| (b - a).to_radians());
    let snlon = source.nlon();
    let mut entries = Vec::with_capacity(target.n_cells());
    for lat_row in &lat {
        for lon_col in &lon {
            let mut e = Vec::with_capacity(lat_row.len() * lon_col.len());
            for &(sr, dy) in lat_row {
                for &(sc, dx) in lon_col {
                    e.push((sr * snlon + sc, dy * dx));
                }
            }
            entries.push(e);
        }
    }
    if entries.iter().all(|e| e.is_empty()) {
        return Err(Error::Plan("source and target domains do not overlap".into()));
    }
    Ok(RemapPlan {
        source: source.clone(),
        target: target.clone(),
        entries,
        target_area: target.area_weights(),
    })
}

/// Remap a daily field. Missing sources are dropped and the remaining
/// weights renormalized; a target is missing when the non-missing source
/// area covers less than `coverage_threshold` of it.
pub fn apply(plan: &RemapPlan, field: &DailyField, coverage_threshold: f64) -> Result<DailyField> {
    if !field.grid().same_geometry(&plan.source) {
        return Err(Error::Plan("field is not on the plan's source grid".into()));
    }
    let nt = plan.target.n_cells();
    let days: Vec<Vec<f64>> = (0..field.n_days())
        .into_par_iter()
        .map(|d| {
            let src = field.day(d);
            (0..nt)
                .map(|t| {
                    let mut sw = 0.0;
                    let mut swv = 0.0;
                    let mut first = None;
                    let mut uniform = true;
                    for &(s, w) in &plan.entries[t] {
                        let v = src[s];
                        if !v.is_nan() {
                            sw += w;
                            swv += w * v;
                            uniform &= *first.get_or_insert(v) == v;
                        }
                    }
                    if sw <= 0.0 || sw / plan.target_area[t] < coverage_threshold {
                        f64::NAN
                    } else if uniform {
                        // Constant contributions map to themselves exactly.
                        first.unwrap_or(f64::NAN)
                    } else {
                        swv / sw
                    }
                })
                .collect()
        })
        .collect();
    DailyField::new(plan.target.clone(), field.start(), days.concat())
}
