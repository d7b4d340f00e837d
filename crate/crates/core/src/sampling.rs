//! Station-derived grid-cell masks for the comparison protocols.
//!
//! Every mask carries a domain (the region it was built for); `N_c` counts
//! land cells inside the domain and `N_{c+s}` the included ones.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ElevationField, StationRecord};
use crate::grid::RegularGrid;
use crate::region::Region;
use crate::rng::job_rng;

pub const DEFAULT_COMPLETENESS: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "A1-station")]
    A1Station,
    #[serde(rename = "A2-all-land")]
    A2AllLand,
    #[serde(rename = "A3-subsample")]
    A3Subsample,
    #[serde(rename = "A3-elevation")]
    A3Elevation,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::A1Station => "A1-station",
            Self::A2AllLand => "A2-all-land",
            Self::A3Subsample => "A3-subsample",
            Self::A3Elevation => "A3-elevation",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A1-station" => Ok(Self::A1Station),
            "A2-all-land" => Ok(Self::A2AllLand),
            "A3-subsample" => Ok(Self::A3Subsample),
            "A3-elevation" => Ok(Self::A3Elevation),
            other => Err(Error::Schema(format!("unknown mask provenance {other:?}"))),
        }
    }
}

/// Included cells are always land cells inside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMask {
    grid: RegularGrid,
    land: Vec<bool>,
    domain: Vec<bool>,
    included: Vec<bool>,
    station_count: Vec<u32>,
    provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSummary {
    pub n_c: usize,
    pub n_cs: usize,
    pub p_cs: f64,
}

impl CellMask {
    /// Assemble a mask; `included` is intersected with land and domain.
    pub fn from_parts(
        grid: RegularGrid,
        land: Vec<bool>,
        domain: Vec<bool>,
        included: Vec<bool>,
        station_count: Vec<u32>,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = grid.n_cells();
        if [land.len(), domain.len(), included.len(), station_count.len()].iter().any(|&l| l != n) {
            return Err(Error::Input(format!("mask arrays must have {n} entries")));
        }
        let included = (0..n).map(|i| included[i] && land[i] && domain[i]).collect();
        Ok(Self { grid, land, domain, included, station_count, provenance })
    }

    pub fn grid(&self) -> &RegularGrid {
        &self.grid
    }

    pub fn included(&self) -> &[bool] {
        &self.included
    }

    pub fn is_included(&self, idx: usize) -> bool {
        self.included[idx]
    }

    pub fn land(&self) -> &[bool] {
        &self.land
    }

    pub fn domain(&self) -> &[bool] {
        &self.domain
    }

    pub fn station_count(&self) -> &[u32] {
        &self.station_count
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.included.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Land cells inside the domain.
    pub fn candidates(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.included.len()).filter(|&i| self.land[i] && self.domain[i])
    }

    pub fn summary(&self) -> MaskSummary {
        let n_c = self.candidates().count();
        let n_cs = self.len();
        let p_cs = if n_c == 0 { f64::NAN } else { n_cs as f64 / n_c as f64 };
        MaskSummary { n_c, n_cs, p_cs }
    }

    /// Narrow the domain (and the included set) to `region`.
    pub fn restrict(&self, region: &Region) -> Self {
        let mut out = self.clone();
        for (i, d) in out.domain.iter_mut().enumerate() {
            *d = *d && region.contains(i);
            out.included[i] = out.included[i] && *d;
        }
        out
    }

    pub fn is_subset_of(&self, other: &CellMask) -> bool {
        self.included.len() == other.included.len()
            && self.included.iter().zip(&other.included).all(|(a, b)| !*a || *b)
    }

    /// CSV `row,col,included,station_count,provenance`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "included", "station_count", "provenance"])?;
        for (i, c) in self.grid.cells().enumerate() {
            w.write_record([
                c.row.to_string(),
                c.col.to_string(),
                u8::from(self.included[i]).to_string(),
                self.station_count[i].to_string(),
                self.provenance.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`CellMask::write_csv`]; the domain becomes the whole grid
    /// and land is taken from `grid` at `land_threshold`.
    pub fn read_csv<R: Read>(grid: &RegularGrid, land_threshold: f64, input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            row: usize,
            col: usize,
            included: u8,
            station_count: u32,
            provenance: String,
        }
        let n = grid.n_cells();
        let mut included = vec![false; n];
        let mut count = vec![0u32; n];
        let mut seen = vec![false; n];
        let mut provenance = None;
        for rec in csv::Reader::from_reader(input).deserialize() {
            let r: Row = rec?;
            if r.row >= grid.nlat() || r.col >= grid.nlon() {
                return Err(Error::Schema(format!("mask cell ({}, {}) outside grid", r.row, r.col)));
            }
            let p: Provenance = r.provenance.parse()?;
            if provenance.is_some_and(|q| q != p) {
                return Err(Error::Schema("mixed provenance in one mask file".into()));
            }
            provenance = Some(p);
            let i = grid.index(crate::grid::CellId::new(r.row, r.col));
            if seen[i] {
                return Err(Error::Schema(format!("duplicate mask cell ({}, {})", r.row, r.col)));
            }
            seen[i] = true;
            included[i] = match r.included {
                0 => false,
                1 => true,
                v => return Err(Error::Schema(format!("included flag {v} is not 0/1"))),
            };
            count[i] = r.station_count;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Schema("mask file does not list every grid cell".into()));
        }
        let land = grid.land_mask(land_threshold);
        if (0..n).any(|i| included[i] && !land[i]) {
            return Err(Error::Schema("mask includes a non-land cell".into()));
        }
        let provenance = provenance.ok_or_else(|| Error::Schema("empty mask file".into()))?;
        Self::from_parts(grid.clone(), land, vec![true; n], included, count, provenance)
    }
}

/// Stations whose completeness is at least `threshold`.
pub fn high_quality_filter(stations: &[StationRecord], threshold: f64) -> Vec<StationRecord> {
    stations.iter().filter(|s| s.completeness >= threshold).cloned().collect()
}

/// Stations per cell under the half-open cell rule; off-grid stations are ignored.
pub fn station_counts(grid: &RegularGrid, stations: &[StationRecord]) -> Vec<u32> {
    let mut count = vec![0u32; grid.n_cells()];
    for s in stations {
        if let Some(c) = grid.locate_cell(s.lat, s.lon) {
            count[grid.index(c)] += 1;
        }
    }
    count
}

/// Land cells holding at least `min_stations` stations. An empty station
/// set yields an empty mask; callers decide whether to warn.
pub fn build_a1_mask(grid: &RegularGrid, stations: &[StationRecord], land_threshold: f64, min_stations: u32) -> CellMask {
    let count = station_counts(grid, stations);
    let land = grid.land_mask(land_threshold);
    let included = count.iter().map(|&c| c >= min_stations.max(1)).collect();
    CellMask::from_parts(grid.clone(), land, vec![true; grid.n_cells()], included, count, Provenance::A1Station)
        .expect("arrays sized from grid")
}

/// Every land cell.
pub fn build_a2_mask(grid: &RegularGrid, stations: &[StationRecord], land_threshold: f64) -> CellMask {
    let count = station_counts(grid, stations);
    let land = grid.land_mask(land_threshold);
    CellMask::from_parts(grid.clone(), land.clone(), vec![true; grid.n_cells()], land, count, Provenance::A2AllLand)
        .expect("arrays sized from grid")
}

/// Uniform random subset of the A1 cells of size `round(p * N_c)`.
pub fn subsample_mask(a1: &CellMask, target_proportion: f64, seed: u64) -> Result<CellMask> {
    let s = a1.summary();
    if !(0.0..=1.0).contains(&target_proportion) {
        return Err(Error::Input(format!("target proportion {target_proportion} outside [0, 1]")));
    }
    let k = (target_proportion * s.n_c as f64).round() as usize;
    if k > s.n_cs {
        return Err(Error::Input(format!(
            "target proportion {target_proportion} exceeds current {} / {}",
            s.n_cs, s.n_c
        )));
    }
    let mut pool: Vec<usize> = (0..a1.included.len()).filter(|&i| a1.included[i]).collect();
    pool.shuffle(&mut job_rng(seed, &[0x5355_4253]));
    let mut included = vec![false; a1.included.len()];
    for &i in &pool[..k] {
        included[i] = true;
    }
    Ok(CellMask { included, provenance: Provenance::A3Subsample, ..a1.clone() })
}

/// Land cells of `a2`'s domain no higher than the highest A1 cell.
pub fn elevation_threshold_mask(a2: &CellMask, a1: &CellMask, elevation: &ElevationField) -> Result<CellMask> {
    if !elevation.grid().same_geometry(&a2.grid) || !a1.grid.same_geometry(&a2.grid) {
        return Err(Error::Input("elevation and masks must share one grid".into()));
    }
    let z = elevation.values();
    let cutoff = (0..z.len())
        .filter(|&i| a1.included[i])
        .map(|i| z[i])
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        .ok_or_else(|| Error::Input("A1 mask is empty; no elevation cutoff".into()))?;
    let included = (0..z.len()).map(|i| a2.land[i] && a2.domain[i] && z[i] <= cutoff).collect();
    Ok(CellMask { included, provenance: Provenance::A3Elevation, ..a2.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellId, FULL_LAND};

    fn station(lat: f64, lon: f64, q: f64) -> StationRecord {
        StationRecord::new("s", lat, lon, 0.0, q).unwrap()
    }

    fn grid() -> RegularGrid {
        RegularGrid::uniform((0.0, 3.0), 3, (0.0, 3.0), 3).unwrap()
    }

    #[test]
    fn completeness_filter() {
        let s = vec![station(0.5, 0.5, 0.95), station(0.5, 0.5, 0.89), station(0.5, 0.5, 0.90)];
        assert_eq!(high_quality_filter(&s, 0.90).len(), 2);
        assert_eq!(high_quality_filter(&s, 0.0).len(), 3);
    }

    #[test]
    fn single_station_single_cell() {
        let g = grid();
        let m = build_a1_mask(&g, &[station(1.5, 2.5, 1.0)], FULL_LAND, 1);
        assert_eq!(m.len(), 1);
        assert!(m.is_included(g.index(CellId::new(1, 2))));
        assert_eq!(m.summary(), MaskSummary { n_c: 9, n_cs: 1, p_cs: 1.0 / 9.0 });
    }

    #[test]
    fn empty_station_set() {
        let m = build_a1_mask(&grid(), &[], FULL_LAND, 1);
        assert!(m.is_empty());
        assert!(elevation_threshold_mask(&build_a2_mask(&grid(), &[], FULL_LAND), &m, &flat(&grid())).is_err());
    }

    #[test]
    fn ocean_cells_never_included() {
        let mut lf = vec![1.0; 9];
        lf[4] = 0.6;
        let g = grid().with_land_fraction(lf).unwrap();
        let m = build_a1_mask(&g, &[station(1.5, 1.5, 1.0)], FULL_LAND, 1);
        assert!(m.is_empty());
        assert_eq!(m.station_count()[4], 1);
        assert_eq!(build_a2_mask(&g, &[], FULL_LAND).len(), 8);
    }

    #[test]
    fn min_stations_option() {
        let g = grid();
        let s = vec![station(0.5, 0.5, 1.0), station(0.6, 0.6, 1.0), station(2.5, 2.5, 1.0)];
        assert_eq!(build_a1_mask(&g, &s, FULL_LAND, 2).len(), 1);
        assert_eq!(build_a1_mask(&g, &s, FULL_LAND, 0).len(), 2);
    }

    fn flat(g: &RegularGrid) -> ElevationField {
        ElevationField::new(g.clone(), vec![100.0; g.n_cells()], FULL_LAND).unwrap()
    }

    #[test]
    fn subsample_sizes() {
        let g = RegularGrid::uniform((0.0, 10.0), 10, (0.0, 10.0), 10).unwrap();
        let s: Vec<_> = (0..60).map(|i| station(0.5 + (i / 10) as f64, 0.5 + (i % 10) as f64, 1.0)).collect();
        let a1 = build_a1_mask(&g, &s, FULL_LAND, 1);
        assert_eq!(a1.summary().p_cs, 0.6);
        let same = subsample_mask(&a1, 0.6, 3).unwrap();
        assert_eq!(same.included(), a1.included());
        let sub = subsample_mask(&a1, 0.36, 3).unwrap();
        assert_eq!(sub.len(), 36);
        assert!(sub.is_subset_of(&a1));
        assert_eq!(sub, subsample_mask(&a1, 0.36, 3).unwrap());
        assert_ne!(sub.included(), subsample_mask(&a1, 0.36, 4).unwrap().included());
        assert!(subsample_mask(&a1, 0.0, 3).unwrap().is_empty());
        assert!(subsample_mask(&a1, 0.61, 3).is_err());
    }

    #[test]
    fn subsample_respects_region_denominator() {
        let g = RegularGrid::uniform((0.0, 1.0), 1, (0.0, 10.0), 10).unwrap();
        let s: Vec<_> = (0..4).map(|i| station(0.5, 0.5 + i as f64, 1.0)).collect();
        let a1 = build_a1_mask(&g, &s, FULL_LAND, 1);
        let region = Region::from_mask("west", (0..10).map(|i| i < 5).collect());
        let r = a1.restrict(&region);
        assert_eq!(r.summary(), MaskSummary { n_c: 5, n_cs: 4, p_cs: 0.8 });
        assert_eq!(subsample_mask(&r, 0.4, 1).unwrap().len(), 2);
    }

    #[test]
    fn flat_terrain_elevation_mask_equals_all_land() {
        let g = grid();
        let a1 = build_a1_mask(&g, &[station(0.5, 0.5, 1.0)], FULL_LAND, 1);
        let a2 = build_a2_mask(&g, &[], FULL_LAND);
        let a3 = elevation_threshold_mask(&a2, &a1, &flat(&g)).unwrap();
        assert_eq!(a3.included(), a2.included());
    }

    #[test]
    fn ridge_cutoff_matches_scan() {
        let g = RegularGrid::uniform((0.0, 4.0), 4, (0.0, 8.0), 8).unwrap();
        let z: Vec<f64> = g.cells().map(|c| 200.0 * (4.0 - (c.col as f64 - 3.5).abs()) + 10.0 * c.row as f64).collect();
        let elev = ElevationField::new(g.clone(), z.clone(), FULL_LAND).unwrap();
        // valley stations only: columns 0 and 7
        let s: Vec<_> = (0..4).flat_map(|r| [station(r as f64 + 0.5, 0.5, 1.0), station(r as f64 + 0.5, 7.5, 1.0)]).collect();
        let a1 = build_a1_mask(&g, &s, FULL_LAND, 1);
        let a2 = build_a2_mask(&g, &s, FULL_LAND);
        let a3 = elevation_threshold_mask(&a2, &a1, &elev).unwrap();
        let cutoff = (0..32).filter(|&i| a1.is_included(i)).map(|i| z[i]).fold(f64::MIN, f64::max);
        for i in 0..32 {
            assert_eq!(a3.is_included(i), z[i] <= cutoff, "cell {i}");
        }
        assert!(a1.is_subset_of(&a3) && a3.is_subset_of(&a2));
        assert!(a3.len() < a2.len());
    }

    #[test]
    fn csv_roundtrip() {
        let g = grid();
        let m = build_a1_mask(&g, &[station(1.5, 2.5, 1.0), station(1.6, 2.6, 1.0)], FULL_LAND, 1);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("row,col,included,station_count,provenance\n0,0,0,0,A1-station\n"));
        assert!(text.contains("1,2,1,2,A1-station"));
        let back = CellMask::read_csv(&g, FULL_LAND, buf.as_slice()).unwrap();
        assert_eq!(back.included(), m.included());
        assert_eq!(back.station_count(), m.station_count());
        assert_eq!(back.provenance(), Provenance::A1Station);
    }
}
