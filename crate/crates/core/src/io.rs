//! On-disk formats: grid descriptors, binary field stores and CSV tables.
//!
//! A store is a JSON header next to a little-endian payload. Daily stores
//! are `f32` laid out `[time][lat][lon]`; season-maximum stores are `f32`
//! laid out `[year][replicate][cell]`; return-value stores are `f64`
//! `[1 + replicates][cell]` with the point estimate first. `NaN` is missing.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::covariate::CovariateSeries;
use crate::error::{Error, Result};
use crate::extremes::FieldFit;
use crate::field::{DailyField, ElevationField, StationRecord};
use crate::grid::{CellId, RegularGrid};
use crate::seasonal::{Season, SeasonMaxSeries};

pub const CRS: &str = "WGS84-degrees";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LandFraction {
    Inline(Vec<f64>),
    /// CSV `row,col,land_fraction`, relative to the descriptor's directory.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDescriptor {
    pub lat_edges: Vec<f64>,
    pub lon_edges: Vec<f64>,
    /// All land when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub land_fraction: Option<LandFraction>,
    pub crs: String,
}

impl GridDescriptor {
    pub fn from_grid(grid: &RegularGrid) -> Self {
        Self {
            lat_edges: grid.lat_edges().to_vec(),
            lon_edges: grid.lon_edges().to_vec(),
            land_fraction: Some(LandFraction::Inline(grid.land_fraction().to_vec())),
            crs: CRS.into(),
        }
    }

    /// `base` resolves a relative land-fraction path.
    pub fn to_grid(&self, base: &Path) -> Result<RegularGrid> {
        if self.crs != CRS {
            return Err(Error::Schema(format!("unsupported crs {:?}, expected {CRS:?}", self.crs)));
        }
        let n = (self.lat_edges.len().saturating_sub(1)) * (self.lon_edges.len().saturating_sub(1));
        let land = match &self.land_fraction {
            None => vec![1.0; n],
            Some(LandFraction::Inline(v)) => v.clone(),
            Some(LandFraction::File { path }) => read_land_fraction(&base.join(path), self.lat_edges.len() - 1, self.lon_edges.len() - 1)?,
        };
        RegularGrid::new(self.lat_edges.clone(), self.lon_edges.clone(), land)
    }
}

fn read_land_fraction(path: &Path, nlat: usize, nlon: usize) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Row {
        row: usize,
        col: usize,
        land_fraction: f64,
    }
    let mut v = vec![f64::NAN; nlat * nlon];
    for rec in csv::Reader::from_path(path)?.deserialize() {
        let r: Row = rec?;
        if r.row >= nlat || r.col >= nlon {
            return Err(Error::Schema(format!("land fraction cell ({}, {}) outside grid", r.row, r.col)));
        }
        v[r.row * nlon + r.col] = r.land_fraction;
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::Schema(format!("{} does not cover every cell", path.display())));
    }
    Ok(v)
}

fn parent(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<RegularGrid> {
    read_json::<GridDescriptor>(path)?.to_grid(parent(path))
}

pub fn write_grid(path: &Path, grid: &RegularGrid) -> Result<()> {
    write_json(path, &GridDescriptor::from_grid(grid))
}

pub fn write_f32le(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_f32le(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() != 4 * expected {
        return Err(Error::Schema(format!("{}: {} bytes, expected {}", path.display(), bytes.len(), 4 * expected)));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect())
}

pub fn write_f64le(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_f64le(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() != 8 * expected {
        return Err(Error::Schema(format!("{}: {} bytes, expected {}", path.display(), bytes.len(), 8 * expected)));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

/// Processing stage a store's data went through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// As ingested on its native grid.
    Native,
    /// Conservatively remapped to a target grid.
    Remapped,
    /// Generated directly on the evaluation grid.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoreMeta {
    Daily {
        start: NaiveDate,
        n_days: usize,
    },
    SeasonMax {
        season: Season,
        season_years: Vec<i32>,
        n_replicates: usize,
        /// Stage of the daily data the maxima were taken from.
        daily_stage: Stage,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreHeader {
    #[serde(flatten)]
    pub meta: StoreMeta,
    pub grid: GridDescriptor,
    pub stage: Stage,
    pub dtype: String,
    pub layout: String,
    /// Payload file name, relative to the header.
    pub payload: String,
}

fn payload_name(header_path: &Path, ext: &str) -> Result<String> {
    let stem = header_path
        .file_stem()
        .ok_or_else(|| Error::Input(format!("{} has no file name", header_path.display())))?;
    Ok(format!("{}.{ext}", stem.to_string_lossy()))
}

pub fn read_store_header(path: &Path) -> Result<StoreHeader> {
    let h: StoreHeader = read_json(path)?;
    if h.dtype != "f32le" {
        return Err(Error::Schema(format!("{}: dtype {:?} is not f32le", path.display(), h.dtype)));
    }
    Ok(h)
}

pub fn write_daily(path: &Path, field: &DailyField, stage: Stage) -> Result<()> {
    let payload = payload_name(path, "f32")?;
    write_f32le(&parent(path).join(&payload), field.values())?;
    let header = StoreHeader {
        meta: StoreMeta::Daily { start: field.start(), n_days: field.n_days() },
        grid: GridDescriptor::from_grid(field.grid()),
        stage,
        dtype: "f32le".into(),
        layout: "[time][lat][lon]".into(),
        payload,
    };
    write_json(path, &header)
}

pub fn read_daily(path: &Path) -> Result<(DailyField, StoreHeader)> {
    let h = read_store_header(path)?;
    let StoreMeta::Daily { start, n_days } = h.meta else {
        return Err(Error::Schema(format!("{} is not a daily store", path.display())));
    };
    let grid = h.grid.to_grid(parent(path))?;
    let values = read_f32le(&parent(path).join(&h.payload), n_days * grid.n_cells())?;
    Ok((DailyField::new(grid, start, values)?, h))
}

pub fn write_season_max(path: &Path, series: &SeasonMaxSeries, season: Season, daily_stage: Stage) -> Result<()> {
    let payload = payload_name(path, "f32")?;
    write_f32le(&parent(path).join(&payload), series.values())?;
    let header = StoreHeader {
        meta: StoreMeta::SeasonMax {
            season,
            season_years: series.season_years().to_vec(),
            n_replicates: series.n_replicates(),
            daily_stage,
        },
        grid: GridDescriptor::from_grid(series.grid()),
        stage: daily_stage,
        dtype: "f32le".into(),
        layout: "[year][replicate][cell]".into(),
        payload,
    };
    write_json(path, &header)
}

pub fn read_season_max(path: &Path) -> Result<(SeasonMaxSeries, StoreHeader)> {
    let h = read_store_header(path)?;
    let StoreMeta::SeasonMax { season_years, n_replicates, .. } = &h.meta else {
        return Err(Error::Schema(format!("{} is not a season-maximum store", path.display())));
    };
    let grid = h.grid.to_grid(parent(path))?;
    let n = season_years.len() * n_replicates * grid.n_cells();
    let values = read_f32le(&parent(path).join(&h.payload), n)?;
    let s = SeasonMaxSeries::new(grid, season_years.clone(), *n_replicates, values)?;
    Ok((s, h))
}

/// Point and bootstrap return-value fields of one product.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnValueStore {
    pub grid: RegularGrid,
    pub return_period: f64,
    pub xbar: f64,
    pub season_years: Vec<i32>,
    pub bootstrap_seed: u64,
    pub point: Vec<f64>,
    /// `None` marks a failed replicate (stored as an all-`NaN` row).
    pub replicates: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReturnValueHeader {
    kind: String,
    grid: GridDescriptor,
    return_period: f64,
    xbar: f64,
    season_years: Vec<i32>,
    bootstrap_seed: u64,
    n_replicates: usize,
    dtype: String,
    layout: String,
    payload: String,
}

pub fn write_return_values(path: &Path, store: &ReturnValueStore) -> Result<()> {
    let n = store.grid.n_cells();
    let payload = payload_name(path, "f64")?;
    let mut values = store.point.clone();
    for r in &store.replicates {
        match r {
            Some(v) => values.extend_from_slice(v),
            None => values.extend(std::iter::repeat_n(f64::NAN, n)),
        }
    }
    write_f64le(&parent(path).join(&payload), &values)?;
    let header = ReturnValueHeader {
        kind: "return_values".into(),
        grid: GridDescriptor::from_grid(&store.grid),
        return_period: store.return_period,
        xbar: store.xbar,
        season_years: store.season_years.clone(),
        bootstrap_seed: store.bootstrap_seed,
        n_replicates: store.replicates.len(),
        dtype: "f64le".into(),
        layout: "[1 + replicate][cell]".into(),
        payload,
    };
    write_json(path, &header)
}

pub fn read_return_values(path: &Path) -> Result<ReturnValueStore> {
    let h: ReturnValueHeader = read_json(path)?;
    if h.kind != "return_values" || h.dtype != "f64le" {
        return Err(Error::Schema(format!("{} is not a return-value store", path.display())));
    }
    let grid = h.grid.to_grid(parent(path))?;
    let n = grid.n_cells();
    let values = read_f64le(&parent(path).join(&h.payload), (1 + h.n_replicates) * n)?;
    let point = values[..n].to_vec();
    let replicates = values[n..]
        .chunks_exact(n)
        .map(|row| (!row.iter().all(|v| v.is_nan())).then(|| row.to_vec()))
        .collect();
    Ok(ReturnValueStore {
        grid,
        return_period: h.return_period,
        xbar: h.xbar,
        season_years: h.season_years,
        bootstrap_seed: h.bootstrap_seed,
        point,
        replicates,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct StationRow {
    id: String,
    lat: f64,
    lon: f64,
    elev_m: f64,
    completeness: f64,
}

/// CSV `id,lat,lon,elev_m,completeness`.
pub fn read_stations<R: Read>(input: R) -> Result<Vec<StationRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|rec| {
            let r: StationRow = rec?;
            StationRecord::new(r.id, r.lat, r.lon, r.elev_m, r.completeness)
        })
        .collect()
}

pub fn write_stations<W: Write>(stations: &[StationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in stations {
        w.serialize(StationRow {
            id: s.id.clone(),
            lat: s.lat,
            lon: s.lon,
            elev_m: s.elevation_m,
            completeness: s.completeness,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct GmtRow {
    year: i32,
    #[serde(rename = "anomaly_K")]
    anomaly_k: f64,
}

/// CSV `year,anomaly_K`; years must be strictly increasing.
pub fn read_gmt<R: Read>(input: R) -> Result<(Vec<i32>, Vec<f64>)> {
    let mut years = Vec::new();
    let mut x = Vec::new();
    for rec in csv::Reader::from_reader(input).deserialize() {
        let r: GmtRow = rec?;
        if years.last().is_some_and(|&y| y >= r.year) {
            return Err(Error::Schema(format!("GMT years not strictly increasing at {}", r.year)));
        }
        years.push(r.year);
        x.push(r.anomaly_k);
    }
    Ok((years, x))
}

pub fn write_gmt<W: Write>(years: &[i32], anomalies: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (&year, &anomaly_k) in years.iter().zip(anomalies) {
        w.serialize(GmtRow { year, anomaly_k })?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `row,col,elevation_m`; unlisted cells are `NaN`.
pub fn read_elevation<R: Read>(grid: &RegularGrid, land_threshold: f64, input: R) -> Result<ElevationField> {
    #[derive(Deserialize)]
    struct Row {
        row: usize,
        col: usize,
        elevation_m: f64,
    }
    let mut z = vec![f64::NAN; grid.n_cells()];
    for rec in csv::Reader::from_reader(input).deserialize() {
        let r: Row = rec?;
        if r.row >= grid.nlat() || r.col >= grid.nlon() {
            return Err(Error::Schema(format!("elevation cell ({}, {}) outside grid", r.row, r.col)));
        }
        z[grid.index(CellId::new(r.row, r.col))] = r.elevation_m;
    }
    ElevationField::new(grid.clone(), z, land_threshold)
}

pub fn write_elevation<W: Write>(field: &ElevationField, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "col", "elevation_m"])?;
    for (c, z) in field.grid().cells().zip(field.values()) {
        w.write_record([c.row.to_string(), c.col.to_string(), z.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `row,col,mu0,mu1,sigma,xi,rv<r>,converged,n_eff`; cells without a
/// fit have empty parameter columns.
pub fn write_fit_csv<W: Write>(grid: &RegularGrid, fit: &FieldFit, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let rv = format!("rv{}", fit.return_period);
    w.write_record(["row", "col", "mu0", "mu1", "sigma", "xi", rv.as_str(), "converged", "n_eff"])?;
    for (i, c) in grid.cells().enumerate() {
        let mut rec = vec![c.row.to_string(), c.col.to_string()];
        match &fit.fits[i] {
            Some(f) => {
                let p = f.params;
                rec.extend([p.mu0, p.mu1, p.sigma, p.xi, fit.return_values[i]].map(|v| v.to_string()));
                rec.push(u8::from(f.converged()).to_string());
                rec.push(f.n_effective.to_string());
            }
            None => {
                rec.extend(std::iter::repeat_n(String::new(), 5));
                rec.push("0".into());
                rec.push("0".into());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Smoothed covariate from a raw GMT table.
pub fn covariate_from_gmt<R: Read>(input: R, baseline: (i32, i32)) -> Result<CovariateSeries> {
    let (years, x) = read_gmt(input)?;
    crate::seasonal::smooth_gmt(&years, &x, baseline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FULL_LAND;

    fn grid() -> RegularGrid {
        RegularGrid::uniform((30.0, 32.0), 2, (-100.0, -97.0), 3)
            .unwrap()
            .with_land_fraction(vec![1.0, 1.0, 0.5, 1.0, 1.0, 1.0])
            .unwrap()
    }

    #[test]
    fn grid_roundtrip_and_external_land() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("grid.json");
        write_grid(&p, &grid()).unwrap();
        assert_eq!(read_grid(&p).unwrap(), grid());

        fs::write(dir.path().join("land.csv"), "row,col,land_fraction\n0,0,1\n0,1,1\n0,2,0.5\n1,0,1\n1,1,1\n1,2,1\n").unwrap();
        let d = GridDescriptor {
            lat_edges: grid().lat_edges().to_vec(),
            lon_edges: grid().lon_edges().to_vec(),
            land_fraction: Some(LandFraction::File { path: "land.csv".into() }),
            crs: CRS.into(),
        };
        write_json(&p, &d).unwrap();
        assert_eq!(read_grid(&p).unwrap(), grid());

        let bad = GridDescriptor { crs: "EPSG:3857".into(), ..d };
        write_json(&p, &bad).unwrap();
        assert!(matches!(read_grid(&p), Err(Error::Schema(_))));
    }

    #[test]
    fn daily_store_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pr.json");
        let start = NaiveDate::from_ymd_opt(1999, 12, 1).unwrap();
        let values: Vec<f64> = (0..12).map(|i| if i == 5 { f64::NAN } else { i as f64 * 0.5 }).collect();
        let f = DailyField::new(grid(), start, values).unwrap();
        write_daily(&p, &f, Stage::Remapped).unwrap();
        let (back, h) = read_daily(&p).unwrap();
        assert_eq!(h.stage, Stage::Remapped);
        assert_eq!(back.n_days(), 2);
        assert!(back.get(0, 5).is_nan());
        assert_eq!(back.get(1, 3), 4.5);
        assert_eq!(fs::metadata(dir.path().join("pr.f32")).unwrap().len(), 48);
        assert!(read_season_max(&p).is_err());
    }

    #[test]
    fn season_max_and_return_values_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rx.json");
        let s = SeasonMaxSeries::new(grid(), vec![2000, 2001], 1, (0..12).map(f64::from).collect()).unwrap();
        write_season_max(&p, &s, Season::Djf, Stage::Native).unwrap();
        let (back, h) = read_season_max(&p).unwrap();
        assert_eq!(back, s);
        assert!(matches!(h.meta, StoreMeta::SeasonMax { daily_stage: Stage::Native, .. }));

        let rv = ReturnValueStore {
            grid: grid(),
            return_period: 20.0,
            xbar: 0.1,
            season_years: vec![2000, 2001],
            bootstrap_seed: 9,
            point: vec![1.0, 2.0, f64::NAN, 4.0, 5.0, 6.0],
            replicates: vec![Some(vec![0.1 + 1e-12; 6]), None],
        };
        let p = dir.path().join("rv.json");
        write_return_values(&p, &rv).unwrap();
        let back = read_return_values(&p).unwrap();
        assert_eq!(back.replicates, rv.replicates);
        assert_eq!(back.point[..2], rv.point[..2]);
        assert!(back.point[2].is_nan());
    }

    #[test]
    fn tables_roundtrip() {
        let s = vec![StationRecord::new("USC1", 31.5, -98.5, 250.0, 0.93).unwrap()];
        let mut buf = Vec::new();
        write_stations(&s, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("id,lat,lon,elev_m,completeness\n"));
        assert_eq!(read_stations(buf.as_slice()).unwrap(), s);

        let mut buf = Vec::new();
        write_gmt(&[2000, 2001], &[0.1, 0.2], &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("year,anomaly_K\n"));
        assert_eq!(read_gmt(buf.as_slice()).unwrap(), (vec![2000, 2001], vec![0.1, 0.2]));
        assert!(read_gmt("year,anomaly_K\n2001,0\n2000,0\n".as_bytes()).is_err());

        let e = ElevationField::new(grid(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], FULL_LAND).unwrap();
        let mut buf = Vec::new();
        write_elevation(&e, &mut buf).unwrap();
        assert_eq!(read_elevation(&grid(), FULL_LAND, buf.as_slice()).unwrap(), e);
    }
}
