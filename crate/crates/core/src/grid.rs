//! Regular latitude-longitude grids, spherical cell areas and point location.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A cell counts as land when its land fraction is at least this value.
pub const FULL_LAND: f64 = 1.0 - 1e-9;

/// Row/column address of a grid cell (row indexes latitude, col indexes longitude).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub row: usize,
    pub col: usize,
}

impl CellId {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Maps a longitude into `[-180, 180)`.
pub fn normalize_lon(lon: f64) -> f64 {
    (lon + 180.0).rem_euclid(360.0) - 180.0
}

/// A regular lat-lon grid described by its cell edges.
///
/// Longitude edges are kept in the `[-180, 180]` convention; grids supplied
/// in `[0, 360)` are shifted on construction when they lie wholly east of the
/// antimeridian. Cells are stored row-major, `idx = row * nlon + col`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularGrid {
    lat_edges: Vec<f64>,
    lon_edges: Vec<f64>,
    land_fraction: Vec<f64>,
}

impl RegularGrid {
    pub fn new(lat_edges: Vec<f64>, lon_edges: Vec<f64>, land_fraction: Vec<f64>) -> Result<Self> {
        check_edges("lat", &lat_edges)?;
        check_edges("lon", &lon_edges)?;
        if lat_edges[0] < -90.0 || lat_edges[lat_edges.len() - 1] > 90.0 {
            return Err(Error::InvalidGrid("latitude edges outside [-90, 90]".into()));
        }
        let lon_edges = normalize_lon_edges(lon_edges)?;
        let n = (lat_edges.len() - 1) * (lon_edges.len() - 1);
        if land_fraction.len() != n {
            return Err(Error::InvalidGrid(format!(
                "land_fraction has {} entries, grid has {n} cells",
                land_fraction.len()
            )));
        }
        if let Some(f) = land_fraction.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::InvalidGrid(format!("land fraction {f} outside [0, 1]")));
        }
        let grid = Self { lat_edges, lon_edges, land_fraction };
        // sine differences can underflow to zero for sliver rows near the poles
        if (0..grid.nlat()).any(|r| grid.row_sine_extent(r) <= 0.0) {
            return Err(Error::InvalidGrid("cell with zero spherical extent".into()));
        }
        Ok(grid)
    }

    /// Evenly spaced grid with every cell fully over land.
    pub fn uniform(lat: (f64, f64), nlat: usize, lon: (f64, f64), nlon: usize) -> Result<Self> {
        if nlat == 0 || nlon == 0 {
            return Err(Error::InvalidGrid("need at least one cell per axis".into()));
        }
        let lat_edges = linspace(lat.0, lat.1, nlat + 1);
        let lon_edges = linspace(lon.0, lon.1, nlon + 1);
        Self::new(lat_edges, lon_edges, vec![1.0; nlat * nlon])
    }

    pub fn with_land_fraction(mut self, land_fraction: Vec<f64>) -> Result<Self> {
        if land_fraction.len() != self.n_cells() {
            return Err(Error::InvalidGrid("land_fraction length mismatch".into()));
        }
        self.land_fraction = land_fraction;
        Self::new(self.lat_edges, self.lon_edges, self.land_fraction)
    }

    pub fn lat_edges(&self) -> &[f64] {
        &self.lat_edges
    }

    pub fn lon_edges(&self) -> &[f64] {
        &self.lon_edges
    }

    pub fn land_fraction(&self) -> &[f64] {
        &self.land_fraction
    }

    pub fn nlat(&self) -> usize {
        self.lat_edges.len() - 1
    }

    pub fn nlon(&self) -> usize {
        self.lon_edges.len() - 1
    }

    pub fn n_cells(&self) -> usize {
        self.nlat() * self.nlon()
    }

    pub fn index(&self, cell: CellId) -> usize {
        cell.row * self.nlon() + cell.col
    }

    pub fn cell(&self, idx: usize) -> CellId {
        CellId::new(idx / self.nlon(), idx % self.nlon())
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.n_cells()).map(|i| self.cell(i))
    }

    pub fn lat_bounds(&self, row: usize) -> (f64, f64) {
        (self.lat_edges[row], self.lat_edges[row + 1])
    }

    pub fn lon_bounds(&self, col: usize) -> (f64, f64) {
        (self.lon_edges[col], self.lon_edges[col + 1])
    }

    /// Cell center as `(lat, lon)` in degrees.
    pub fn center(&self, cell: CellId) -> (f64, f64) {
        let (s, n) = self.lat_bounds(cell.row);
        let (w, e) = self.lon_bounds(cell.col);
        (0.5 * (s + n), 0.5 * (w + e))
    }

    pub fn is_land(&self, idx: usize, threshold: f64) -> bool {
        self.land_fraction[idx] >= threshold
    }

    pub fn land_mask(&self, threshold: f64) -> Vec<bool> {
        self.land_fraction.iter().map(|&f| f >= threshold).collect()
    }

    /// Same edges (bit-for-bit); land fractions are not compared.
    pub fn same_geometry(&self, other: &RegularGrid) -> bool {
        self.lat_edges == other.lat_edges && self.lon_edges == other.lon_edges
    }

    fn row_sine_extent(&self, row: usize) -> f64 {
        let (s, n) = self.lat_bounds(row);
        n.to_radians().sin() - s.to_radians().sin()
    }

    /// Cell areas on the unit sphere: `(sin lat_top - sin lat_bottom) * dlon` in radians.
    pub fn area_weights(&self) -> Vec<f64> {
        let dlon: Vec<f64> = self
            .lon_edges
            .windows(2)
            .map(|w| (w[1] - w[0]).to_radians())
            .collect();
        (0..self.nlat())
            .flat_map(|r| {
                let band = self.row_sine_extent(r);
                dlon.iter().map(move |d| band * d)
            })
            .collect()
    }

    /// The unique cell whose half-open box `[low, high)` contains the point.
    ///
    /// Longitudes are normalized first, so `lon` and `lon + 360` locate the
    /// same cell. Points on a shared edge go to the cell above/east of it.
    pub fn locate_cell(&self, lat: f64, lon: f64) -> Option<CellId> {
        if !lat.is_finite() || !lon.is_finite() {
            return None;
        }
        let row = half_open_bin(&self.lat_edges, lat)?;
        let col = half_open_bin(&self.lon_edges, normalize_lon(lon))?;
        Some(CellId::new(row, col))
    }
}

/// Free-function form of [`RegularGrid::area_weights`].
pub fn area_weights(grid: &RegularGrid) -> Vec<f64> {
    grid.area_weights()
}

/// Free-function form of [`RegularGrid::locate_cell`].
pub fn locate_cell(grid: &RegularGrid, lat: f64, lon: f64) -> Option<CellId> {
    grid.locate_cell(lat, lon)
}

fn half_open_bin(edges: &[f64], x: f64) -> Option<usize> {
    let k = edges.partition_point(|&e| e <= x);
    if k == 0 || k == edges.len() {
        None
    } else {
        Some(k - 1)
    }
}

fn check_edges(axis: &str, edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::InvalidGrid(format!("{axis} axis needs at least 2 edges")));
    }
    if edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidGrid(format!("non-finite {axis} edge")));
    }
    if edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!("{axis} edges not strictly ascending")));
    }
    Ok(())
}

fn normalize_lon_edges(edges: Vec<f64>) -> Result<Vec<f64>> {
    let first = edges[0];
    let last = edges[edges.len() - 1];
    if last - first > 360.0 + 1e-9 {
        return Err(Error::InvalidGrid("longitude span exceeds 360 degrees".into()));
    }
    if first >= -180.0 && last <= 180.0 {
        return Ok(edges);
    }
    if first >= 180.0 && last <= 360.0 {
        return Ok(edges.into_iter().map(|e| e - 360.0).collect());
    }
    Err(Error::InvalidGrid(format!(
        "longitude edges [{first}, {last}] straddle the antimeridian of the [-180, 180) convention"
    )))
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
        .collect()
}
