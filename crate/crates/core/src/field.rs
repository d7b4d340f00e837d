//! Daily precipitation fields and per-cell elevation.

use chrono::{Days, NaiveDate};

use crate::error::{Error, Result};
use crate::grid::RegularGrid;

/// Daily precipitation (mm/day) on a grid over a contiguous calendar axis.
///
/// Values are stored `[day][cell]`; `NaN` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyField {
    grid: RegularGrid,
    start: NaiveDate,
    n_days: usize,
    values: Vec<f64>,
}

impl DailyField {
    pub fn new(grid: RegularGrid, start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        let n = grid.n_cells();
        if !values.len().is_multiple_of(n) {
            return Err(Error::Input(format!(
                "{} values is not a whole number of days for {n} cells",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_nan() && !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Input(format!("daily value {v} is neither missing nor >= 0")));
        }
        let n_days = values.len() / n;
        if n_days > 0 && start.checked_add_days(Days::new(n_days as u64 - 1)).is_none() {
            return Err(Error::Input("date axis overflows the calendar".into()));
        }
        Ok(Self { grid, start, n_days, values })
    }

    pub fn grid(&self) -> &RegularGrid {
        &self.grid
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start + Days::new(day as u64)
    }

    /// Day index of `date`, if it falls on the axis.
    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let d = (date - self.start).num_days();
        (d >= 0 && (d as usize) < self.n_days).then_some(d as usize)
    }

    pub fn day(&self, day: usize) -> &[f64] {
        let n = self.grid.n_cells();
        &self.values[day * n..(day + 1) * n]
    }

    pub fn get(&self, day: usize, cell: usize) -> f64 {
        self.values[day * self.grid.n_cells() + cell]
    }

    /// Time series of one cell.
    pub fn cell_series(&self, cell: usize) -> Vec<f64> {
        let n = self.grid.n_cells();
        (0..self.n_days).map(|d| self.values[d * n + cell]).collect()
    }
}

/// Mean elevation (m) per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationField {
    grid: RegularGrid,
    mean_elevation: Vec<f64>,
}

impl ElevationField {
    /// Land cells (by `land_threshold`) must carry a finite elevation.
    pub fn new(grid: RegularGrid, mean_elevation: Vec<f64>, land_threshold: f64) -> Result<Self> {
        if mean_elevation.len() != grid.n_cells() {
            return Err(Error::Input("elevation field does not match grid".into()));
        }
        if let Some(i) = (0..grid.n_cells())
            .find(|&i| grid.is_land(i, land_threshold) && !mean_elevation[i].is_finite())
        {
            return Err(Error::Input(format!("non-finite elevation on land cell {i}")));
        }
        Ok(Self { grid, mean_elevation })
    }

    pub fn grid(&self) -> &RegularGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.mean_elevation
    }
}

/// One weather station.
#[derive(Debug, Clone, PartialEq)]
pub struct StationRecord {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub elevation_m: f64,
    /// Fraction of non-missing daily records over the study period.
    pub completeness: f64,
}

impl StationRecord {
    pub fn new(id: impl Into<String>, lat: f64, lon: f64, elevation_m: f64, completeness: f64) -> Result<Self> {
        let id = id.into();
        if !(lat.is_finite() && (-90.0..=90.0).contains(&lat)) {
            return Err(Error::Input(format!("station {id}: latitude {lat} out of range")));
        }
        if !(lon.is_finite() && (-180.0..=360.0).contains(&lon)) {
            return Err(Error::Input(format!("station {id}: longitude {lon} out of range")));
        }
        if !(0.0..=1.0).contains(&completeness) {
            return Err(Error::Input(format!("station {id}: completeness {completeness} outside [0, 1]")));
        }
        Ok(Self { id, lat, lon: crate::grid::normalize_lon(lon), elevation_m, completeness })
    }
}
