//! Seasonal Rx5Day block maxima, ensemble pooling and the smoothed GMT covariate.

use std::borrow::Cow;

use chrono::{Datelike, Days, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariate::CovariateSeries;
use crate::error::{Error, Result};
use crate::field::DailyField;
use crate::grid::RegularGrid;

/// Length of the running accumulation window in days.
pub const WINDOW_DAYS: usize = 5;

/// Three-month season. Seasons are labeled by the calendar year of their
/// final month, so DJF 1950/51 is season-year 1951.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Season {
    #[default]
    Djf,
    Mam,
    Jja,
    Son,
}

impl Season {
    fn first_month(self) -> u32 {
        match self {
            Season::Djf => 12,
            Season::Mam => 3,
            Season::Jja => 6,
            Season::Son => 9,
        }
    }

    /// First and last calendar day of the season labeled `year`.
    pub fn bounds(self, year: i32) -> Option<(NaiveDate, NaiveDate)> {
        let m = self.first_month();
        let first = if m == 12 {
            NaiveDate::from_ymd_opt(year - 1, 12, 1)?
        } else {
            NaiveDate::from_ymd_opt(year, m, 1)?
        };
        let after = first.checked_add_months(chrono::Months::new(3))?;
        Some((first, after - Days::new(1)))
    }

    pub fn n_days(self, year: i32) -> Option<usize> {
        self.bounds(year).map(|(a, b)| (b - a).num_days() as usize + 1)
    }

    /// Number of complete running windows in the season labeled `year`.
    pub fn window_count(self, year: i32) -> Option<usize> {
        self.n_days(year).map(|n| n.saturating_sub(WINDOW_DAYS - 1))
    }
}

/// Per-cell seasonal maxima, stored `[year][replicate][cell]`; `NaN` is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonMaxSeries {
    grid: RegularGrid,
    season_years: Vec<i32>,
    n_replicates: usize,
    values: Vec<f64>,
}

impl SeasonMaxSeries {
    pub fn new(grid: RegularGrid, season_years: Vec<i32>, n_replicates: usize, values: Vec<f64>) -> Result<Self> {
        if season_years.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("season years must be strictly increasing".into()));
        }
        if n_replicates == 0 {
            return Err(Error::Input("need at least one replicate".into()));
        }
        if values.len() != season_years.len() * n_replicates * grid.n_cells() {
            return Err(Error::Input("season-max payload does not match its axes".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_nan() && !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Input(format!("season maximum {v} is neither missing nor >= 0")));
        }
        Ok(Self { grid, season_years, n_replicates, values })
    }

    pub fn grid(&self) -> &RegularGrid {
        &self.grid
    }

    pub fn season_years(&self) -> &[i32] {
        &self.season_years
    }

    pub fn n_years(&self) -> usize {
        self.season_years.len()
    }

    pub fn n_replicates(&self) -> usize {
        self.n_replicates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, year_idx: usize, replicate: usize, cell: usize) -> f64 {
        let n = self.grid.n_cells();
        self.values[(year_idx * self.n_replicates + replicate) * n + cell]
    }

    /// View over every year in order.
    pub fn all_years(&self) -> YearSample<'_> {
        YearSample { series: self, years: Cow::Owned((0..self.n_years()).collect()) }
    }

    /// View over a (possibly repeating) list of year indices.
    pub fn resampled<'a>(&'a self, years: &'a [usize]) -> YearSample<'a> {
        YearSample { series: self, years: Cow::Borrowed(years) }
    }
}

/// A season-max series seen through a list of year indices, as produced by
/// a block bootstrap draw.
#[derive(Debug, Clone)]
pub struct YearSample<'a> {
    series: &'a SeasonMaxSeries,
    years: Cow<'a, [usize]>,
}

impl<'a> YearSample<'a> {
    pub fn series(&self) -> &'a SeasonMaxSeries {
        self.series
    }

    pub fn year_indices(&self) -> &[usize] {
        &self.years
    }

    /// `(season_year, value)` for every non-missing entry of `cell`,
    /// in sample order, replicates innermost.
    pub fn cell_values(&self, cell: usize) -> impl Iterator<Item = (i32, f64)> + '_ {
        let s = self.series;
        self.years.iter().flat_map(move |&yi| {
            (0..s.n_replicates)
                .map(move |r| (s.season_years[yi], s.get(yi, r, cell)))
                .filter(|(_, v)| !v.is_nan())
        })
    }
}

/// Largest sum over complete windows of [`WINDOW_DAYS`] values; windows
/// touching a missing value are skipped. `None` when no window is valid.
pub fn max_window_sum(values: &[f64]) -> Option<f64> {
    if values.len() < WINDOW_DAYS {
        return None;
    }
    let mut best: Option<f64> = None;
    for start in 0..=values.len() - WINDOW_DAYS {
        let window = &values[start..start + WINDOW_DAYS];
        if window.iter().any(|v| v.is_nan()) {
            continue;
        }
        let mut acc = 0.0;
        for v in window {
            acc += v;
        }
        best = Some(best.map_or(acc, |b: f64| b.max(acc)));
    }
    best
}

/// Season-years whose full span lies on the daily axis.
pub fn complete_seasons(daily: &DailyField, season: Season) -> Vec<i32> {
    if daily.n_days() == 0 {
        return Vec::new();
    }
    let first = daily.start();
    let last = daily.date(daily.n_days() - 1);
    (first.year()..=last.year() + 1)
        .filter(|&y| {
            season
                .bounds(y)
                .is_some_and(|(a, b)| a >= first && b <= last)
        })
        .collect()
}

/// Seasonal maximum running 5-day total for every complete season and cell.
pub fn rx5day(daily: &DailyField, season: Season) -> Result<SeasonMaxSeries> {
    let years = complete_seasons(daily, season);
    if years.is_empty() {
        return Err(Error::EmptySeasons);
    }
    let spans: Vec<(usize, usize)> = years
        .iter()
        .map(|&y| {
            let (a, b) = season.bounds(y).expect("complete season has bounds");
            let i0 = daily.day_index(a).expect("season start on axis");
            let i1 = daily.day_index(b).expect("season end on axis");
            (i0, i1 + 1)
        })
        .collect();
    let n_cells = daily.grid().n_cells();
    let per_cell: Vec<Vec<f64>> = (0..n_cells)
        .into_par_iter()
        .map(|cell| {
            let series = daily.cell_series(cell);
            spans
                .iter()
                .map(|&(a, b)| max_window_sum(&series[a..b]).unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    let mut values = vec![f64::NAN; years.len() * n_cells];
    for (cell, col) in per_cell.iter().enumerate() {
        for (yi, v) in col.iter().enumerate() {
            values[yi * n_cells + cell] = *v;
        }
    }
    SeasonMaxSeries::new(daily.grid().clone(), years, 1, values)
}

/// DJF Rx5Day, labeled by the January year.
pub fn rx5day_djf(daily: &DailyField) -> Result<SeasonMaxSeries> {
    rx5day(daily, Season::Djf)
}

/// Centered 5-year running mean of annual anomalies.
///
/// Near the ends the window shrinks symmetrically (width 3 one year in);
/// the first and last years use the 3-year window adjacent to them.
/// `xbar` is the mean of the smoothed values over `baseline`.
pub fn smooth_gmt(years: &[i32], anomalies: &[f64], baseline: (i32, i32)) -> Result<CovariateSeries> {
    let n = years.len();
    if n != anomalies.len() {
        return Err(Error::Input("years and anomalies differ in length".into()));
    }
    if n < 5 {
        return Err(Error::Input(format!("need at least 5 years of anomalies, got {n}")));
    }
    if years.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::Input("anomaly years have gaps".into()));
    }
    let smoothed = (0..n)
        .map(|i| {
            let half = 2.min(i).min(n - 1 - i);
            let (lo, hi) = if half == 0 {
                if i == 0 { (0, 2) } else { (n - 3, n - 1) }
            } else {
                (i - half, i + half)
            };
            anomalies[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    CovariateSeries::new(years.to_vec(), smoothed, baseline)
}

/// Stack ensemble members as replicates; no averaging across members.
pub fn pool_ensemble(members: &[SeasonMaxSeries]) -> Result<SeasonMaxSeries> {
    let first = members
        .first()
        .ok_or_else(|| Error::Input("no ensemble members".into()))?;
    for m in &members[1..] {
        if !m.grid.same_geometry(&first.grid) {
            return Err(Error::Alignment("ensemble members on different grids".into()));
        }
        if m.season_years != first.season_years {
            return Err(Error::Alignment("ensemble members have different season years".into()));
        }
    }
    let n_cells = first.grid.n_cells();
    let n_rep: usize = members.iter().map(|m| m.n_replicates).sum();
    let mut values = Vec::with_capacity(first.n_years() * n_rep * n_cells);
    for yi in 0..first.n_years() {
        for m in members {
            let row = yi * m.n_replicates * n_cells;
            values.extend_from_slice(&m.values[row..row + m.n_replicates * n_cells]);
        }
    }
    SeasonMaxSeries::new(first.grid.clone(), first.season_years.clone(), n_rep, values)
}
