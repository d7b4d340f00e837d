//! Named cell selections (evaluation regions) read from external definitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellId, RegularGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: String,
    cells: Vec<bool>,
}

/// One entry of a region definition file. Exactly one selector must be set;
/// polygons and boxes select cells by their centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<[usize; 2]>>,
    /// `[lon, lat]` vertices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<[f64; 2]>>,
    /// `[lon_min, lat_min, lon_max, lat_max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionFile {
    pub regions: Vec<RegionSpec>,
}

impl Region {
    pub fn whole(grid: &RegularGrid, id: impl Into<String>) -> Self {
        Self { id: id.into(), cells: vec![true; grid.n_cells()] }
    }

    pub fn from_mask(id: impl Into<String>, cells: Vec<bool>) -> Self {
        Self { id: id.into(), cells }
    }

    pub fn from_cells(grid: &RegularGrid, id: impl Into<String>, list: &[CellId]) -> Result<Self> {
        let id = id.into();
        let mut cells = vec![false; grid.n_cells()];
        for c in list {
            if c.row >= grid.nlat() || c.col >= grid.nlon() {
                return Err(Error::Input(format!("region {id}: cell ({}, {}) outside grid", c.row, c.col)));
            }
            cells[grid.index(*c)] = true;
        }
        Ok(Self { id, cells })
    }

    pub fn from_spec(grid: &RegularGrid, spec: &RegionSpec) -> Result<Self> {
        let set = [spec.cells.is_some(), spec.polygon.is_some(), spec.bbox.is_some()];
        if set.iter().filter(|s| **s).count() != 1 {
            return Err(Error::Schema(format!("region {} must set exactly one of cells, polygon, bbox", spec.id)));
        }
        if let Some(list) = &spec.cells {
            let ids: Vec<CellId> = list.iter().map(|[r, c]| CellId::new(*r, *c)).collect();
            return Self::from_cells(grid, spec.id.clone(), &ids);
        }
        let inside: Box<dyn Fn(f64, f64) -> bool> = if let Some(poly) = &spec.polygon {
            if poly.len() < 3 {
                return Err(Error::Schema(format!("region {}: polygon needs 3 vertices", spec.id)));
            }
            let poly = poly.clone();
            Box::new(move |lat, lon| point_in_polygon(&poly, lon, lat))
        } else {
            let [x0, y0, x1, y1] = spec.bbox.expect("one selector set");
            Box::new(move |lat, lon| x0 <= lon && lon <= x1 && y0 <= lat && lat <= y1)
        };
        let cells = grid
            .cells()
            .map(|c| {
                let (lat, lon) = grid.center(c);
                inside(lat, lon)
            })
            .collect();
        Ok(Self { id: spec.id.clone(), cells })
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.cells[idx]
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Resolve every region of a definition file against `grid`.
pub fn regions_from_file(grid: &RegularGrid, file: &RegionFile) -> Result<Vec<Region>> {
    file.regions.iter().map(|s| Region::from_spec(grid, s)).collect()
}

/// Even-odd ray casting on `[x, y]` vertices.
pub fn point_in_polygon(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = poly[i];
        let [xj, yj] = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RegularGrid {
        RegularGrid::uniform((0.0, 4.0), 4, (0.0, 4.0), 4).unwrap()
    }

    #[test]
    fn polygon_selects_centers() {
        let spec = RegionSpec {
            id: "tri".into(),
            cells: None,
            polygon: Some(vec![[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]]),
            bbox: None,
        };
        let r = Region::from_spec(&grid(), &spec).unwrap();
        // centers (r+0.5, c+0.5) strictly below the diagonal lon + lat = 4
        let expected = grid().cells().filter(|c| c.row + c.col < 3).count();
        assert_eq!(r.len(), expected);
    }

    #[test]
    fn bbox_and_cells() {
        let g = grid();
        let spec = RegionSpec { id: "b".into(), cells: None, polygon: None, bbox: Some([0.0, 0.0, 2.0, 1.0]) };
        assert_eq!(Region::from_spec(&g, &spec).unwrap().len(), 2);
        let spec = RegionSpec { id: "c".into(), cells: Some(vec![[0, 0], [3, 3]]), polygon: None, bbox: None };
        let r = Region::from_spec(&g, &spec).unwrap();
        assert!(r.contains(0) && r.contains(15) && r.len() == 2);
        let bad = RegionSpec { id: "x".into(), cells: Some(vec![[4, 0]]), polygon: None, bbox: None };
        assert!(Region::from_spec(&g, &bad).is_err());
        let none = RegionSpec { id: "n".into(), cells: None, polygon: None, bbox: None };
        assert!(Region::from_spec(&g, &none).is_err());
    }
}
