//! Spatial discretization shared by every other module: a uniform,
//! axis-aligned square tiling with dense row-major per-cell storage.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Grid geometry and epoch duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct GridSpec {
    /// World coordinates of the lower-left corner of cell (0, 0).
    pub origin: Vec2,
    /// Edge length of a cell in meters.
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
    /// Epoch duration in seconds.
    pub tau: f64,
}

impl GridSpec {
    pub fn new(origin: Vec2, cell_size: f64, width: usize, height: usize, tau: f64) -> Result<Self> {
        let spec = GridSpec {
            origin,
            cell_size,
            width,
            height,
            tau,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::invalid("spec.cell_size", "must be a positive finite length"));
        }
        if self.width == 0 {
            return Err(Error::invalid("spec.width", "must be at least 1"));
        }
        if self.height == 0 {
            return Err(Error::invalid("spec.height", "must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("spec.tau", "must be a positive finite duration"));
        }
        if !(self.origin.x.is_finite() && self.origin.y.is_finite()) {
            return Err(Error::invalid("spec.origin", "must be finite"));
        }
        Ok(())
    }

    /// A_c, the area of one cell.
    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Upper-right corner of the grid in world coordinates.
    pub fn extent_max(&self) -> Vec2 {
        self.origin + Vec2::new(self.width as f64, self.height as f64) * self.cell_size
    }

    pub fn contains_index(&self, idx: CellIndex) -> bool {
        idx.col < self.width && idx.row < self.height
    }

    pub fn linear(&self, idx: CellIndex) -> usize {
        idx.row * self.width + idx.col
    }

    pub fn index_of(&self, linear: usize) -> CellIndex {
        CellIndex {
            col: linear % self.width,
            row: linear / self.width,
        }
    }

    pub fn check_index(&self, idx: CellIndex) -> Result<()> {
        if self.contains_index(idx) {
            Ok(())
        } else {
            Err(Error::InvalidIndex {
                col: idx.col,
                row: idx.row,
                width: self.width,
                height: self.height,
            })
        }
    }

    /// Cell whose half-open square contains `point`, or `None` off-grid.
    pub fn world_to_cell(&self, point: Vec2) -> Option<CellIndex> {
        let u = ((point.x - self.origin.x) / self.cell_size).floor();
        let v = ((point.y - self.origin.y) / self.cell_size).floor();
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 || u.is_nan() || v.is_nan() {
            return None;
        }
        Some(CellIndex {
            col: u as usize,
            row: v as usize,
        })
    }

    pub fn cell_center(&self, idx: CellIndex) -> Result<Vec2> {
        self.check_index(idx)?;
        Ok(self.origin + Vec2::new(idx.col as f64 + 0.5, idx.row as f64 + 0.5) * self.cell_size)
    }

    /// Lower-left and upper-right corners of a cell. The index is not checked.
    pub fn cell_bounds(&self, idx: CellIndex) -> (Vec2, Vec2) {
        let lo = self.origin + Vec2::new(idx.col as f64, idx.row as f64) * self.cell_size;
        (lo, lo + Vec2::new(self.cell_size, self.cell_size))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub col: usize,
    pub row: usize,
}

impl CellIndex {
    pub const fn new(col: usize, row: usize) -> Self {
        CellIndex { col, row }
    }
}

impl From<(usize, usize)> for CellIndex {
    fn from((col, row): (usize, usize)) -> Self {
        CellIndex { col, row }
    }
}

/// Dense row-major per-cell storage bound to a fixed [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap<S> {
    spec: GridSpec,
    cells: Vec<S>,
}

impl<S> GridMap<S> {
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(CellIndex) -> S) -> Self {
        let cells = (0..spec.len()).map(|i| f(spec.index_of(i))).collect();
        GridMap { spec, cells }
    }

    pub fn from_vec(spec: GridSpec, cells: Vec<S>) -> Result<Self> {
        if cells.len() != spec.len() {
            return Err(Error::invalid(
                "cells",
                format!("expected {} cells, got {}", spec.len(), cells.len()),
            ));
        }
        Ok(GridMap { spec, cells })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn cells(&self) -> &[S] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [S] {
        &mut self.cells
    }

    pub fn into_cells(self) -> Vec<S> {
        self.cells
    }

    pub fn get(&self, idx: CellIndex) -> Result<&S> {
        self.spec.check_index(idx)?;
        Ok(&self.cells[self.spec.linear(idx)])
    }

    pub fn get_mut(&mut self, idx: CellIndex) -> Result<&mut S> {
        self.spec.check_index(idx)?;
        let i = self.spec.linear(idx);
        Ok(&mut self.cells[i])
    }

    /// Iterates `(index, cell)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (CellIndex, &S)> + '_ {
        self.cells.iter().enumerate().map(|(i, s)| (self.spec.index_of(i), s))
    }

    pub fn map<T>(&self, f: impl Fn(&S) -> T) -> GridMap<T> {
        GridMap {
            spec: self.spec,
            cells: self.cells.iter().map(f).collect(),
        }
    }
}

impl<S: Default> GridMap<S> {
    pub fn new(spec: GridSpec) -> Self {
        Self::from_fn(spec, |_| S::default())
    }
}

impl<S: Send> GridMap<S> {
    /// Parallel mutable sweep; each closure call owns one cell.
    pub fn par_for_each_mut(&mut self, f: impl Fn(CellIndex, &mut S) + Sync + Send) {
        let spec = self.spec;
        self.cells
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, s)| f(spec.index_of(i), s));
    }
}

impl<S> std::ops::Index<CellIndex> for GridMap<S> {
    type Output = S;
    fn index(&self, idx: CellIndex) -> &S {
        assert!(self.spec.contains_index(idx), "cell index {idx:?} out of bounds");
        &self.cells[self.spec.linear(idx)]
    }
}

impl<S> std::ops::IndexMut<CellIndex> for GridMap<S> {
    fn index_mut(&mut self, idx: CellIndex) -> &mut S {
        assert!(self.spec.contains_index(idx), "cell index {idx:?} out of bounds");
        let i = self.spec.linear(idx);
        &mut self.cells[i]
    }
}

/// Per-cell state that can be written as columns of a grid snapshot.
pub trait CellFields {
    fn field_names() -> &'static [&'static str];
    fn field_values(&self) -> Vec<f64>;
}

impl<S: CellFields> GridMap<S> {
    /// Writes `col,row,<fields>` with one line per cell in row-major order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["col", "row"];
        header.extend_from_slice(S::field_names());
        w.write_record(&header)?;
        for (idx, cell) in self.iter() {
            let mut rec = vec![idx.col.to_string(), idx.row.to_string()];
            rec.extend(cell.field_values().into_iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid() -> GridSpec {
        GridSpec::new(Vec2::ZERO, 1.0, 10, 10, 0.1).unwrap()
    }

    #[test]
    fn world_to_cell_examples() {
        let spec = unit_grid();
        assert_eq!(spec.world_to_cell(Vec2::new(0.5, 0.5)), Some(CellIndex::new(0, 0)));
        assert_eq!(spec.world_to_cell(Vec2::new(10.0, 0.0)), None);
        assert_eq!(spec.world_to_cell(Vec2::new(3.999, 7.0)), Some(CellIndex::new(3, 7)));
        assert_eq!(spec.world_to_cell(Vec2::new(-0.001, 3.0)), None);
    }

    #[test]
    fn cell_center_examples() {
        let spec = GridSpec::new(Vec2::ZERO, 2.0, 4, 4, 0.1).unwrap();
        assert_eq!(spec.cell_center(CellIndex::new(0, 0)).unwrap(), Vec2::new(1.0, 1.0));
        let spec = GridSpec::new(Vec2::new(-5.0, -5.0), 1.0, 10, 10, 0.1).unwrap();
        assert_eq!(spec.cell_center(CellIndex::new(5, 5)).unwrap(), Vec2::new(0.5, 0.5));
        assert!(matches!(
            spec.cell_center(CellIndex::new(10, 0)),
            Err(Error::InvalidIndex { .. })
        ));
    }

    #[test]
    fn spec_validation_names_field() {
        let err = GridSpec::new(Vec2::ZERO, 0.0, 1, 1, 0.1).unwrap_err();
        assert!(err.to_string().contains("cell_size"));
        assert!(GridSpec::new(Vec2::ZERO, 1.0, 0, 1, 0.1).is_err());
        assert!(GridSpec::new(Vec2::ZERO, 1.0, 1, 1, 0.0).is_err());
        assert_eq!(unit_grid().cell_area(), 1.0);
    }

    #[test]
    fn csv_snapshot_layout() {
        struct One(f64);
        impl CellFields for One {
            fn field_names() -> &'static [&'static str] {
                &["v"]
            }
            fn field_values(&self) -> Vec<f64> {
                vec![self.0]
            }
        }
        let spec = GridSpec::new(Vec2::ZERO, 1.0, 2, 2, 0.1).unwrap();
        let map = GridMap::from_fn(spec, |i| One((i.row * 10 + i.col) as f64));
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "col,row,v\n0,0,0\n1,0,1\n0,1,10\n1,1,11\n");
    }

    proptest! {
        #[test]
        fn center_round_trips(
            ox in -100.0f64..100.0, oy in -100.0f64..100.0,
            cs in 0.05f64..5.0, w in 1usize..200, h in 1usize..200,
            fc in 0.0f64..1.0, fr in 0.0f64..1.0,
        ) {
            let spec = GridSpec::new(Vec2::new(ox, oy), cs, w, h, 0.1).unwrap();
            let idx = CellIndex::new(((w as f64) * fc) as usize, ((h as f64) * fr) as usize);
            let c = spec.cell_center(idx).unwrap();
            prop_assert_eq!(spec.world_to_cell(c), Some(idx));
        }

        #[test]
        fn point_lies_in_its_cell(
            cs in 0.05f64..5.0, fx in 0.0f64..1.0, fy in 0.0f64..1.0,
        ) {
            let spec = GridSpec::new(Vec2::new(-3.0, 2.0), cs, 37, 23, 0.1).unwrap();
            let extent = spec.extent_max() - spec.origin;
            let p = spec.origin + Vec2::new(extent.x * fx, extent.y * fy);
            if let Some(idx) = spec.world_to_cell(p) {
                let (lo, hi) = spec.cell_bounds(idx);
                prop_assert!(p.x >= lo.x - 1e-9 && p.x < hi.x + 1e-9);
                prop_assert!(p.y >= lo.y - 1e-9 && p.y < hi.y + 1e-9);
            }
        }
    }
}
