use crate::error::{Error, Result};

/// Rectangular cell-centered grid in one or two dimensions. Cells are stored
/// row-major: the last axis varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
}

pub const MIN_CELLS: usize = 8;

pub fn make_grid(bounds: &[(f64, f64)], cells: &[usize]) -> Result<Grid> {
    if bounds.is_empty() || bounds.len() > 2 {
        return Err(Error::Grid(format!(
            "grid dimension must be 1 or 2, got {}",
            bounds.len()
        )));
    }
    if bounds.len() != cells.len() {
        return Err(Error::Grid("bounds and cell counts differ in length".into()));
    }
    for (axis, (&(lo, hi), &n)) in bounds.iter().zip(cells).enumerate() {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::Grid(format!("axis {axis}: bounds [{lo}, {hi}] are not an interval")));
        }
        if n < MIN_CELLS {
            return Err(Error::Grid(format!(
                "axis {axis}: {n} cells is too coarse (minimum {MIN_CELLS})"
            )));
        }
    }
    Ok(Grid {
        lower: bounds.iter().map(|b| b.0).collect(),
        upper: bounds.iter().map(|b| b.1).collect(),
        cells: cells.to_vec(),
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.cells[axis] as f64
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.h(a)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.h(a)).product()
    }

    /// Center coordinate of cell `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let span = self.upper[axis] - self.lower[axis];
        self.lower[axis] + (2 * i + 1) as f64 * span / (2 * self.cells[axis]) as f64
    }

    /// Per-axis indices of a flat cell index.
    pub fn unravel(&self, idx: usize) -> [usize; 2] {
        match self.dim() {
            1 => [idx, 0],
            _ => [idx / self.cells[1], idx % self.cells[1]],
        }
    }

    pub fn ravel(&self, i: [usize; 2]) -> usize {
        match self.dim() {
            1 => i[0],
            _ => i[0] * self.cells[1] + i[1],
        }
    }

    /// Flat-index distance between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        if self.dim() == 2 && axis == 0 {
            self.cells[1]
        } else {
            1
        }
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let i = self.unravel(idx);
        (0..self.dim()).map(|a| self.coord(a, i[a])).collect()
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.center(k)).collect()
    }

    /// Whether the cell touches the boundary of the box.
    pub fn is_boundary_cell(&self, idx: usize) -> bool {
        let i = self.unravel(idx);
        (0..self.dim()).any(|a| i[a] == 0 || i[a] + 1 == self.cells[a])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|a| x[a] >= self.lower[a] && x[a] <= self.upper[a])
    }
}
