//! Uniform grids on `[-1, 1]^2` and the 5-point discrete Laplacian.
//!
//! Node `(i, j)` sits at `(-1 + i h, -1 + j h)`. Fields are stored row-major
//! with `j` (the y index) as the row, so `values[j * nodes + i]`.
//!
//! Stencils at boundary nodes reach outside the square. Every function in
//! this crate is defined on the whole plane, so those points are evaluated
//! directly instead of switching to one-sided differences.

use std::io::{Read, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::{Evaluable, Point};

/// Relative slack when checking that `2 / h` is an integer.
const SPACING_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid spacing h={0} does not divide the side length 2 exactly")]
    NonDividingSpacing(f64),
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("grid needs a positive, even number of cells per axis (got {0}) so the origin is a node")]
    BadCellCount(usize),
    #[error("field has {got} values, grid has {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv header must be `x,y,value`, got `{0}`")]
    BadHeader(String),
    #[error("csv row {row} does not lie on a uniform grid: {reason}")]
    NotAGrid { row: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid2D {
    cells: usize,
}

impl Grid2D {
    /// The grid used for training losses and metrics by default, `h = 1/128`.
    pub const DEFAULT_SPACING: f64 = 1.0 / 128.0;

    pub fn with_cells(cells: usize) -> Result<Self, GridError> {
        if cells == 0 || !cells.is_multiple_of(2) {
            return Err(GridError::BadCellCount(cells));
        }
        Ok(Self { cells })
    }

    /// Grid with spacing `h`; `2 / h` must be an even integer.
    pub fn from_spacing(h: f64) -> Result<Self, GridError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(GridError::BadSpacing(h));
        }
        let ratio = 2.0 / h;
        let cells = ratio.round();
        if cells < 1.0 || (ratio - cells).abs() > SPACING_TOL * cells {
            return Err(GridError::NonDividingSpacing(h));
        }
        Self::with_cells(cells as usize)
    }

    pub fn default_grid() -> Self {
        Self { cells: 256 }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Nodes per axis, `2/h + 1`.
    pub fn nodes_per_axis(&self) -> usize {
        self.cells + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis() * self.nodes_per_axis()
    }

    pub fn spacing(&self) -> f64 {
        2.0 / self.cells as f64
    }

    /// Coordinate of lattice index `i`; indices outside `0..=cells` extend
    /// the lattice beyond the square.
    #[inline]
    pub fn coord(&self, i: isize) -> f64 {
        -1.0 + i as f64 * self.spacing()
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        [self.coord(i as isize), self.coord(j as isize)]
    }

    /// Node at row-major position `k`.
    #[inline]
    pub fn node_at(&self, k: usize) -> Point {
        let n = self.nodes_per_axis();
        self.node(k % n, k / n)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.node_count()).map(move |k| self.node_at(k))
    }
}

impl Default for Grid2D {
    fn default() -> Self {
        Self::default_grid()
    }
}

/// Values on the nodes of a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.node_count() {
            return Err(GridError::SizeMismatch {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nodes_per_axis() + i]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes `x,y,value` rows in node order, full round-trip precision.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GridError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "value"])?;
        for (p, v) in self.grid.nodes().zip(&self.values) {
            w.write_record([p[0].to_string(), p[1].to_string(), v.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads back what [`ScalarField::write_csv`] produced.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, GridError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["x", "y", "value"] {
            return Err(GridError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
        }
        let mut rows = Vec::new();
        for rec in r.deserialize() {
            let row: (f64, f64, f64) = rec?;
            rows.push(row);
        }
        let side = (rows.len() as f64).sqrt().round() as usize;
        if side < 3 || side * side != rows.len() {
            return Err(GridError::NotAGrid {
                row: rows.len(),
                reason: format!("{} rows is not a square node count", rows.len()),
            });
        }
        let grid = Grid2D::with_cells(side - 1)?;
        for (k, &(x, y, _)) in rows.iter().enumerate() {
            let p = grid.node_at(k);
            if (p[0] - x).abs() > 1e-12 || (p[1] - y).abs() > 1e-12 {
                return Err(GridError::NotAGrid {
                    row: k + 1,
                    reason: format!("expected node ({}, {}), found ({x}, {y})", p[0], p[1]),
                });
            }
        }
        Self::new(grid, rows.into_iter().map(|r| r.2).collect())
    }
}

/// `values[i, j] = f(x_ij)`.
pub fn sample_field<F: Evaluable + Sync + ?Sized>(grid: Grid2D, f: &F) -> ScalarField {
    let values = (0..grid.node_count())
        .into_par_iter()
        .map(|k| f.eval(grid.node_at(k)))
        .collect();
    ScalarField { grid, values }
}

/// `(f(x + h e1) + f(x - h e1) + f(x + h e2) + f(x - h e2) - 4 f(x)) / h^2`.
pub fn discrete_laplacian_at<F: Evaluable + ?Sized>(f: &F, x: Point, h: f64) -> f64 {
    let [a, b] = x;
    let sum = f.eval([a + h, b]) + f.eval([a - h, b]) + f.eval([a, b + h]) + f.eval([a, b - h]);
    (sum - 4.0 * f.eval(x)) / (h * h)
}

/// The 5-point Laplacian at every node, boundary nodes included.
pub fn laplacian_field<F: Evaluable + Sync + ?Sized>(grid: Grid2D, f: &F) -> ScalarField {
    LatticeSamples::sample(grid, 1, f).laplacian()
}

/// Samples of a function on the grid lattice extended by `pad` nodes on
/// every side.
///
/// Stencil-based operators read all their inputs from here, so each lattice
/// point is evaluated once no matter how many stencils touch it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSamples {
    grid: Grid2D,
    pad: usize,
    values: Vec<f64>,
}

impl LatticeSamples {
    pub fn sample<F: Evaluable + Sync + ?Sized>(grid: Grid2D, pad: usize, f: &F) -> Self {
        let side = grid.nodes_per_axis() + 2 * pad;
        let offset = pad as isize;
        let values = (0..side * side)
            .into_par_iter()
            .map(|k| {
                let i = (k % side) as isize - offset;
                let j = (k / side) as isize - offset;
                f.eval([grid.coord(i), grid.coord(j)])
            })
            .collect();
        Self { grid, pad, values }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    fn side(&self) -> usize {
        self.grid.nodes_per_axis() + 2 * self.pad
    }

    /// Value at lattice index `(i, j)`, where `0..=cells` are grid nodes.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        let p = self.pad as isize;
        debug_assert!(i >= -p && j >= -p);
        let side = self.side();
        self.values[(j + p) as usize * side + (i + p) as usize]
    }

    /// Pointwise `self - other` on the same lattice.
    pub fn difference(&self, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid);
        assert_eq!(self.pad, other.pad);
        Self {
            grid: self.grid,
            pad: self.pad,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    /// The grid nodes alone.
    pub fn nodes(&self) -> ScalarField {
        let n = self.grid.nodes_per_axis();
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n as isize {
            for i in 0..n as isize {
                values.push(self.at(i, j));
            }
        }
        ScalarField {
            grid: self.grid,
            values,
        }
    }

    /// 5-point Laplacian at every node. Needs `pad >= 1`.
    pub fn laplacian(&self) -> ScalarField {
        assert!(self.pad >= 1, "laplacian needs one padding layer");
        let n = self.grid.nodes_per_axis() as isize;
        let h = self.grid.spacing();
        let h2 = h * h;
        let mut values = Vec::with_capacity((n * n) as usize);
        for j in 0..n {
            for i in 0..n {
                let sum = self.at(i + 1, j) + self.at(i - 1, j) + self.at(i, j + 1) + self.at(i, j - 1);
                values.push((sum - 4.0 * self.at(i, j)) / h2);
            }
        }
        ScalarField {
            grid: self.grid,
            values,
        }
    }
}
