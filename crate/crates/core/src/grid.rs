//! Fixed 2-D evaluation grid and normalized densities on it.
//!
//! Every distributional metric in the suite (TV, KL, expectations, KDE
//! comparisons) is computed on one shared grid, so that all numbers are
//! midpoint-rule quadratures over the same cells. Densities are built in log
//! space and only exponentiated here, at the normalization boundary.

use crate::error::{Error, Result};
use crate::point::Point;
use rayon::prelude::*;

/// Density floor applied before any logarithm; below this a cell counts as
/// unsupported when deciding KL finiteness.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Self {
        assert!(nx >= 2 && ny >= 2, "grid needs at least 2x2 cells");
        assert!(xmax > xmin && ymax > ymin, "degenerate extent");
        Grid2D {
            xmin,
            xmax,
            ymin,
            ymax,
            nx,
            ny,
        }
    }

    /// The default evaluation window: `[-6,6]^2` at 600x600. The quad-corner
    /// prior carries less than 1e-8 of its mass outside.
    pub fn standard() -> Self {
        Grid2D::new(-6.0, 6.0, -6.0, 6.0, 600, 600)
    }

    pub fn dx(&self) -> f64 {
        (self.xmax - self.xmin) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.ymax - self.ymin) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Center of cell `(ix, iy)`; storage is row-major with `iy` varying slowest.
    pub fn center(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            self.xmin + (ix as f64 + 0.5) * self.dx(),
            self.ymin + (iy as f64 + 0.5) * self.dy(),
        )
    }

    pub fn center_of_index(&self, idx: usize) -> Point {
        self.center(idx % self.nx, idx / self.nx)
    }

    /// Evaluate `f` at every cell center, row-major, in parallel.
    pub fn map_centers<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        let nx = self.nx;
        (0..self.len())
            .into_par_iter()
            .map(|idx| f(self.center(idx % nx, idx / nx)))
            .collect()
    }
}

/// Nonnegative cell values integrating to one (midpoint rule).
#[derive(Debug, Clone)]
pub struct GridDensity {
    grid: Grid2D,
    values: Vec<f64>,
}

/// KL divergence outcome: the infinite case is a first-class flag, never a
/// large float, so support violations stay testable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KlDivergence {
    Finite(f64),
    Infinite,
}

impl KlDivergence {
    pub fn finite(self) -> Option<f64> {
        match self {
            KlDivergence::Finite(v) => Some(v),
            KlDivergence::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, KlDivergence::Infinite)
    }

    /// Unwrap a value that the caller knows must be finite.
    pub fn expect_finite(self, context: &str) -> f64 {
        match self {
            KlDivergence::Finite(v) => v,
            KlDivergence::Infinite => panic!("KL unexpectedly infinite: {context}"),
        }
    }
}

impl GridDensity {
    /// Normalize raw nonnegative values into a density.
    pub fn from_values(grid: Grid2D, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        let total: f64 = values.iter().sum::<f64>() * grid.cell_area();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid mass {total} is not normalizable"
            )));
        }
        values.iter_mut().for_each(|v| *v /= total);
        Ok(GridDensity { grid, values })
    }

    /// Build from a log-density, shifting by the maximum before exponentiating.
    pub fn from_log_density<F>(grid: Grid2D, log_density: F) -> Result<Self>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        let logs = grid.map_centers(log_density);
        Self::from_log_values(grid, logs)
    }

    pub fn from_log_values(grid: Grid2D, logs: Vec<f64>) -> Result<Self> {
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::InvalidParameter(
                "log density is -inf or NaN everywhere on the grid".into(),
            ));
        }
        let values: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    fn check_same_grid(&self, other: &GridDensity) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Total variation distance, `0.5 * sum |a - b| * dA`, in `[0, 1]`.
    pub fn tv(&self, other: &GridDensity) -> Result<f64> {
        self.check_same_grid(other)?;
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(0.5 * sum * self.grid.cell_area())
    }

    /// `KL(self || other)` with `0 log 0 = 0`; infinite when this density has
    /// mass on cells where the other is below the floor.
    pub fn kl(&self, other: &GridDensity) -> Result<KlDivergence> {
        self.check_same_grid(other)?;
        let mut acc = 0.0;
        for (&q, &p) in self.values.iter().zip(&other.values) {
            if q <= DENSITY_FLOOR {
                continue;
            }
            if p <= DENSITY_FLOOR {
                return Ok(KlDivergence::Infinite);
            }
            acc += q * (q / p).ln();
        }
        Ok(KlDivergence::Finite(acc * self.grid.cell_area()))
    }

    /// Midpoint-rule expectation of `f` under this density.
    pub fn expectation<F>(&self, f: F) -> f64
    where
        F: Fn(Point) -> f64 + Sync,
    {
        let nx = self.grid.nx;
        let partial: Vec<f64> = self
            .values
            .par_chunks(nx)
            .enumerate()
            .map(|(iy, row)| {
                row.iter()
                    .enumerate()
                    .map(|(ix, &v)| v * f(self.grid.center(ix, iy)))
                    .sum::<f64>()
            })
            .collect();
        partial.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Mass of the region where `predicate` holds.
    pub fn mass_where<F>(&self, predicate: F) -> f64
    where
        F: Fn(Point) -> bool + Sync,
    {
        self.expectation(|p| if predicate(p) { 1.0 } else { 0.0 })
    }

    /// Cell center and value of the (first) largest cell.
    pub fn argmax(&self) -> (Point, f64) {
        let (idx, &v) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is nonempty");
        (self.grid.center_of_index(idx), v)
    }
}

/// Isotropic Gaussian KDE of a sample set, evaluated on the grid and
/// normalized. Kernels are truncated at six bandwidths (relative mass below
/// 1e-8) and accumulated separably per sample.
pub fn kde_to_grid(samples: &[Point], bandwidth: f64, grid: Grid2D) -> Result<GridDensity> {
    if samples.len() < 2 {
        return Err(Error::EmptySampleSet);
    }
    if !bandwidth.is_finite() || bandwidth <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bandwidth {bandwidth} must be positive"
        )));
    }
    let radius = 6.0 * bandwidth;
    let inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    let nx = grid.nx;
    let ny = grid.ny;
    let dx = grid.dx();
    let dy = grid.dy();

    let accumulate = |chunk: &[Point]| -> Vec<f64> {
        let mut local = vec![0.0f64; grid.len()];
        let mut wx = Vec::new();
        let mut wy = Vec::new();
        for &s in chunk {
            let ix0 = (((s.x - radius) - grid.xmin) / dx).floor().max(0.0) as usize;
            let ix1 = ((((s.x + radius) - grid.xmin) / dx).ceil() as usize).min(nx);
            let iy0 = (((s.y - radius) - grid.ymin) / dy).floor().max(0.0) as usize;
            let iy1 = ((((s.y + radius) - grid.ymin) / dy).ceil() as usize).min(ny);
            if ix0 >= ix1 || iy0 >= iy1 {
                continue;
            }
            wx.clear();
            wy.clear();
            for ix in ix0..ix1 {
                let cx = grid.xmin + (ix as f64 + 0.5) * dx;
                let d = cx - s.x;
                wx.push((-d * d * inv_two_h2).exp());
            }
            for iy in iy0..iy1 {
                let cy = grid.ymin + (iy as f64 + 0.5) * dy;
                let d = cy - s.y;
                wy.push((-d * d * inv_two_h2).exp());
            }
            for (j, &vy) in wy.iter().enumerate() {
                let row = (iy0 + j) * nx;
                for (i, &vx) in wx.iter().enumerate() {
                    local[row + ix0 + i] += vx * vy;
                }
            }
        }
        local
    };

    // Fixed chunking keeps the reduction order, and thus the output bits,
    // independent of thread scheduling.
    let partials: Vec<Vec<f64>> = samples.par_chunks(8192).map(accumulate).collect();
    let mut values = vec![0.0f64; grid.len()];
    for part in partials {
        for (v, p) in values.iter_mut().zip(part) {
            *v += p;
        }
    }
    GridDensity::from_values(grid, values)
}
