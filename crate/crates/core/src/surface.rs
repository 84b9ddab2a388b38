use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    ValueQ0,
    RiskTolerance,
    CorrectionQ1,
    Strategy,
}

/// Nodal values over the full space-time grid, row-major with the time index
/// n (from the terminal layer) outermost: row 0 is t = T, row n_count is t = 0.
#[derive(Debug, Clone)]
pub struct Surface {
    pub grid: Arc<Grid>,
    pub kind: SurfaceKind,
    values: Vec<f64>,
}

impl Surface {
    pub fn zeros(grid: Arc<Grid>, kind: SurfaceKind) -> Self {
        let len = (grid.n_count + 1) * (grid.j_count + 1);
        Surface { grid, kind, values: vec![0.0; len] }
    }

    pub fn from_fn(grid: Arc<Grid>, kind: SurfaceKind, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Surface::zeros(grid, kind);
        let (rows, cols) = (s.grid.n_count + 1, s.grid.j_count + 1);
        for n in 0..rows {
            for j in 0..cols {
                s.values[n * cols + j] = f(n, j);
            }
        }
        s
    }

    #[inline]
    pub fn at(&self, n: usize, j: usize) -> f64 {
        self.values[n * (self.grid.j_count + 1) + j]
    }

    #[inline]
    pub fn set(&mut self, n: usize, j: usize, v: f64) {
        let cols = self.grid.j_count + 1;
        self.values[n * cols + j] = v;
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let cols = self.grid.j_count + 1;
        &self.values[n * cols..(n + 1) * cols]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        let cols = self.grid.j_count + 1;
        &mut self.values[n * cols..(n + 1) * cols]
    }

    /// Splits at row boundary so row `n` can be read while row `n + 1` is written.
    pub fn rows_prev_next(&mut self, n: usize) -> (&[f64], &mut [f64]) {
        let cols = self.grid.j_count + 1;
        let (head, tail) = self.values.split_at_mut((n + 1) * cols);
        (&head[n * cols..], &mut tail[..cols])
    }

    pub fn n_rows(&self) -> usize {
        self.grid.n_count + 1
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &Surface) -> Result<()> {
        if *self.grid != *other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Interior margin used by pointwise cross-checks between solved surfaces.
pub const CHECK_MARGIN_FRACTION: f64 = 0.10;

/// Wider margin for the operator identities, which stack up to three
/// derivatives of the boundary layer.
pub const IDENTITY_MARGIN_FRACTION: f64 = 0.15;

/// Node margin covering the given fraction of the domain width. Max-norm
/// checks against the copy-rule boundary emulation must exclude a fixed
/// physical width, not a fixed node count: the emulation shifts the effective
/// boundary by dxi/2, so the relative error k nodes from the wall scales like
/// 1/(2k) and fixed-index exclusions would never shrink under refinement.
pub fn margin_nodes(j_count: usize, fraction: f64) -> usize {
    ((j_count as f64 * fraction).ceil() as usize).max(1)
}
