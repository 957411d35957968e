//! One-dimensional periodic position grid.

use crate::error::{Error, Result};

/// Largest grid size: one-body propagators are built as dense M×M matrices.
pub const MAX_POINTS: usize = 64;

/// Uniform periodic grid: M points at spacing Δx, positions x_j = j·Δx,
/// volume element ΔV = Δx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_points: usize,
    dx: f64,
}

impl Grid {
    pub fn new(n_points: usize, dx: f64) -> Result<Self> {
        if n_points == 0 || n_points > MAX_POINTS {
            return Err(Error::config(format!(
                "grid supports 1..={MAX_POINTS} points, got {n_points}"
            )));
        }
        if !dx.is_finite() || dx <= 0.0 {
            return Err(Error::config(format!("grid spacing must be positive, got {dx}")));
        }
        Ok(Grid { n_points, dx })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Volume element of one cell.
    pub fn volume(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.n_points as f64 * self.dx
    }

    pub fn position(&self, j: usize) -> f64 {
        debug_assert!(j < self.n_points);
        j as f64 * self.dx
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.position(j)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_and_accessors() {
        let g = Grid::new(4, 0.5).unwrap();
        assert_eq!(g.n_points(), 4);
        assert_eq!(g.volume(), 0.5);
        assert_eq!(g.length(), 2.0);
        assert_eq!(g.positions(), vec![0.0, 0.5, 1.0, 1.5]);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(Grid::new(0, 1.0).is_err());
        assert!(Grid::new(MAX_POINTS + 1, 1.0).is_err());
        assert!(Grid::new(4, 0.0).is_err());
        assert!(Grid::new(4, -1.0).is_err());
        assert!(Grid::new(4, f64::NAN).is_err());
    }
}
