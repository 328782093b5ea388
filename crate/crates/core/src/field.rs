//! Nonnegative cell-averaged densities with a cached total mass.

use crate::grid::{Grid, GridError};

/// A nonnegative density given by its cell averages. The total mass
/// `h * sum(values)` is computed on construction and kept in sync by every
/// mutating method, so reading it is free inside solver loops.
#[derive(Debug, Clone)]
pub struct DensityField {
    values: Vec<f64>,
    mass: f64,
}

impl DensityField {
    /// Wraps cell values, rejecting length mismatches and negative entries.
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<DensityField, GridError> {
        let mass = grid.integrate(&values)?;
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(GridError::InvalidGrid);
        }
        Ok(DensityField { values, mass })
    }

    /// Builds a density by sampling `f` at the cell centers.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<DensityField, GridError> {
        let values: Vec<f64> = grid.cell_centers().iter().map(|&x| f(x)).collect();
        DensityField::new(grid, values)
    }

    pub fn constant(grid: &Grid, value: f64) -> Result<DensityField, GridError> {
        DensityField::new(grid, vec![value; grid.n_cells()])
    }

    /// Internal fast path: caller guarantees nonnegativity.
    pub(crate) fn from_raw(grid: &Grid, values: Vec<f64>) -> DensityField {
        let mass = grid.h() * values.iter().sum::<f64>();
        DensityField { values, mass }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Returns the density scaled by `factor >= 0`, mass scaled alongside.
    pub fn scaled(&self, factor: f64) -> DensityField {
        DensityField {
            values: self.values.iter().map(|v| v * factor).collect(),
            mass: self.mass * factor,
        }
    }

    /// Rescales so the total mass equals `target` (requires positive mass).
    pub fn normalized_to(&self, target: f64) -> Option<DensityField> {
        if self.mass <= 0.0 {
            return None;
        }
        Some(self.scaled(target / self.mass))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_matches_quadrature() {
        let grid = Grid::circle(50, 2.0).unwrap();
        let u = DensityField::from_fn(&grid, |x| 1.0 + 0.5 * x).unwrap();
        let direct = grid.integrate(u.values()).unwrap();
        assert_eq!(u.mass(), direct);
    }

    #[test]
    fn negative_values_rejected() {
        let grid = Grid::circle(4, 1.0).unwrap();
        assert!(DensityField::new(&grid, vec![1.0, -0.1, 1.0, 1.0]).is_err());
    }

    #[test]
    fn normalization_hits_target() {
        let grid = Grid::interval(32, 1.0).unwrap();
        let u = DensityField::constant(&grid, 0.25).unwrap();
        let v = u.normalized_to(1.0).unwrap();
        assert!((v.mass() - 1.0).abs() < 1e-14);
    }
}
