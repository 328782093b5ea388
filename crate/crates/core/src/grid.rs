//! Uniform 1D grids and their discrete calculus.
//!
//! Densities are cell averages; fluxes live on faces. Two boundary rules:
//!
//! - `Circle`: periodic, `n` faces, indexing wraps modulo `n`;
//! - `Interval`: `n + 1` faces, the two boundary faces always carry zero
//!   flux (the discrete form of `u df/dnu = 0`).
//!
//! Integration is the midpoint rule `h * sum`. The gradient/divergence pair
//! below satisfies a discrete integration-by-parts identity exactly, so
//! `integrate(divergence(F)) = 0` is structural for any flux `F`.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Circle,
    Interval,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("field has {got} values but the grid has {want} cells")]
    CellCountMismatch { got: usize, want: usize },
    #[error("flux has {got} values but the grid has {want} faces")]
    FaceCountMismatch { got: usize, want: usize },
    #[error("grid needs at least one cell and a positive length")]
    InvalidGrid,
}

/// Uniform discretization of a circle of circumference `length` or of the
/// interval `[0, length]`.
#[derive(Debug, Clone)]
pub struct Grid {
    kind: DomainKind,
    n_cells: usize,
    length: f64,
    h: f64,
    cell_centers: Vec<f64>,
    face_positions: Vec<f64>,
}

impl Grid {
    pub fn new(kind: DomainKind, n_cells: usize, length: f64) -> Result<Grid, GridError> {
        if n_cells == 0 || !(length > 0.0) || !length.is_finite() {
            return Err(GridError::InvalidGrid);
        }
        let h = length / n_cells as f64;
        let cell_centers = (0..n_cells).map(|i| (i as f64 + 0.5) * h).collect();
        let n_faces = match kind {
            DomainKind::Circle => n_cells,
            DomainKind::Interval => n_cells + 1,
        };
        let face_positions = (0..n_faces).map(|j| j as f64 * h).collect();
        Ok(Grid { kind, n_cells, length, h, cell_centers, face_positions })
    }

    pub fn circle(n_cells: usize, length: f64) -> Result<Grid, GridError> {
        Grid::new(DomainKind::Circle, n_cells, length)
    }

    pub fn interval(n_cells: usize, length: f64) -> Result<Grid, GridError> {
        Grid::new(DomainKind::Interval, n_cells, length)
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_faces(&self) -> usize {
        self.face_positions.len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_centers(&self) -> &[f64] {
        &self.cell_centers
    }

    pub fn face_positions(&self) -> &[f64] {
        &self.face_positions
    }

    /// Cells adjacent to face `j` as `(left, right)`. Boundary faces of an
    /// interval return `None` (they never carry flux).
    pub fn face_neighbors(&self, j: usize) -> Option<(usize, usize)> {
        match self.kind {
            DomainKind::Circle => {
                let n = self.n_cells;
                Some((((j + n) - 1) % n, j % n))
            }
            DomainKind::Interval => {
                if j == 0 || j == self.n_cells {
                    None
                } else {
                    Some((j - 1, j))
                }
            }
        }
    }

    fn check_cells(&self, len: usize) -> Result<(), GridError> {
        if len != self.n_cells {
            Err(GridError::CellCountMismatch { got: len, want: self.n_cells })
        } else {
            Ok(())
        }
    }

    fn check_faces(&self, len: usize) -> Result<(), GridError> {
        if len != self.n_faces() {
            Err(GridError::FaceCountMismatch { got: len, want: self.n_faces() })
        } else {
            Ok(())
        }
    }

    /// Midpoint-rule integral `h * sum(field)`.
    pub fn integrate(&self, field: &[f64]) -> Result<f64, GridError> {
        self.check_cells(field.len())?;
        Ok(self.h * field.iter().sum::<f64>())
    }

    /// Centered difference of a cell field at the faces. Interval boundary
    /// faces are zero.
    pub fn gradient_faces(&self, field: &[f64]) -> Result<Vec<f64>, GridError> {
        self.check_cells(field.len())?;
        let mut out = vec![0.0; self.n_faces()];
        self.gradient_faces_into(field, &mut out);
        Ok(out)
    }

    pub(crate) fn gradient_faces_into(&self, field: &[f64], out: &mut [f64]) {
        debug_assert_eq!(field.len(), self.n_cells);
        debug_assert_eq!(out.len(), self.n_faces());
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = match self.face_neighbors(j) {
                Some((l, r)) => (field[r] - field[l]) / self.h,
                None => 0.0,
            };
        }
    }

    /// Conservative divergence `(F_{i+1/2} - F_{i-1/2}) / h` of a face flux.
    pub fn divergence_cells(&self, flux: &[f64]) -> Result<Vec<f64>, GridError> {
        self.check_faces(flux.len())?;
        let mut out = vec![0.0; self.n_cells];
        self.divergence_cells_into(flux, &mut out);
        Ok(out)
    }

    pub(crate) fn divergence_cells_into(&self, flux: &[f64], out: &mut [f64]) {
        debug_assert_eq!(flux.len(), self.n_faces());
        debug_assert_eq!(out.len(), self.n_cells);
        let n = self.n_cells;
        for (i, slot) in out.iter_mut().enumerate() {
            let (left, right) = match self.kind {
                DomainKind::Circle => (flux[i], flux[(i + 1) % n]),
                DomainKind::Interval => (flux[i], flux[i + 1]),
            };
            *slot = (right - left) / self.h;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_circle(n: usize) -> Grid {
        Grid::circle(n, 1.0).unwrap()
    }

    #[test]
    fn quadrature_weights_sum_to_length() {
        for grid in [Grid::circle(64, 2.5).unwrap(), Grid::interval(37, 0.7).unwrap()] {
            let ones = vec![1.0; grid.n_cells()];
            let total = grid.integrate(&ones).unwrap();
            assert!((total - grid.length()).abs() < 1e-12);
        }
    }

    #[test]
    fn integrate_constant_on_unit_domain() {
        let grid = unit_circle(64);
        let field = vec![1.0; 64];
        assert!((grid.integrate(&field).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn integrate_cosine_is_zero() {
        let grid = unit_circle(64);
        let field: Vec<f64> = grid
            .cell_centers()
            .iter()
            .map(|&x| (2.0 * std::f64::consts::PI * x).cos())
            .collect();
        assert!(grid.integrate(&field).unwrap().abs() < 1e-12);
    }

    #[test]
    fn integrate_linear_on_interval() {
        // Midpoint rule is exact for linear integrands.
        let grid = Grid::interval(128, 1.0).unwrap();
        let field: Vec<f64> = grid.cell_centers().to_vec();
        assert!((grid.integrate(&field).unwrap() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let grid = unit_circle(32);
        let grad = grid.gradient_faces(&vec![3.7; 32]).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_of_sine_matches_taylor_bound() {
        let tau = 2.0 * std::f64::consts::PI;
        let grid = unit_circle(128);
        let field: Vec<f64> = grid.cell_centers().iter().map(|&x| (tau * x).sin()).collect();
        let grad = grid.gradient_faces(&field).unwrap();
        let h = grid.h();
        let bound = tau.powi(3) * h * h / 6.0;
        for (j, &g) in grad.iter().enumerate() {
            let exact = tau * (tau * grid.face_positions()[j]).cos();
            assert!((g - exact).abs() <= bound, "face {j}: {g} vs {exact}");
        }
    }

    #[test]
    fn interval_boundary_faces_are_zero() {
        let grid = Grid::interval(16, 1.0).unwrap();
        let field: Vec<f64> = (0..16).map(|i| (i as f64).sin() + 2.0).collect();
        let grad = grid.gradient_faces(&field).unwrap();
        assert_eq!(grad[0], 0.0);
        assert_eq!(grad[16], 0.0);
    }

    #[test]
    fn divergence_of_sine_flux() {
        let tau = 2.0 * std::f64::consts::PI;
        let grid = unit_circle(128);
        let flux: Vec<f64> =
            grid.face_positions().iter().map(|&x| (tau * x).sin()).collect();
        let div = grid.divergence_cells(&flux).unwrap();
        let h = grid.h();
        let bound = tau.powi(3) * h * h / 6.0;
        for (i, &d) in div.iter().enumerate() {
            let exact = tau * (tau * grid.cell_centers()[i]).cos();
            assert!((d - exact).abs() <= bound);
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let grid = unit_circle(8);
        assert!(grid.integrate(&[1.0; 7]).is_err());
        assert!(grid.gradient_faces(&[1.0; 9]).is_err());
        assert!(grid.divergence_cells(&[1.0; 9]).is_err());
    }

    proptest! {
        /// Conservation is structural: any flux integrates to zero exactly.
        #[test]
        fn divergence_integrates_to_zero(values in proptest::collection::vec(-10.0f64..10.0, 24)) {
            for grid in [Grid::circle(24, 1.0).unwrap(), Grid::interval(23, 1.0).unwrap()] {
                let mut flux = values.clone();
                if let DomainKind::Interval = grid.kind() {
                    flux[0] = 0.0;
                    flux[23] = 0.0;
                }
                let div = grid.divergence_cells(&flux).unwrap();
                let total = grid.integrate(&div).unwrap();
                prop_assert!(total.abs() < 1e-12);
            }
        }

        /// Discrete integration by parts:
        /// sum_i div(F)_i phi_i h = -sum_j F_j grad(phi)_j h, both boundary kinds.
        #[test]
        fn discrete_integration_by_parts(
            flux_vals in proptest::collection::vec(-5.0f64..5.0, 33),
            phi in proptest::collection::vec(-5.0f64..5.0, 32),
        ) {
            for grid in [Grid::circle(32, 1.0).unwrap(), Grid::interval(32, 1.0).unwrap()] {
                let mut flux = flux_vals[..grid.n_faces()].to_vec();
                if let DomainKind::Interval = grid.kind() {
                    flux[0] = 0.0;
                    flux[32] = 0.0;
                }
                let div = grid.divergence_cells(&flux).unwrap();
                let lhs: f64 = div.iter().zip(&phi).map(|(d, p)| d * p).sum::<f64>() * grid.h();
                let grad = grid.gradient_faces(&phi).unwrap();
                let rhs: f64 =
                    -grad.iter().zip(&flux).map(|(g, f)| g * f).sum::<f64>() * grid.h();
                prop_assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
            }
        }
    }
}
