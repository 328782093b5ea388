//! Staggered space-time layout for the dynamic-formulation solver.
//!
//! Free variables:
//!
//! - `rho`: densities on *interior* time faces `k = 1 .. K-1` (the two end
//!   faces hold the prescribed endpoint densities),
//! - `mm`: momenta at time centers x free spatial faces (all `n` faces on
//!   the circle, the `n - 1` interior faces on the interval; boundary
//!   faces are hard zeros),
//! - `zeta`: sources co-located with cells at time centers (absent for
//!   W2).
//!
//! The centered (action) variables live at time centers x cells and are
//! obtained by averaging `rho` in time and `mm` in space; `zeta` maps by
//! identity. Both the averaging operator and the space-time divergence
//! used by the continuity constraint are implemented here together with
//! their adjoints.

use crate::grid::{DomainKind, Grid};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub kind: DomainKind,
    pub n: usize,
    pub n_time: usize,
    pub h: f64,
    pub dt: f64,
    pub n_free_faces: usize,
    pub has_zeta: bool,
}

impl Layout {
    pub fn new(grid: &Grid, n_time: usize, has_zeta: bool) -> Layout {
        let n = grid.n_cells();
        let n_free_faces = match grid.kind() {
            DomainKind::Circle => n,
            DomainKind::Interval => n - 1,
        };
        Layout {
            kind: grid.kind(),
            n,
            n_time,
            h: grid.h(),
            dt: 1.0 / n_time as f64,
            n_free_faces,
            has_zeta,
        }
    }

    pub fn rho_len(&self) -> usize {
        (self.n_time - 1) * self.n
    }

    pub fn mm_len(&self) -> usize {
        self.n_time * self.n_free_faces
    }

    pub fn zeta_len(&self) -> usize {
        if self.has_zeta {
            self.n_time * self.n
        } else {
            0
        }
    }

    pub fn centered_len(&self) -> usize {
        self.n_time * self.n
    }
}

/// The staggered unknowns, stored flat.
#[derive(Debug, Clone)]
pub(crate) struct Staggered {
    pub rho: Vec<f64>,
    pub mm: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl Staggered {
    pub fn zeros(lay: &Layout) -> Staggered {
        Staggered {
            rho: vec![0.0; lay.rho_len()],
            mm: vec![0.0; lay.mm_len()],
            zeta: vec![0.0; lay.zeta_len()],
        }
    }

    pub fn axpy(&mut self, a: f64, other: &Staggered) {
        for (x, y) in self.rho.iter_mut().zip(&other.rho) {
            *x += a * y;
        }
        for (x, y) in self.mm.iter_mut().zip(&other.mm) {
            *x += a * y;
        }
        for (x, y) in self.zeta.iter_mut().zip(&other.zeta) {
            *x += a * y;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.rho.iter().map(|v| v * v).sum::<f64>()
            + self.mm.iter().map(|v| v * v).sum::<f64>()
            + self.zeta.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn dof(&self) -> usize {
        self.rho.len() + self.mm.len() + self.zeta.len()
    }
}

/// Centered action variables (time centers x cells).
#[derive(Debug, Clone)]
pub(crate) struct Centered {
    pub rho: Vec<f64>,
    pub mm: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl Centered {
    pub fn zeros(lay: &Layout) -> Centered {
        Centered {
            rho: vec![0.0; lay.centered_len()],
            mm: vec![0.0; lay.centered_len()],
            zeta: vec![0.0; lay.zeta_len()],
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.rho.iter().map(|v| v * v).sum::<f64>()
            + self.mm.iter().map(|v| v * v).sum::<f64>()
            + self.zeta.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn dof(&self) -> usize {
        self.rho.len() + self.mm.len() + self.zeta.len()
    }
}

impl Layout {
    /// Density at time face `kk` (0 and K resolve to the fixed endpoints).
    #[inline]
    fn rho_face(&self, u: &Staggered, rho0: &[f64], rho1: &[f64], kk: usize, i: usize) -> f64 {
        if kk == 0 {
            rho0[i]
        } else if kk == self.n_time {
            rho1[i]
        } else {
            u.rho[(kk - 1) * self.n + i]
        }
    }

    /// Spatial divergence of the momentum at time center `k`, cell `i`.
    #[inline]
    fn div_mm(&self, mm: &[f64], k: usize, i: usize) -> f64 {
        let base = k * self.n_free_faces;
        match self.kind {
            DomainKind::Circle => {
                let left = mm[base + i];
                let right = mm[base + (i + 1) % self.n];
                (right - left) / self.h
            }
            DomainKind::Interval => {
                let left = if i >= 1 { mm[base + i - 1] } else { 0.0 };
                let right = if i + 1 < self.n { mm[base + i] } else { 0.0 };
                (right - left) / self.h
            }
        }
    }

    /// Affine interpolation onto the centered grid (endpoint data included).
    pub fn interp(&self, u: &Staggered, rho0: &[f64], rho1: &[f64], out: &mut Centered) {
        let n = self.n;
        for k in 0..self.n_time {
            for i in 0..n {
                let a = self.rho_face(u, rho0, rho1, k, i);
                let b = self.rho_face(u, rho0, rho1, k + 1, i);
                out.rho[k * n + i] = 0.5 * (a + b);
            }
            let base = k * self.n_free_faces;
            for i in 0..n {
                out.mm[k * n + i] = match self.kind {
                    DomainKind::Circle => {
                        0.5 * (u.mm[base + i] + u.mm[base + (i + 1) % n])
                    }
                    DomainKind::Interval => {
                        let left = if i >= 1 { u.mm[base + i - 1] } else { 0.0 };
                        let right = if i + 1 < n { u.mm[base + i] } else { 0.0 };
                        0.5 * (left + right)
                    }
                };
            }
        }
        if self.has_zeta {
            out.zeta.copy_from_slice(&u.zeta);
        }
    }

    /// Adjoint of the linear part of [`Layout::interp`].
    pub fn interp_adjoint(&self, y: &Centered, out: &mut Staggered) {
        let n = self.n;
        for kk in 1..self.n_time {
            for i in 0..n {
                out.rho[(kk - 1) * n + i] =
                    0.5 * (y.rho[(kk - 1) * n + i] + y.rho[kk * n + i]);
            }
        }
        for k in 0..self.n_time {
            let base = k * self.n_free_faces;
            match self.kind {
                DomainKind::Circle => {
                    for q in 0..n {
                        let lcell = (q + n - 1) % n;
                        out.mm[base + q] = 0.5 * (y.mm[k * n + lcell] + y.mm[k * n + q]);
                    }
                }
                DomainKind::Interval => {
                    for q in 0..self.n_free_faces {
                        out.mm[base + q] = 0.5 * (y.mm[k * n + q] + y.mm[k * n + q + 1]);
                    }
                }
            }
        }
        if self.has_zeta {
            out.zeta.copy_from_slice(&y.zeta);
        }
    }

    /// Residual of the discrete continuity equation
    /// `(rho_{k+1} - rho_k)/dt + div mm - zeta` at every time center/cell.
    pub fn continuity(&self, u: &Staggered, rho0: &[f64], rho1: &[f64], out: &mut [f64]) {
        let n = self.n;
        for k in 0..self.n_time {
            for i in 0..n {
                let drho = (self.rho_face(u, rho0, rho1, k + 1, i)
                    - self.rho_face(u, rho0, rho1, k, i))
                    / self.dt;
                let z = if self.has_zeta { u.zeta[k * n + i] } else { 0.0 };
                out[k * n + i] = drho + self.div_mm(&u.mm, k, i) - z;
            }
        }
    }

    /// `u += scale * D^T lambda` where `D` is the continuity operator.
    pub fn add_scaled_continuity_adjoint(
        &self,
        lambda: &[f64],
        scale: f64,
        u: &mut Staggered,
    ) {
        let n = self.n;
        for kk in 1..self.n_time {
            for i in 0..n {
                let v = (lambda[(kk - 1) * n + i] - lambda[kk * n + i]) / self.dt;
                u.rho[(kk - 1) * n + i] += scale * v;
            }
        }
        for k in 0..self.n_time {
            let base = k * self.n_free_faces;
            match self.kind {
                DomainKind::Circle => {
                    for q in 0..n {
                        let lcell = (q + n - 1) % n;
                        let v = (lambda[k * n + lcell] - lambda[k * n + q]) / self.h;
                        u.mm[base + q] += scale * v;
                    }
                }
                DomainKind::Interval => {
                    for q in 0..self.n_free_faces {
                        let v = (lambda[k * n + q] - lambda[k * n + q + 1]) / self.h;
                        u.mm[base + q] += scale * v;
                    }
                }
            }
        }
        if self.has_zeta {
            for (slot, &l) in u.zeta.iter_mut().zip(lambda) {
                *slot -= scale * l;
            }
        }
    }
}
