//! Exact projection onto the affine continuity constraints.
//!
//! Projecting `U` onto `{D U = b}` needs one solve with `D D^T`, which for
//! the staggered layout is the Kronecker sum
//!
//! `D D^T = T/dt^2 (x) I  +  I (x) L/h^2  +  sigma I`,
//!
//! `T` the reflecting (Neumann) tridiagonal Laplacian in time, `L` the
//! cyclic or Neumann Laplacian in space, and `sigma = 1` exactly when a
//! source variable exists. `T` is diagonalized analytically by the
//! orthonormal cosine basis `Q[k][j] = c_j cos(pi j (k+1/2) / K)` with
//! eigenvalues `4 sin^2(pi j / 2K)`, so one projection is two dense K x K
//! time transforms plus one tridiagonal (or cyclic-tridiagonal) solve per
//! time mode. No FFTs.
//!
//! For W2 (`sigma = 0`) the `j = 0` mode is singular with constant
//! nullspace; the mass-compatibility of the endpoints makes the system
//! consistent and any particular solution yields the same projection, so
//! that mode is solved with one variable pinned to zero.
//!
//! The spherical (HKS) per-slice mass constraint lives entirely in the
//! spatial-mean sector, which the continuity solve leaves invariant; the
//! exact projection onto the intersection is therefore "assign the slice
//! means, then project onto continuity", done here in that order.

use crate::grid::DomainKind;

use super::stagger::{Layout, Staggered};

/// Prefactored Thomas solver for a fixed tridiagonal system.
struct Tridiag {
    w: Vec<f64>,
    diag_mod: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiag {
    /// Factors the tridiagonal matrix with diagonal `diag`, sub/super
    /// diagonal constant `off`.
    fn new(diag: Vec<f64>, off: f64) -> Tridiag {
        let n = diag.len();
        let mut w = vec![0.0; n];
        let mut dm = diag;
        let upper = vec![off; n.saturating_sub(1)];
        for i in 1..n {
            w[i] = off / dm[i - 1];
            dm[i] -= w[i] * off;
        }
        Tridiag { w, diag_mod: dm, upper }
    }

    fn solve_into(&self, r: &[f64], x: &mut [f64]) {
        let n = self.diag_mod.len();
        x[0] = r[0];
        for i in 1..n {
            x[i] = r[i] - self.w[i] * x[i - 1];
        }
        x[n - 1] /= self.diag_mod[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - self.upper[i] * x[i + 1]) / self.diag_mod[i];
        }
    }
}

/// Cyclic tridiagonal solver (constant coefficients) via Sherman-Morrison.
struct Cyclic {
    base: Tridiag,
    z: Vec<f64>,
    corner_over_gamma: f64,
    denom: f64,
}

impl Cyclic {
    fn new(n: usize, d: f64, o: f64) -> Cyclic {
        let gamma = -d;
        let mut diag = vec![d; n];
        diag[0] = d - gamma;
        diag[n - 1] = d - o * o / gamma;
        let base = Tridiag::new(diag, o);
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = o;
        let mut z = vec![0.0; n];
        base.solve_into(&u, &mut z);
        let corner_over_gamma = o / gamma;
        let denom = 1.0 + z[0] + corner_over_gamma * z[n - 1];
        Cyclic { base, z, corner_over_gamma, denom }
    }

    fn solve_into(&self, r: &[f64], x: &mut [f64]) {
        let n = self.z.len();
        self.base.solve_into(r, x);
        let fact = (x[0] + self.corner_over_gamma * x[n - 1]) / self.denom;
        for i in 0..n {
            x[i] -= fact * self.z[i];
        }
    }
}

enum SpatialSolver {
    Cyclic(Cyclic),
    Tridiag(Tridiag),
    /// Rank-deficient mode: solve with the last unknown pinned to zero.
    Reduced(Tridiag),
}

impl SpatialSolver {
    fn solve_into(&self, r: &[f64], x: &mut [f64]) {
        match self {
            SpatialSolver::Cyclic(c) => c.solve_into(r, x),
            SpatialSolver::Tridiag(t) => t.solve_into(r, x),
            SpatialSolver::Reduced(t) => {
                let n = x.len();
                t.solve_into(&r[..n - 1], &mut x[..n - 1]);
                x[n - 1] = 0.0;
            }
        }
    }
}

pub(crate) struct Projector {
    lay: Layout,
    /// Orthonormal time eigenbasis, `q[k * K + j]`.
    q: Vec<f64>,
    solvers: Vec<SpatialSolver>,
    /// Per-slice density mean and zero source mean to enforce (HKS).
    slice_mean: Option<f64>,
    // scratch
    resid: Vec<f64>,
    hat: Vec<f64>,
    lambda: Vec<f64>,
    row_in: Vec<f64>,
    row_out: Vec<f64>,
}

impl Projector {
    pub fn new(lay: Layout, slice_mean: Option<f64>) -> Projector {
        let kt = lay.n_time;
        let n = lay.n;
        let mut q = vec![0.0; kt * kt];
        for j in 0..kt {
            let norm = if j == 0 { (1.0 / kt as f64).sqrt() } else { (2.0 / kt as f64).sqrt() };
            for k in 0..kt {
                q[k * kt + j] =
                    norm * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / kt as f64).cos();
            }
        }
        let sigma = if lay.has_zeta { 1.0 } else { 0.0 };
        let h2 = lay.h * lay.h;
        let solvers = (0..kt)
            .map(|j| {
                let s = (std::f64::consts::PI * j as f64 / (2.0 * kt as f64)).sin();
                let lam_t = 4.0 * s * s;
                let base = lam_t / (lay.dt * lay.dt) + sigma;
                let singular = j == 0 && !lay.has_zeta;
                match (lay.kind, singular) {
                    (DomainKind::Circle, false) => {
                        SpatialSolver::Cyclic(Cyclic::new(n, base + 2.0 / h2, -1.0 / h2))
                    }
                    (DomainKind::Circle, true) => {
                        let diag = vec![2.0 / h2; n - 1];
                        SpatialSolver::Reduced(Tridiag::new(diag, -1.0 / h2))
                    }
                    (DomainKind::Interval, false) => {
                        let mut diag = vec![base + 2.0 / h2; n];
                        diag[0] = base + 1.0 / h2;
                        diag[n - 1] = base + 1.0 / h2;
                        SpatialSolver::Tridiag(Tridiag::new(diag, -1.0 / h2))
                    }
                    (DomainKind::Interval, true) => {
                        let mut diag = vec![2.0 / h2; n - 1];
                        diag[0] = 1.0 / h2;
                        SpatialSolver::Reduced(Tridiag::new(diag, -1.0 / h2))
                    }
                }
            })
            .collect();
        Projector {
            lay,
            q,
            solvers,
            slice_mean,
            resid: vec![0.0; kt * n],
            hat: vec![0.0; kt * n],
            lambda: vec![0.0; kt * n],
            row_in: vec![0.0; n],
            row_out: vec![0.0; n],
        }
    }

    /// Orthogonal projection of `u` onto the constraint set (continuity
    /// with the fixed endpoints; plus per-slice masses when configured).
    pub fn project(&mut self, u: &mut Staggered, rho0: &[f64], rho1: &[f64]) {
        let n = self.lay.n;
        let kt = self.lay.n_time;

        if let Some(mean) = self.slice_mean {
            for kk in 0..kt - 1 {
                let row = &mut u.rho[kk * n..(kk + 1) * n];
                let cur = row.iter().sum::<f64>() / n as f64;
                let shift = mean - cur;
                for v in row {
                    *v += shift;
                }
            }
            for k in 0..kt {
                let row = &mut u.zeta[k * n..(k + 1) * n];
                let cur = row.iter().sum::<f64>() / n as f64;
                for v in row {
                    *v -= cur;
                }
            }
        }

        self.lay.continuity(u, rho0, rho1, &mut self.resid);

        // hat = Q^T resid (time transform, per cell)
        for j in 0..kt {
            for i in 0..n {
                let mut acc = 0.0;
                for k in 0..kt {
                    acc += self.q[k * kt + j] * self.resid[k * n + i];
                }
                self.hat[j * n + i] = acc;
            }
        }
        // solve per time mode
        for (j, solver) in self.solvers.iter().enumerate() {
            self.row_in.copy_from_slice(&self.hat[j * n..(j + 1) * n]);
            solver.solve_into(&self.row_in, &mut self.row_out);
            self.hat[j * n..(j + 1) * n].copy_from_slice(&self.row_out);
        }
        // lambda = Q hat
        for k in 0..kt {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..kt {
                    acc += self.q[k * kt + j] * self.hat[j * n + i];
                }
                self.lambda[k * n + i] = acc;
            }
        }
        self.lay.add_scaled_continuity_adjoint(&self.lambda, -1.0, u);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::seeded::SplitMix64;

    fn setup(kind: DomainKind, n: usize, kt: usize, has_zeta: bool) -> (Layout, Vec<f64>, Vec<f64>) {
        let grid = Grid::new(kind, n, 1.0).unwrap();
        let lay = Layout::new(&grid, kt, has_zeta);
        let rho0 = vec![1.0 / n as f64 / grid.h(); n];
        let rho1 = rho0.clone();
        (lay, rho0, rho1)
    }

    fn residual_norm(lay: &Layout, u: &Staggered, rho0: &[f64], rho1: &[f64]) -> f64 {
        let mut r = vec![0.0; lay.centered_len()];
        lay.continuity(u, rho0, rho1, &mut r);
        r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn projection_lands_on_constraint_and_is_idempotent() {
        let mut rng = SplitMix64::new(31);
        for kind in [DomainKind::Circle, DomainKind::Interval] {
            for has_zeta in [true, false] {
                let (lay, rho0, rho1) = setup(kind, 12, 6, has_zeta);
                let mut proj = Projector::new(lay, None);
                let mut u = Staggered::zeros(&lay);
                for v in u.rho.iter_mut().chain(u.mm.iter_mut()).chain(u.zeta.iter_mut()) {
                    *v = rng.next_in(-1.0, 1.0);
                }
                proj.project(&mut u, &rho0, &rho1);
                let r1 = residual_norm(&lay, &u, &rho0, &rho1);
                assert!(r1 < 1e-9, "{kind:?} zeta={has_zeta}: residual {r1:e}");
                let before = u.clone();
                proj.project(&mut u, &rho0, &rho1);
                let mut diff: f64 = 0.0;
                for (a, b) in u.rho.iter().zip(&before.rho) {
                    diff = diff.max((a - b).abs());
                }
                for (a, b) in u.mm.iter().zip(&before.mm) {
                    diff = diff.max((a - b).abs());
                }
                assert!(diff < 1e-9, "projection not idempotent: {diff:e}");
            }
        }
    }

    #[test]
    fn projection_is_least_change() {
        // P(u) is the closest feasible point: for any feasible w,
        // <u - P(u), w - P(u)> = 0 up to solver accuracy.
        let mut rng = SplitMix64::new(77);
        let (lay, rho0, rho1) = setup(DomainKind::Circle, 8, 4, true);
        let mut proj = Projector::new(lay, None);
        let mut u = Staggered::zeros(&lay);
        for v in u.rho.iter_mut().chain(u.mm.iter_mut()).chain(u.zeta.iter_mut()) {
            *v = rng.next_in(-1.0, 1.0);
        }
        let orig = u.clone();
        proj.project(&mut u, &rho0, &rho1);
        // another feasible point
        let mut w = Staggered::zeros(&lay);
        for v in w.rho.iter_mut().chain(w.mm.iter_mut()).chain(w.zeta.iter_mut()) {
            *v = rng.next_in(-1.0, 1.0);
        }
        proj.project(&mut w, &rho0, &rho1);
        let mut inner = 0.0;
        for ((a, p), q) in orig.rho.iter().zip(&u.rho).zip(&w.rho) {
            inner += (a - p) * (q - p);
        }
        for ((a, p), q) in orig.mm.iter().zip(&u.mm).zip(&w.mm) {
            inner += (a - p) * (q - p);
        }
        for ((a, p), q) in orig.zeta.iter().zip(&u.zeta).zip(&w.zeta) {
            inner += (a - p) * (q - p);
        }
        assert!(inner.abs() < 1e-9, "projection not orthogonal: {inner:e}");
    }

    #[test]
    fn hks_mean_assignment_holds_after_projection() {
        let (lay, rho0, rho1) = setup(DomainKind::Circle, 10, 5, true);
        let mean = rho0.iter().sum::<f64>() / 10.0;
        let mut proj = Projector::new(lay, Some(mean));
        let mut rng = SplitMix64::new(5);
        let mut u = Staggered::zeros(&lay);
        for v in u.rho.iter_mut().chain(u.mm.iter_mut()).chain(u.zeta.iter_mut()) {
            *v = rng.next_in(-1.0, 1.0);
        }
        proj.project(&mut u, &rho0, &rho1);
        for kk in 0..4 {
            let slice_mean = u.rho[kk * 10..(kk + 1) * 10].iter().sum::<f64>() / 10.0;
            assert!((slice_mean - mean).abs() < 1e-10);
        }
        for k in 0..5 {
            let zmean = u.zeta[k * 10..(k + 1) * 10].iter().sum::<f64>() / 10.0;
            assert!(zmean.abs() < 1e-10);
        }
        assert!(residual_norm(&lay, &u, &rho0, &rho1) < 1e-9);
    }

    #[test]
    fn w2_singular_mode_is_consistent_for_equal_masses() {
        for kind in [DomainKind::Circle, DomainKind::Interval] {
            let (lay, rho0, rho1) = setup(kind, 9, 4, false);
            let mut proj = Projector::new(lay, None);
            let mut u = Staggered::zeros(&lay);
            let mut rng = SplitMix64::new(123);
            for v in u.rho.iter_mut().chain(u.mm.iter_mut()) {
                *v = rng.next_in(-1.0, 1.0);
            }
            proj.project(&mut u, &rho0, &rho1);
            assert!(residual_norm(&lay, &u, &rho0, &rho1) < 1e-9, "{kind:?}");
        }
    }
}
