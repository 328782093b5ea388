//! The nonlinearity f(x, u) and everything derived from it.
//!
//! A model packages a strictly decreasing (in u) fitness f together with
//! its partial derivatives and the derived objects
//!
//! - `Phi(x,u) = -int_0^u s f_u(x,s) ds`   (monotone flux potential),
//! - `Psi(x,u) = int_0^u Phi(x,s) ds`      (energy density),
//! - `E(x,u)  = -int_{m(x)}^u f(x,s) ds`   (relative entropy density),
//!
//! where `m` is the equilibrium with `f(x, m(x)) = 0` after an additive
//! normalization `f <- f - c*`. The shift `c*` is stored on the model, not
//! baked into the closures, so the pre-normalization f stays recoverable
//! and shift covariance is testable.
//!
//! Three built-in families:
//!
//! - power law      `f = (1 - u^alpha)/alpha` (porous-medium type),
//! - log potential  `f = -log u - V(x)`       (linear Fokker-Planck),
//! - arctangential  `f = -log(u/sqrt(1+u^2)) - log(2)/2`.
//!
//! All built-ins carry closed forms for Phi, Psi, E; the adaptive-Simpson
//! quadrature path exists alongside them as an independent cross-check and
//! is memoized because diagnostics may re-evaluate the same nodes heavily.

use std::collections::HashMap;
use std::sync::Mutex;

use thiserror::Error;

use crate::expr::Expr;
use crate::field::DensityField;
use crate::grid::Grid;
use crate::quad::{adaptive_simpson, QuadError};

/// Absolute tolerance for the quadrature fallback path.
const QUAD_TOL: f64 = 1e-10;
/// Integrals with a singular integrand at u = 0 are started here; the
/// missing head is supplied in closed form.
const SINGULAR_SPLIT: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("evaluation outside the trusted density range: u = {u}")]
    Domain { u: f64 },
    #[error("level {c} is outside the range of f at node {node} (x = {x})")]
    Range { c: f64, node: usize, x: f64 },
    #[error("equilibrium not normalizable on validity range")]
    NotNormalizable,
    #[error("root finding stalled at x = {x} (residual {residual:e})")]
    RootFind { x: f64, residual: f64 },
    #[error("quadrature failure: {0}")]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

#[derive(Debug, Clone)]
pub enum ModelKind {
    PowerLaw { alpha: f64 },
    LogPotential { v: Expr, dv: Expr },
    Arctangential,
}

/// Result of normalizing the equilibrium to a prescribed mass.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub m: DensityField,
    pub c_star: f64,
    /// Max over nodes of |f(x, m(x))| after the shift.
    pub residual: f64,
}

pub struct EntropyModel {
    kind: ModelKind,
    shift: f64,
    u_valid: (f64, f64),
    quad_memo: Mutex<HashMap<(u8, u64, u64), f64>>,
}

impl std::fmt::Debug for EntropyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EntropyModel")
            .field("kind", &self.kind)
            .field("shift", &self.shift)
            .field("u_valid", &self.u_valid)
            .finish()
    }
}

impl Clone for EntropyModel {
    fn clone(&self) -> Self {
        EntropyModel {
            kind: self.kind.clone(),
            shift: self.shift,
            u_valid: self.u_valid,
            quad_memo: Mutex::new(HashMap::new()),
        }
    }
}

/// `u^a` with fast paths for the exponents that dominate solver loops.
#[inline]
fn pow(u: f64, a: f64) -> f64 {
    if a == 1.0 {
        u
    } else if a == 2.0 {
        u * u
    } else if a == -1.0 {
        1.0 / u
    } else {
        u.powf(a)
    }
}

/// `u * log(u)` extended by continuity to 0 at u = 0.
#[inline]
fn xlogx(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * u.ln()
    }
}

impl EntropyModel {
    pub fn power_law(alpha: f64) -> Result<EntropyModel, ModelError> {
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(ModelError::InvalidParameter(
                "power-law exponent must be nonzero and finite".into(),
            ));
        }
        // E and Phi lose integrability at u = 0 once alpha <= -1; keep a
        // strictly positive floor there and forbid vacuum evaluation.
        let u_valid = if alpha > -1.0 { (0.0, f64::INFINITY) } else { (1e-12, f64::INFINITY) };
        Ok(EntropyModel {
            kind: ModelKind::PowerLaw { alpha },
            shift: 0.0,
            u_valid,
            quad_memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn log_potential(v: Expr) -> EntropyModel {
        let dv = v.derivative();
        EntropyModel {
            kind: ModelKind::LogPotential { v, dv },
            shift: 0.0,
            u_valid: (0.0, f64::INFINITY),
            quad_memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn arctangential() -> EntropyModel {
        EntropyModel {
            kind: ModelKind::Arctangential,
            shift: 0.0,
            u_valid: (0.0, f64::INFINITY),
            quad_memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn u_valid(&self) -> (f64, f64) {
        self.u_valid
    }

    /// A copy with `delta` added to the normalizing shift (so `f` drops by
    /// `delta`). Used to probe shift covariance.
    pub fn shifted(&self, delta: f64) -> EntropyModel {
        let mut out = self.clone();
        out.shift += delta;
        out
    }

    /// True when f genuinely depends on x (drift terms are active).
    pub fn is_x_dependent(&self) -> bool {
        match &self.kind {
            ModelKind::LogPotential { dv, .. } => !dv.is_zero(),
            _ => false,
        }
    }

    fn base_f(&self, x: f64, u: f64) -> f64 {
        match &self.kind {
            ModelKind::PowerLaw { alpha } => (1.0 - pow(u, *alpha)) / alpha,
            ModelKind::LogPotential { v, .. } => -u.ln() - v.eval(x),
            ModelKind::Arctangential => {
                -(u / (1.0 + u * u).sqrt()).ln() - 0.5 * std::f64::consts::LN_2
            }
        }
    }

    /// The (shifted) fitness f(x, u).
    pub fn f(&self, x: f64, u: f64) -> f64 {
        self.base_f(x, u) - self.shift
    }

    pub fn f_u(&self, _x: f64, u: f64) -> f64 {
        match &self.kind {
            ModelKind::PowerLaw { alpha } => -pow(u, alpha - 1.0),
            ModelKind::LogPotential { .. } => -1.0 / u,
            ModelKind::Arctangential => -1.0 / (u * (1.0 + u * u)),
        }
    }

    pub fn f_x(&self, x: f64, _u: f64) -> f64 {
        match &self.kind {
            ModelKind::LogPotential { dv, .. } => -dv.eval(x),
            _ => 0.0,
        }
    }

    /// Degenerate-safe `u * f(x,u)`: exactly 0 on vacuum cells, where the
    /// bare product would be `0 * inf`.
    pub fn u_times_f(&self, x: f64, u: f64) -> f64 {
        if u == 0.0 {
            0.0
        } else {
            u * self.f(x, u)
        }
    }

    /// `Phi_u = -u f_u`, the diffusion coefficient entering the CFL bound.
    pub fn phi_u(&self, _x: f64, u: f64) -> f64 {
        match &self.kind {
            ModelKind::PowerLaw { alpha } => pow(u, *alpha),
            ModelKind::LogPotential { .. } => 1.0,
            ModelKind::Arctangential => 1.0 / (1.0 + u * u),
        }
    }

    fn check_u(&self, u: f64) -> Result<(), ModelError> {
        if !(u >= 0.0) || u >= self.u_valid.1 || (u < self.u_valid.0 && self.u_valid.0 > 0.0) {
            return Err(ModelError::Domain { u });
        }
        Ok(())
    }

    /// `Phi(x,u) = -int_0^u s f_u ds`, in closed form.
    ///
    /// For power laws with `alpha <= -1` the integral from 0 diverges; the
    /// returned value is then the monotone antiderivative pinned by the
    /// same formula (only differences of Phi enter the flux), and u must
    /// stay inside the validity window.
    pub fn phi(&self, x: f64, u: f64) -> Result<f64, ModelError> {
        self.check_u(u)?;
        Ok(self.phi_unchecked(x, u))
    }

    fn phi_unchecked(&self, _x: f64, u: f64) -> f64 {
        match &self.kind {
            ModelKind::PowerLaw { alpha } => {
                if *alpha == -1.0 {
                    u.ln()
                } else {
                    pow(u, alpha + 1.0) / (alpha + 1.0)
                }
            }
            ModelKind::LogPotential { .. } => u,
            ModelKind::Arctangential => u.atan(),
        }
    }

    /// `Psi(x,u) = int_0^u Phi ds`, in closed form (same caveat as [`Self::phi`]).
    pub fn psi(&self, x: f64, u: f64) -> Result<f64, ModelError> {
        self.check_u(u)?;
        Ok(self.psi_unchecked(x, u))
    }

    fn psi_unchecked(&self, _x: f64, u: f64) -> f64 {
        match &self.kind {
            ModelKind::PowerLaw { alpha } => {
                if *alpha == -1.0 {
                    xlogx(u) - u
                } else if *alpha == -2.0 {
                    -u.ln()
                } else {
                    pow(u, alpha + 2.0) / ((alpha + 1.0) * (alpha + 2.0))
                }
            }
            ModelKind::LogPotential { .. } => 0.5 * u * u,
            ModelKind::Arctangential => u * u.atan() - 0.5 * (1.0 + u * u).ln(),
        }
    }

    /// `Phi_x(x,u) = -int_0^u s f_xu ds`; identically zero for the
    /// built-ins (their x-dependence is additive in f).
    pub fn phi_x(&self, _x: f64, _u: f64) -> f64 {
        0.0
    }

    /// Pointwise antiderivative `A(x, u)` of the *unshifted* f in u.
    /// Only differences `A(u) - A(m)` are ever used.
    fn f_antiderivative(&self, x: f64, u: f64) -> f64 {
        match &self.kind {
            ModelKind::PowerLaw { alpha } => {
                if *alpha == -1.0 {
                    u.ln() - u
                } else {
                    u / alpha - pow(u, alpha + 1.0) / (alpha * (alpha + 1.0))
                }
            }
            ModelKind::LogPotential { v, .. } => -(xlogx(u) - u) - v.eval(x) * u,
            ModelKind::Arctangential => {
                let log_ratio = if u == 0.0 { 0.0 } else { u * (u / (1.0 + u * u).sqrt()).ln() };
                -log_ratio + u.atan() - 0.5 * std::f64::consts::LN_2 * u
            }
        }
    }

    /// Equilibrium density `m(x)` solving `f(x, m) = 0` under the current
    /// shift, in closed form per family.
    pub fn equilibrium_density(&self, x: f64) -> Result<f64, ModelError> {
        let c = self.shift;
        match &self.kind {
            ModelKind::PowerLaw { alpha } => {
                let base = 1.0 - alpha * c;
                if base <= 0.0 {
                    return Err(ModelError::NotNormalizable);
                }
                Ok(pow(base, 1.0 / alpha))
            }
            ModelKind::LogPotential { v, .. } => Ok((-v.eval(x) - c).exp()),
            ModelKind::Arctangential => {
                let q = (-c).exp() / std::f64::consts::SQRT_2;
                if q >= 1.0 {
                    return Err(ModelError::NotNormalizable);
                }
                Ok(q / (1.0 - q * q).sqrt())
            }
        }
    }

    /// Relative entropy density `E(x,u) = -int_{m(x)}^u f ds >= 0`,
    /// vanishing exactly at u = m(x).
    pub fn entropy_density(&self, x: f64, u: f64) -> Result<f64, ModelError> {
        self.check_u(u)?;
        let m = self.equilibrium_density(x)?;
        let raw =
            -(self.f_antiderivative(x, u) - self.f_antiderivative(x, m)) + self.shift * (u - m);
        // E >= 0 analytically; clamp the roundoff shadow near equilibrium.
        Ok(if raw < 0.0 && raw > -1e-12 { 0.0 } else { raw })
    }

    fn memoized(
        &self,
        op: u8,
        x: f64,
        u: f64,
        compute: impl FnOnce() -> Result<f64, ModelError>,
    ) -> Result<f64, ModelError> {
        let key = (op, x.to_bits(), u.to_bits());
        if let Some(v) = self.quad_memo.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = compute()?;
        self.quad_memo.lock().unwrap().insert(key, v);
        Ok(v)
    }

    /// True when the Phi/Psi integrands are singular (but integrable) at 0.
    fn singular_at_zero(&self) -> bool {
        match &self.kind {
            ModelKind::PowerLaw { alpha } => *alpha < 1.0,
            _ => true,
        }
    }

    /// Quadrature evaluation of Phi, used to validate the closed form.
    pub fn phi_quadrature(&self, x: f64, u: f64) -> Result<f64, ModelError> {
        self.check_u(u)?;
        if let ModelKind::PowerLaw { alpha } = &self.kind {
            if *alpha <= -1.0 {
                return Err(ModelError::Domain { u: 0.0 });
            }
        }
        self.memoized(0, x, u, || {
            let lo = if self.singular_at_zero() { SINGULAR_SPLIT.min(u) } else { 0.0 };
            let head = self.phi_unchecked(x, lo);
            let tail = adaptive_simpson(&|s: f64| -s * self.f_u(x, s), lo, u, QUAD_TOL)?;
            Ok(head + tail)
        })
    }

    /// Quadrature evaluation of Psi as `int_0^u Phi`, validating the Psi
    /// closed form against the (separately validated) Phi closed form.
    pub fn psi_quadrature(&self, x: f64, u: f64) -> Result<f64, ModelError> {
        self.check_u(u)?;
        if let ModelKind::PowerLaw { alpha } = &self.kind {
            if *alpha <= -1.0 {
                return Err(ModelError::Domain { u: 0.0 });
            }
        }
        self.memoized(1, x, u, || {
            // Phi has unbounded derivatives at 0 for sublinear power laws;
            // split off the closed-form head there.
            let lo = if self.singular_at_zero() { SINGULAR_SPLIT.min(u) } else { 0.0 };
            let head = self.psi_unchecked(x, lo);
            let tail = adaptive_simpson(&|s: f64| self.phi_unchecked(x, s), lo, u, QUAD_TOL)?;
            Ok(head + tail)
        })
    }

    /// Quadrature evaluation of the entropy density.
    pub fn entropy_density_quadrature(&self, x: f64, u: f64) -> Result<f64, ModelError> {
        self.check_u(u)?;
        let m = self.equilibrium_density(x)?;
        self.memoized(2, x, u, || {
            // f may blow up at u = 0 (log-type kinds); take the head piece
            // below the split point from the closed form.
            let mut head = 0.0;
            let mut lo = u;
            if u < SINGULAR_SPLIT && self.singular_at_zero() {
                let split = SINGULAR_SPLIT.min(m);
                head = self.entropy_density(x, u)? - self.entropy_density(x, split)?;
                lo = split;
            }
            let v = head + adaptive_simpson(&|s: f64| self.f(x, s), lo, m, QUAD_TOL)?;
            Ok(if v < 0.0 && v > -1e-12 { 0.0 } else { v })
        })
    }

    /// Solves `f(x, u) = c` for u at one point by safeguarded
    /// bisection/Newton (f is strictly decreasing in u).
    pub fn invert_f(&self, x: f64, c: f64) -> Result<f64, ModelError> {
        let target = c + self.shift; // solve base_f = target
        let floor = self.u_valid.0.max(1e-300);
        let start: f64 = 1.0;
        let mut lo = start;
        let mut hi = start;
        let mut expansions = 0;
        while self.base_f(x, lo) < target {
            lo *= 0.25;
            expansions += 1;
            if lo < floor || expansions > 60 {
                return Err(ModelError::Range { c, node: usize::MAX, x });
            }
        }
        expansions = 0;
        while self.base_f(x, hi) > target {
            hi *= 4.0;
            expansions += 1;
            if expansions > 60 {
                return Err(ModelError::Range { c, node: usize::MAX, x });
            }
        }
        // Bracket invariant: base_f(lo) >= target >= base_f(hi).
        let tol = 1e-13 * target.abs().max(1.0);
        let mut u = 0.5 * (lo + hi);
        for _ in 0..200 {
            let res = self.base_f(x, u) - target;
            if res.abs() <= tol {
                return Ok(u);
            }
            if res > 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let newton = u - res / self.f_u(x, u);
            u = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if u == lo || u == hi {
                break;
            }
        }
        let res = self.base_f(x, u) - target;
        if res.abs() <= 1e-12 * target.abs().max(1.0) {
            Ok(u)
        } else {
            Err(ModelError::RootFind { x, residual: res })
        }
    }

    /// The level set `m_c` with `f(x, m_c(x)) = c` at every node.
    pub fn implicit_level(&self, grid: &Grid, c: f64) -> Result<DensityField, ModelError> {
        let mut values = Vec::with_capacity(grid.n_cells());
        for (node, &x) in grid.cell_centers().iter().enumerate() {
            let u = self.invert_f(x, c).map_err(|e| match e {
                ModelError::Range { c, x, .. } => ModelError::Range { c, node, x },
                other => other,
            })?;
            values.push(u);
        }
        Ok(DensityField::from_raw(grid, values))
    }

    /// Finds the shift `c*` with `integrate(m_{c*}) = target_mass` by
    /// bisection on c (the map c -> mass is strictly decreasing), applies
    /// `f <- f - c*`, and returns the equilibrium.
    pub fn normalize_equilibrium(
        &mut self,
        grid: &Grid,
        target_mass: f64,
    ) -> Result<EquilibriumResult, ModelError> {
        if !(target_mass > 0.0) {
            return Err(ModelError::InvalidParameter("target mass must be positive".into()));
        }
        let mass_at = |c: f64| -> Result<(f64, DensityField), ModelError> {
            let m = self.implicit_level(grid, c)?;
            Ok((m.mass(), m))
        };

        // The map c -> mass(m_c) is strictly decreasing. Bracket the target
        // starting from c = 0, backing off whenever a probe leaves the
        // attainable range of f (models with horizontal asymptotes have a
        // bounded fitness range).
        let (mass0, m0) = mass_at(0.0).map_err(|_| ModelError::NotNormalizable)?;
        let bracket_side = |from: (f64, f64), direction: f64| -> Result<(f64, f64, DensityField), ModelError> {
            let mut anchor = from;
            let mut step = 1.0;
            for _ in 0..200 {
                let c = anchor.0 + direction * step;
                match mass_at(c) {
                    Ok((mass, m)) => {
                        let crossed = if direction > 0.0 {
                            mass <= target_mass
                        } else {
                            mass >= target_mass
                        };
                        if crossed {
                            return Ok((c, mass, m));
                        }
                        anchor = (c, mass);
                        step *= 2.0;
                    }
                    Err(_) => {
                        step *= 0.5;
                        if step < 1e-12 {
                            return Err(ModelError::NotNormalizable);
                        }
                    }
                }
            }
            Err(ModelError::NotNormalizable)
        };

        let (mut lo, mut hi);
        let (mass_lo, mass_hi);
        let (m_lo, m_hi);
        if mass0 >= target_mass {
            (lo, mass_lo, m_lo) = (0.0, mass0, m0);
            (hi, mass_hi, m_hi) = bracket_side((0.0, mass0), 1.0)?;
        } else {
            (hi, mass_hi, m_hi) = (0.0, mass0, m0);
            (lo, mass_lo, m_lo) = bracket_side((0.0, mass0), -1.0)?;
        }

        let (c_star, m) = if mass_lo == target_mass {
            (lo, m_lo)
        } else if mass_hi == target_mass {
            (hi, m_hi)
        } else {
            let mut best = (0.5 * (lo + hi), None::<DensityField>);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                let (mass_mid, m_mid) = mass_at(mid)?;
                best = (mid, Some(m_mid));
                if mass_mid == target_mass {
                    break;
                }
                if mass_mid > target_mass {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if (hi - lo).abs() <= 1e-16 * lo.abs().max(hi.abs()).max(1.0) {
                    break;
                }
            }
            let (c, m_opt) = best;
            (c, m_opt.expect("bisection ran at least once"))
        };

        if (m.mass() - target_mass).abs() > 1e-10 || m.min_value() <= 0.0 {
            return Err(ModelError::NotNormalizable);
        }

        self.shift += c_star;
        self.quad_memo.lock().unwrap().clear();
        let residual = grid
            .cell_centers()
            .iter()
            .zip(m.values())
            .map(|(&x, &u)| self.f(x, u).abs())
            .fold(0.0, f64::max);
        Ok(EquilibriumResult { m, c_star, residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_circle(n: usize) -> Grid {
        Grid::circle(n, 1.0).unwrap()
    }

    fn normalized_power_law(alpha: f64, grid: &Grid) -> (EntropyModel, EquilibriumResult) {
        let mut model = EntropyModel::power_law(alpha).unwrap();
        let eq = model.normalize_equilibrium(grid, 1.0).unwrap();
        (model, eq)
    }

    #[test]
    fn power_law_point_values() {
        let model = EntropyModel::power_law(1.0).unwrap();
        assert!((model.f(0.0, 2.0) - (-1.0)).abs() < 1e-15);
    }

    #[test]
    fn power_law_entropy_closed_forms() {
        let grid = unit_circle(16);
        let (model, eq) = normalized_power_law(1.0, &grid);
        assert_eq!(eq.c_star, 0.0);
        assert!(eq.m.values().iter().all(|&v| v == 1.0));
        // E(x, u) = (u-1)^2/2 for alpha = 1, m = 1.
        assert!((model.entropy_density(0.3, 2.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((model.entropy_density(0.3, 1.5).unwrap() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn power_law_alpha_minus_one_entropy() {
        let model = EntropyModel::power_law(-1.0).unwrap();
        // m = 1 already (f(1) = 0); E = u - log u - 1.
        let e = model.entropy_density(0.0, 1.0).unwrap();
        assert!(e.abs() < 1e-12);
        let e2 = model.entropy_density(0.0, 2.0).unwrap();
        assert!((e2 - (2.0 - 2.0f64.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn log_model_point_values() {
        let model = EntropyModel::log_potential(Expr::constant(0.0));
        assert!((model.f(0.0, (-1.0f64).exp()) - 1.0).abs() < 1e-15);
        // Boltzmann entropy: E(2) = 2 log 2 - 1.
        let e = model.entropy_density(0.0, 2.0).unwrap();
        assert!((e - (2.0 * 2.0f64.ln() - 1.0)).abs() < 1e-12);
        assert!(model.entropy_density(0.0, 1.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn arctangential_vanishes_at_equilibrium() {
        let model = EntropyModel::arctangential();
        assert!(model.f(0.2, 1.0).abs() < 1e-15);
        assert!(model.entropy_density(0.2, 1.0).unwrap().abs() < 1e-14);
        for &u in &[0.1, 1.0, 10.0] {
            assert!(model.f_u(0.0, u) < 0.0);
        }
    }

    #[test]
    fn phi_psi_closed_forms() {
        let power = EntropyModel::power_law(1.0).unwrap();
        assert!((power.phi(0.0, 2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((power.psi(0.0, 1.0).unwrap() - 1.0 / 6.0).abs() < 1e-14);
        let log = EntropyModel::log_potential(Expr::constant(0.0));
        assert!((log.phi(0.0, 3.0).unwrap() - 3.0).abs() < 1e-14);
        assert!((log.psi(0.0, 2.0).unwrap() - 2.0).abs() < 1e-14);
        for m in [&power, &log, &EntropyModel::arctangential()] {
            assert_eq!(m.phi(0.0, 0.0).unwrap(), 0.0);
            assert_eq!(m.psi(0.0, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let models = [
            EntropyModel::power_law(1.0).unwrap(),
            EntropyModel::power_law(2.0).unwrap(),
            EntropyModel::power_law(-0.5).unwrap(),
            EntropyModel::log_potential(Expr::parse("cos(2*pi*x)").unwrap()),
            EntropyModel::arctangential(),
        ];
        for model in &models {
            for &u in &[0.05, 0.3, 1.0, 4.0, 20.0] {
                let x = 0.37;
                let p = model.phi(x, u).unwrap();
                let pq = model.phi_quadrature(x, u).unwrap();
                assert!((p - pq).abs() < 1e-8, "phi mismatch {p} vs {pq}");
                let s = model.psi(x, u).unwrap();
                let sq = model.psi_quadrature(x, u).unwrap();
                assert!((s - sq).abs() < 1e-8, "psi mismatch {s} vs {sq}");
                let e = model.entropy_density(x, u).unwrap();
                let eq = model.entropy_density_quadrature(x, u).unwrap();
                assert!((e - eq).abs() < 1e-8, "E mismatch {e} vs {eq}");
            }
        }
    }

    #[test]
    fn implicit_level_examples() {
        let grid = unit_circle(32);
        let power = EntropyModel::power_law(1.0).unwrap();
        let level = power.implicit_level(&grid, 0.25).unwrap();
        assert!(level.values().iter().all(|&v| (v - 0.75).abs() < 1e-13));

        let log = EntropyModel::log_potential(Expr::constant(0.0));
        let level = log.implicit_level(&grid, 1.0).unwrap();
        let want = (-1.0f64).exp();
        assert!(level.values().iter().all(|&v| (v - want).abs() < 1e-13));
    }

    #[test]
    fn implicit_level_is_order_reversing() {
        let grid = unit_circle(16);
        let model = EntropyModel::log_potential(Expr::parse("cos(2*pi*x)").unwrap());
        let low = model.implicit_level(&grid, -0.5).unwrap();
        let high = model.implicit_level(&grid, 0.5).unwrap();
        for (a, b) in low.values().iter().zip(high.values()) {
            assert!(a >= b);
        }
    }

    #[test]
    fn implicit_level_rejects_out_of_range() {
        let grid = unit_circle(8);
        // alpha = -1: f = 1/u - 1 has range (-1, inf); c = -2 is unreachable.
        let model = EntropyModel::power_law(-1.0).unwrap();
        match model.implicit_level(&grid, -2.0) {
            Err(ModelError::Range { node, .. }) => assert_eq!(node, 0),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn normalize_power_law_is_exact() {
        let grid = unit_circle(256);
        let (model, eq) = normalized_power_law(1.0, &grid);
        assert_eq!(eq.c_star, 0.0);
        assert!(eq.m.values().iter().all(|&v| v == 1.0));
        assert_eq!(model.shift(), 0.0);
        assert!(eq.residual <= 1e-12);
    }

    #[test]
    fn normalize_power_law_target_two() {
        let grid = unit_circle(64);
        let mut model = EntropyModel::power_law(1.0).unwrap();
        let eq = model.normalize_equilibrium(&grid, 2.0).unwrap();
        assert!((eq.c_star + 1.0).abs() < 1e-12);
        assert!(eq.m.values().iter().all(|&v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn normalize_log_model_cosine_potential() {
        let grid = unit_circle(256);
        let mut model = EntropyModel::log_potential(Expr::parse("cos(2*pi*x)").unwrap());
        let eq = model.normalize_equilibrium(&grid, 1.0).unwrap();
        assert!((eq.m.mass() - 1.0).abs() <= 1e-10);
        assert!(eq.residual <= 1e-10);
        // Z = int exp(-cos(2 pi x)) dx = I_0(1); the grid quadrature of a
        // smooth periodic integrand converges spectrally, so c* = log Z to
        // high accuracy. I_0(1) = sum_k (1/4)^k / (k!)^2.
        let bessel_i0_1: f64 = (0..12).map(|k| {
            let kf: f64 = (1..=k).map(|j| j as f64).product();
            0.25f64.powi(k as i32) / (kf * kf)
        }).sum();
        assert!((eq.c_star - bessel_i0_1.ln()).abs() < 1e-10);
        // m = exp(-V)/Z at the nodes.
        for (&x, &mv) in grid.cell_centers().iter().zip(eq.m.values()) {
            let want = (-(2.0 * std::f64::consts::PI * x).cos()).exp() / bessel_i0_1;
            assert!((mv - want).abs() < 1e-10);
        }
    }

    #[test]
    fn alpha_zero_is_rejected() {
        assert!(EntropyModel::power_law(0.0).is_err());
    }

    #[test]
    fn entropy_rejects_vacuum_for_fast_diffusion() {
        let model = EntropyModel::power_law(-1.5).unwrap();
        assert!(model.entropy_density(0.0, 0.0).is_err());
    }

    #[test]
    fn monotonicity_and_derivative_consistency_sampled() {
        // f_u < 0, Phi_u = -u f_u, E_u = -f at sampled points, all models.
        let models = [
            EntropyModel::power_law(1.0).unwrap(),
            EntropyModel::power_law(-0.5).unwrap(),
            EntropyModel::log_potential(Expr::parse("cos(2*pi*x)").unwrap()),
            EntropyModel::arctangential(),
        ];
        let mut rng = crate::seeded::SplitMix64::new(7);
        for model in &models {
            for _ in 0..100 {
                let x = rng.next_f64();
                let u = 0.05 + 10.0 * rng.next_f64();
                let eps = 1e-6 * u.max(1.0);
                assert!(model.f_u(x, u) < 0.0);
                let fd_f = (model.f(x, u + eps) - model.f(x, u - eps)) / (2.0 * eps);
                assert!((fd_f - model.f_u(x, u)).abs() < 1e-6 * (1.0 + fd_f.abs()));
                let fd_phi =
                    (model.phi(x, u + eps).unwrap() - model.phi(x, u - eps).unwrap()) / (2.0 * eps);
                assert!((fd_phi - model.phi_u(x, u)).abs() < 1e-6 * (1.0 + fd_phi.abs()));
                let fd_e = (model.entropy_density(x, u + eps).unwrap()
                    - model.entropy_density(x, u - eps).unwrap())
                    / (2.0 * eps);
                assert!(
                    (fd_e + model.f(x, u)).abs() < 1e-5 * (1.0 + fd_e.abs()),
                    "E_u = -f violated"
                );
            }
        }
    }
}
