//! Dynamic-formulation transport distances W2, d_HK, d_HKS.
//!
//! All three minimize the same convexified action
//!
//! `sum_{k,i} (mm^2 + zeta^2) / rho * (h dt)`
//!
//! over staggered space-time variables subject to the discrete continuity
//! equation `d_t rho + div mm = zeta` and the endpoint pins; the kind
//! selects the constraint set:
//!
//! - `W2`:  no source variable at all (`zeta = 0`),
//! - `HK`:  free source (any endpoint masses),
//! - `HKS`: free source plus unit mass at every time slice.
//!
//! Because the feasible sets are nested (W2 in HKS in HK over probability
//! endpoints), the discrete optimal values satisfy the ordering
//! `d_HK <= d_HKS <= W2` structurally; the solver only adds its
//! convergence gap.
//!
//! The saddle-point problem `min_U F(I U) + ind_C(U)` is solved by the
//! Chambolle-Pock primal-dual iteration: the dual step is the pointwise
//! cubic prox of the action (via Moreau), the primal step is the exact
//! continuity projection of [`projection::Projector`], and the step sizes
//! satisfy `sigma tau |I|^2 <= 1` with `|I|` estimated by power iteration.

mod action;
mod projection;
mod quantile;
mod stagger;

pub use quantile::w2_quantile_oracle;

/// Pointwise proximal map of the action kernel `(m^2 + z^2)/rho` with
/// parameter `gamma`, exposed so the cubic closed form can be validated
/// against independent minimization.
pub fn prox_point(rho: f64, m: f64, z: f64, gamma: f64) -> (f64, f64, f64) {
    action::prox(rho, m, z, gamma)
}

use thiserror::Error;

use crate::diagnostics;
use crate::entropy::EntropyModel;
use crate::field::DensityField;
use crate::grid::{DomainKind, Grid};
use crate::seeded::SplitMix64;

use stagger::{Centered, Layout, Staggered};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    W2,
    HK,
    HKS,
}

impl TransportKind {
    pub fn name(&self) -> &'static str {
        match self {
            TransportKind::W2 => "w2",
            TransportKind::HK => "hk",
            TransportKind::HKS => "hks",
        }
    }

    fn has_source(&self) -> bool {
        !matches!(self, TransportKind::W2)
    }
}

#[derive(Debug, Clone)]
pub struct SolverOpts {
    pub max_iters: usize,
    /// Primal-dual residual target (relative, RMS).
    pub tol: f64,
    /// Ratio between primal and dual step sizes; the product stays at
    /// `0.98 / |I|^2` regardless.
    pub step_ratio: f64,
    /// Over-relaxation factor of the primal-dual iteration, in (0, 2).
    pub relaxation: f64,
    /// Seed for the power-iteration start vector.
    pub seed: u64,
    pub keep_interpolation: bool,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            max_iters: 20_000,
            tol: 1e-6,
            step_ratio: 10.0,
            relaxation: 1.9,
            seed: 0x5EED_CAFE,
            keep_interpolation: false,
        }
    }
}

/// Space-time interpolation fields on the centered grid (row-major
/// `k * n + i`).
#[derive(Debug, Clone)]
pub struct SpaceTimeFields {
    pub n_time: usize,
    pub n_cells: usize,
    pub rho: Vec<f64>,
    pub momentum: Vec<f64>,
    pub source: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TransportResult {
    pub kind: TransportKind,
    pub distance_sq: f64,
    pub distance: f64,
    pub residual: f64,
    pub iters: usize,
    pub interpolation: Option<SpaceTimeFields>,
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("splitting scheme did not reach tolerance (residual {:e} after {} iterations)", best.residual, best.iters)]
    NonConvergence { best: Box<TransportResult> },
    #[error("counterexample: distance^2 {distance_sq:e} with entropy {entropy:e}")]
    Counterexample { distance_sq: f64, entropy: f64 },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("diagnostics: {0}")]
    Diagnostics(String),
}

#[derive(Debug, Clone)]
pub struct TransportProblem {
    pub grid: Grid,
    pub rho0: DensityField,
    pub rho1: DensityField,
    pub kind: TransportKind,
    pub n_time: usize,
    pub opts: SolverOpts,
}

impl TransportProblem {
    pub fn new(
        grid: Grid,
        rho0: DensityField,
        rho1: DensityField,
        kind: TransportKind,
        n_time: usize,
        opts: SolverOpts,
    ) -> Result<TransportProblem, TransportError> {
        if rho0.len() != grid.n_cells() || rho1.len() != grid.n_cells() {
            return Err(TransportError::Usage(
                "endpoint densities must live on the problem grid".into(),
            ));
        }
        if n_time == 0 {
            return Err(TransportError::Usage("n_time must be positive".into()));
        }
        let min_cells = match grid.kind() {
            DomainKind::Circle => 3,
            DomainKind::Interval => 2,
        };
        if grid.n_cells() < min_cells {
            return Err(TransportError::Usage(format!(
                "transport needs at least {min_cells} cells on this domain"
            )));
        }
        match kind {
            TransportKind::W2 | TransportKind::HKS => {
                for (name, rho) in [("rho0", &rho0), ("rho1", &rho1)] {
                    if (rho.mass() - 1.0).abs() > 1e-10 {
                        return Err(TransportError::Usage(format!(
                            "{} must be a probability density for {}, mass = {}",
                            name,
                            kind.name(),
                            rho.mass()
                        )));
                    }
                }
            }
            TransportKind::HK => {
                if !(rho0.mass() > 0.0) || !(rho1.mass() > 0.0) {
                    return Err(TransportError::Usage(
                        "hk endpoints must carry positive mass".into(),
                    ));
                }
            }
        }
        Ok(TransportProblem { grid, rho0, rho1, kind, n_time, opts })
    }
}

/// Estimates the operator norm of the (linear) interpolation by power
/// iteration on `I^T I`.
fn interp_norm(lay: &Layout, seed: u64) -> f64 {
    let mut rng = SplitMix64::new(seed);
    let mut v = Staggered::zeros(lay);
    for x in v.rho.iter_mut().chain(v.mm.iter_mut()).chain(v.zeta.iter_mut()) {
        *x = rng.next_in(-1.0, 1.0);
    }
    let zero = vec![0.0; lay.n];
    let mut iv = Centered::zeros(lay);
    let mut w = Staggered::zeros(lay);
    let mut lambda_sq: f64 = 1.0;
    for _ in 0..80 {
        lay.interp(&v, &zero, &zero, &mut iv);
        lay.interp_adjoint(&iv, &mut w);
        let norm = w.norm_sq().sqrt();
        if norm == 0.0 {
            break;
        }
        lambda_sq = norm / v.norm_sq().sqrt().max(1e-300);
        std::mem::swap(&mut v, &mut w);
        let scale = 1.0 / norm;
        for x in v.rho.iter_mut().chain(v.mm.iter_mut()).chain(v.zeta.iter_mut()) {
            *x *= scale;
        }
    }
    lambda_sq.sqrt().max(1e-8)
}

fn action_value(lay: &Layout, v: &Centered) -> f64 {
    let rho_max = v.rho.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let floor = 1e-12 * rho_max.max(1e-12);
    let mut acc = 0.0;
    for idx in 0..v.rho.len() {
        let rho = v.rho[idx];
        let m = v.mm[idx];
        let z = if lay.has_zeta { v.zeta[idx] } else { 0.0 };
        let s = m * m + z * z;
        if rho > floor {
            acc += s / rho;
        }
    }
    acc * lay.h * lay.dt
}

/// Minimizes the discrete action; see the module docs for the scheme.
pub fn solve_dynamic(problem: &TransportProblem) -> Result<TransportResult, TransportError> {
    let lay = Layout::new(&problem.grid, problem.n_time, problem.kind.has_source());
    let rho0 = problem.rho0.values();
    let rho1 = problem.rho1.values();
    let slice_mean = match problem.kind {
        TransportKind::HKS => {
            let n = lay.n as f64;
            Some(0.5 * (rho0.iter().sum::<f64>() + rho1.iter().sum::<f64>()) / n)
        }
        _ => None,
    };
    let mut projector = projection::Projector::new(lay, slice_mean);

    // feasible-ish start: linear density interpolation, no motion
    let mut u = Staggered::zeros(&lay);
    for kk in 1..lay.n_time {
        let t = kk as f64 * lay.dt;
        for i in 0..lay.n {
            u.rho[(kk - 1) * lay.n + i] = (1.0 - t) * rho0[i] + t * rho1[i];
        }
    }
    projector.project(&mut u, rho0, rho1);

    let opts = &problem.opts;
    let norm = interp_norm(&lay, opts.seed);
    let ratio = opts.step_ratio.max(1e-6);
    let tau = 0.99 * ratio / norm;
    let sigma = 0.99 / (ratio * norm);
    let gamma = 1.0 / sigma;
    let rho_relax = opts.relaxation.clamp(0.1, 1.99);

    // Relaxed primal-dual iteration (primal step first):
    //   u~ = proj_C(u - tau I^T y)
    //   y~ = prox_{sigma F*}(y + sigma I(2 u~ - u))
    //   (u, y) += rho ((u~, y~) - (u, y))
    // The interpolation is affine, so I(u) updates by the same relaxed
    // differences without re-applying the operator.
    let mut y = Centered::zeros(&lay);
    let mut iu = Centered::zeros(&lay);
    lay.interp(&u, rho0, rho1, &mut iu);
    let mut g = Staggered::zeros(&lay); // I^T y
    let mut ut = Staggered::zeros(&lay);
    let mut yt = Centered::zeros(&lay);
    let mut iut = Centered::zeros(&lay);
    let mut gt = Staggered::zeros(&lay);

    let dof_p = u.dof().max(1) as f64;
    let dof_d = y.dof().max(1) as f64;
    let mut residual = f64::INFINITY;
    let mut iters = opts.max_iters;

    for it in 0..opts.max_iters {
        // primal candidate
        ut.rho.copy_from_slice(&u.rho);
        ut.mm.copy_from_slice(&u.mm);
        ut.zeta.copy_from_slice(&u.zeta);
        ut.axpy(-tau, &g);
        projector.project(&mut ut, rho0, rho1);
        lay.interp(&ut, rho0, rho1, &mut iut);
        // dual candidate
        for idx in 0..lay.centered_len() {
            let br = y.rho[idx] + sigma * (2.0 * iut.rho[idx] - iu.rho[idx]);
            let bm = y.mm[idx] + sigma * (2.0 * iut.mm[idx] - iu.mm[idx]);
            let bz = if lay.has_zeta {
                y.zeta[idx] + sigma * (2.0 * iut.zeta[idx] - iu.zeta[idx])
            } else {
                0.0
            };
            let (pr, pm, pz) = action::prox(br / sigma, bm / sigma, bz / sigma, gamma);
            yt.rho[idx] = br - sigma * pr;
            yt.mm[idx] = bm - sigma * pm;
            if lay.has_zeta {
                yt.zeta[idx] = bz - sigma * pz;
            }
        }
        lay.interp_adjoint(&yt, &mut gt);

        // optimality residuals of the candidate pair
        let mut p_sq = 0.0;
        {
            let mut add = |a: &[f64], b: &[f64], ga: &[f64], gb: &[f64]| {
                for ((x0, x1), (g0, g1)) in a.iter().zip(b).zip(ga.iter().zip(gb)) {
                    let v = (x0 - x1) / tau - (g0 - g1);
                    p_sq += v * v;
                }
            };
            add(&u.rho, &ut.rho, &g.rho, &gt.rho);
            add(&u.mm, &ut.mm, &g.mm, &gt.mm);
            add(&u.zeta, &ut.zeta, &g.zeta, &gt.zeta);
        }
        let mut d_sq = 0.0;
        {
            let mut add = |a: &[f64], b: &[f64], ia: &[f64], ib: &[f64]| {
                for ((y0, y1), (i0, i1)) in a.iter().zip(b).zip(ia.iter().zip(ib)) {
                    let v = (y0 - y1) / sigma - (i0 - i1);
                    d_sq += v * v;
                }
            };
            add(&y.rho, &yt.rho, &iu.rho, &iut.rho);
            add(&y.mm, &yt.mm, &iu.mm, &iut.mm);
            add(&y.zeta, &yt.zeta, &iu.zeta, &iut.zeta);
        }
        let prim_scale = 1.0 + (ut.norm_sq() / dof_p).sqrt();
        let dual_scale = 1.0 + (yt.norm_sq() / dof_d).sqrt();
        residual = ((p_sq / dof_p).sqrt() / prim_scale).max((d_sq / dof_d).sqrt() / dual_scale);

        // relaxation
        let blend_st = |cur: &mut Staggered, cand: &Staggered| {
            for (x, c) in cur.rho.iter_mut().zip(&cand.rho) {
                *x += rho_relax * (c - *x);
            }
            for (x, c) in cur.mm.iter_mut().zip(&cand.mm) {
                *x += rho_relax * (c - *x);
            }
            for (x, c) in cur.zeta.iter_mut().zip(&cand.zeta) {
                *x += rho_relax * (c - *x);
            }
        };
        let blend_ct = |cur: &mut Centered, cand: &Centered| {
            for (x, c) in cur.rho.iter_mut().zip(&cand.rho) {
                *x += rho_relax * (c - *x);
            }
            for (x, c) in cur.mm.iter_mut().zip(&cand.mm) {
                *x += rho_relax * (c - *x);
            }
            for (x, c) in cur.zeta.iter_mut().zip(&cand.zeta) {
                *x += rho_relax * (c - *x);
            }
        };
        blend_st(&mut u, &ut);
        blend_ct(&mut iu, &iut);
        blend_ct(&mut y, &yt);
        blend_st(&mut g, &gt);

        if residual <= opts.tol && it >= 2 {
            iters = it + 1;
            break;
        }
    }
    // report the value of the last feasible candidate
    projector.project(&mut u, rho0, rho1);
    lay.interp(&u, rho0, rho1, &mut iu);

    let distance_sq = action_value(&lay, &iu);
    if distance_sq < -1e-12 {
        return Err(TransportError::Internal(format!(
            "negative action {distance_sq:e}"
        )));
    }
    let interpolation = opts.keep_interpolation.then(|| SpaceTimeFields {
        n_time: lay.n_time,
        n_cells: lay.n,
        rho: iu.rho.clone(),
        momentum: iu.mm.clone(),
        source: if lay.has_zeta { iu.zeta.clone() } else { vec![0.0; lay.centered_len()] },
    });
    let result = TransportResult {
        kind: problem.kind,
        distance_sq: distance_sq.max(0.0),
        distance: distance_sq.max(0.0).sqrt(),
        residual,
        iters,
        interpolation,
    };
    if residual > opts.tol {
        return Err(TransportError::NonConvergence { best: Box::new(result) });
    }
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct OrderingReport {
    pub w2: TransportResult,
    pub hks: TransportResult,
    pub hk: TransportResult,
    pub epsilon: f64,
    pub pass: bool,
}

/// Computes all three distances on a probability pair and checks
/// `d_HK <= d_HKS <= W2` within the propagated solver tolerance.
pub fn check_ordering(
    grid: &Grid,
    rho0: &DensityField,
    rho1: &DensityField,
    n_time: usize,
    opts: &SolverOpts,
) -> Result<OrderingReport, TransportError> {
    let solve = |kind: TransportKind| -> Result<TransportResult, TransportError> {
        let problem = TransportProblem::new(
            grid.clone(),
            rho0.clone(),
            rho1.clone(),
            kind,
            n_time,
            opts.clone(),
        )?;
        solve_dynamic(&problem)
    };
    let w2 = solve(TransportKind::W2)?;
    let hks = solve(TransportKind::HKS)?;
    let hk = solve(TransportKind::HK)?;
    let scale = w2.distance_sq.max(hks.distance_sq).max(hk.distance_sq).max(1.0);
    let epsilon = 3.0 * (w2.residual + hks.residual + hk.residual) * scale + 1e-8;
    let pass = hk.distance <= hks.distance + epsilon && hks.distance <= w2.distance + epsilon;
    Ok(OrderingReport { w2, hks, hk, epsilon, pass })
}

#[derive(Debug, Clone)]
pub struct TalagrandCase {
    pub distance_sq: f64,
    pub entropy: f64,
    /// `distance_sq / entropy`; `None` when the case is an equilibrium and
    /// the 0/0 ratio is skipped.
    pub ratio: Option<f64>,
    pub mass_u0: f64,
    pub mass_m: f64,
}

/// Distance-squared to the equilibrium against the relative entropy
/// (Talagrand-type ratio) for one density.
pub fn talagrand_check(
    model: &EntropyModel,
    grid: &Grid,
    u0: &DensityField,
    kind: TransportKind,
    n_time: usize,
    opts: &SolverOpts,
) -> Result<TalagrandCase, TransportError> {
    if kind == TransportKind::W2 {
        return Err(TransportError::Usage(
            "talagrand check applies to the hk and hks distances".into(),
        ));
    }
    if grid.kind() != DomainKind::Circle {
        return Err(TransportError::Usage("talagrand check runs on the circle".into()));
    }
    let m_values: Vec<f64> = grid
        .cell_centers()
        .iter()
        .map(|&x| model.equilibrium_density(x))
        .collect::<Result<_, _>>()
        .map_err(|e| TransportError::Diagnostics(e.to_string()))?;
    let m = DensityField::from_raw(grid, m_values);
    let entropy = diagnostics::entropy_total(model, grid, u0)
        .map_err(|e| TransportError::Diagnostics(e.to_string()))?;
    let problem = TransportProblem::new(
        grid.clone(),
        u0.clone(),
        m.clone(),
        kind,
        n_time,
        opts.clone(),
    )?;
    let result = solve_dynamic(&problem)?;
    let d2 = result.distance_sq;
    if entropy <= 1e-14 {
        if d2 > 1e-6 {
            return Err(TransportError::Counterexample { distance_sq: d2, entropy });
        }
        return Ok(TalagrandCase {
            distance_sq: d2,
            entropy,
            ratio: None,
            mass_u0: u0.mass(),
            mass_m: m.mass(),
        });
    }
    Ok(TalagrandCase {
        distance_sq: d2,
        entropy,
        ratio: Some(d2 / entropy),
        mass_u0: u0.mass(),
        mass_m: m.mass(),
    })
}
