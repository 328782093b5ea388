//! Functionals along the flows and the empirical inequality machinery.
//!
//! Entropy `E(u) = int E(x,u)`, energy `W(u) = int Psi(x,u)` and the
//! entropy production
//!
//! - spherical:   `D = int u (f - fbar)^2 + int u |grad f|^2`
//! - conic:       `D = int u f^2 + int u |grad f|^2`
//! - wasserstein: `D = int u |grad f|^2`
//!
//! The `u |grad f|^2` part is assembled degenerate-safely from the face
//! flux as `F^2 / u_face` (zero where the face density vanishes), with the
//! same face density the flux itself upwinds, so the discrete dissipation
//! identity closes against the scheme rather than against a separate
//! differentiation of f.

use thiserror::Error;

use crate::entropy::EntropyModel;
use crate::field::DensityField;
use crate::flow::{self, FlowError, FlowKind, Trajectory};
use crate::grid::Grid;

/// Members with production and entropy both below this are equilibrium
/// states; their 0/0 ratio is skipped in inequality sweeps.
pub const EQUILIBRIUM_SKIP: f64 = 1e-14;

#[derive(Debug, Clone, Copy)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub entropy: f64,
    pub energy: f64,
    pub production: f64,
    pub fbar: f64,
    pub mass: f64,
    pub min_f: f64,
    pub max_f: f64,
}

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(
        "counterexample in case {case}: production {production:e} vanishes with entropy {entropy:e}"
    )]
    Counterexample { case: String, entropy: f64, production: f64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Relative entropy `int E(x, u(x)) dx >= 0`.
pub fn entropy_total(
    model: &EntropyModel,
    grid: &Grid,
    u: &DensityField,
) -> Result<f64, FlowError> {
    let mut sum = 0.0;
    for (&x, &v) in grid.cell_centers().iter().zip(u.values()) {
        sum += model.entropy_density(x, v)?;
    }
    Ok(sum * grid.h())
}

/// Energy `int Psi(x, u(x)) dx >= 0`.
pub fn energy_total(
    model: &EntropyModel,
    grid: &Grid,
    u: &DensityField,
) -> Result<f64, FlowError> {
    let mut sum = 0.0;
    for (&x, &v) in grid.cell_centers().iter().zip(u.values()) {
        sum += model.psi(x, v)?;
    }
    Ok(sum * grid.h())
}

/// The face density used when dividing the flux: the drift-upwinded value
/// where a drift is active, the arithmetic mean otherwise.
fn face_density(model: &EntropyModel, grid: &Grid, u: &[f64], j: usize) -> Option<f64> {
    let (l, r) = grid.face_neighbors(j)?;
    let ubar = 0.5 * (u[l] + u[r]);
    if model.is_x_dependent() {
        let a = model.f_x(grid.face_positions()[j], ubar);
        if a > 0.0 {
            return Some(u[l]);
        }
        if a < 0.0 {
            return Some(u[r]);
        }
    }
    Some(ubar)
}

/// Entropy production for the given flow kind.
pub fn entropy_production(
    model: &EntropyModel,
    grid: &Grid,
    u: &DensityField,
    kind: FlowKind,
) -> Result<f64, FlowError> {
    let vals = u.values();
    let centers = grid.cell_centers();
    let fbar = match kind {
        FlowKind::Spherical => flow::mean_fitness(model, grid, u),
        _ => 0.0,
    };
    let mut reaction = 0.0;
    if kind != FlowKind::Wasserstein {
        for (i, &v) in vals.iter().enumerate() {
            if v > 0.0 {
                let f = model.f(centers[i], v);
                reaction += v * (f - fbar) * (f - fbar);
            }
        }
        reaction *= grid.h();
    }
    let flux = flow::flux_faces(model, grid, u)?;
    let mut transport = 0.0;
    for (j, &fj) in flux.iter().enumerate() {
        if let Some(uf) = face_density(model, grid, vals, j) {
            if uf > 0.0 {
                transport += fj * fj / uf;
            }
        }
    }
    transport *= grid.h();
    Ok(reaction + transport)
}

/// Right-hand side of the energy identity, assembled with the same
/// discrete operators the scheme uses:
/// `-sum |grad Phi|^2 + sum (upwind(u) f_x) grad Phi + sum Phi R(u)`.
pub fn energy_identity_rhs(
    model: &EntropyModel,
    grid: &Grid,
    u: &DensityField,
    kind: FlowKind,
) -> Result<f64, FlowError> {
    let vals = u.values();
    let centers = grid.cell_centers();
    let mut phi = vec![0.0; vals.len()];
    for i in 0..vals.len() {
        phi[i] = model.phi(centers[i], vals[i])?;
    }
    let grad_phi = grid.gradient_faces(&phi)?;
    let mut transport = 0.0;
    let drift = model.is_x_dependent();
    for (j, &g) in grad_phi.iter().enumerate() {
        transport -= g * g;
        if drift {
            if let Some((l, r)) = grid.face_neighbors(j) {
                let xf = grid.face_positions()[j];
                let ubar = 0.5 * (vals[l] + vals[r]);
                let a = model.f_x(xf, ubar);
                let upwind = if a > 0.0 {
                    vals[l]
                } else if a < 0.0 {
                    vals[r]
                } else {
                    ubar
                };
                transport += upwind * a * g;
            }
        }
    }
    transport *= grid.h();

    let fbar = match kind {
        FlowKind::Spherical => flow::mean_fitness(model, grid, u),
        _ => 0.0,
    };
    let mut reaction = 0.0;
    if kind != FlowKind::Wasserstein {
        for (i, &v) in vals.iter().enumerate() {
            if v > 0.0 {
                reaction += (model.u_times_f(centers[i], v) - v * fbar) * phi[i];
            }
        }
        reaction *= grid.h();
    }
    Ok(transport + reaction)
}

/// One diagnostics row for a snapshot.
pub fn record(
    model: &EntropyModel,
    grid: &Grid,
    u: &DensityField,
    kind: FlowKind,
    t: f64,
) -> Result<DiagnosticRecord, FlowError> {
    let mut min_f = f64::INFINITY;
    let mut max_f = f64::NEG_INFINITY;
    for (&x, &v) in grid.cell_centers().iter().zip(u.values()) {
        let f = model.f(x, v);
        min_f = min_f.min(f);
        max_f = max_f.max(f);
    }
    Ok(DiagnosticRecord {
        t,
        entropy: entropy_total(model, grid, u)?,
        energy: energy_total(model, grid, u)?,
        production: entropy_production(model, grid, u, kind)?,
        fbar: flow::mean_fitness(model, grid, u),
        mass: u.mass(),
        min_f,
        max_f,
    })
}

#[derive(Debug, Clone)]
pub struct DecayFit {
    pub gamma: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least-squares fit of `log entropy` against time over the last
/// `tail_fraction` of snapshots with entropy above 1e-14.
pub fn fit_decay_rate(traj: &Trajectory, tail_fraction: f64) -> Result<DecayFit, DiagnosticsError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(DiagnosticsError::InsufficientData(
            "tail_fraction must lie in (0, 1]".into(),
        ));
    }
    let usable: Vec<(f64, f64)> = traj
        .diagnostics
        .iter()
        .filter(|r| r.entropy > 1e-14)
        .map(|r| (r.t, r.entropy.ln()))
        .collect();
    let start = ((usable.len() as f64) * (1.0 - tail_fraction)).floor() as usize;
    let tail = &usable[start.min(usable.len())..];
    if tail.len() < 10 {
        return Err(DiagnosticsError::InsufficientData(format!(
            "need at least 10 usable snapshots in the tail, have {}",
            tail.len()
        )));
    }
    let n = tail.len() as f64;
    let mean_t = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(t, y) in tail {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(DiagnosticsError::InsufficientData("degenerate time span".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(DecayFit { gamma: -slope, r_squared, n_points: tail.len() })
}

/// Empirical constants of an entropy--entropy-production style inequality.
#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub ratios: Vec<f64>,
    pub sup_ratio: f64,
    pub argmax_case: String,
    pub tolerance_notes: String,
}

/// Ratios `E(u) / D(u)` over a family; equilibrium members (both sides
/// below [`EQUILIBRIUM_SKIP`]) are skipped, and a vanishing production with
/// non-vanishing entropy is reported as a counterexample.
pub fn eep_ratio_sweep(
    model: &EntropyModel,
    grid: &Grid,
    family: &[DensityField],
    kind: FlowKind,
) -> Result<InequalityReport, DiagnosticsError> {
    let mut ratios = Vec::new();
    let mut sup = f64::NEG_INFINITY;
    let mut argmax = String::from("none");
    for (idx, u) in family.iter().enumerate() {
        let e = entropy_total(model, grid, u)?;
        let d = entropy_production(model, grid, u, kind)?;
        if d < EQUILIBRIUM_SKIP {
            if e > 1e-10 {
                return Err(DiagnosticsError::Counterexample {
                    case: format!("member {idx}"),
                    entropy: e,
                    production: d,
                });
            }
            continue;
        }
        let ratio = e / d;
        if ratio > sup {
            sup = ratio;
            argmax = format!("member {idx}");
        }
        ratios.push(ratio);
    }
    if ratios.is_empty() {
        sup = 0.0;
    }
    Ok(InequalityReport {
        ratios,
        sup_ratio: sup,
        argmax_case: argmax,
        tolerance_notes: format!(
            "equilibrium members skipped below {EQUILIBRIUM_SKIP:e}; kind {}",
            kind.name()
        ),
    })
}

#[derive(Debug, Clone)]
pub struct MaxPrincipleReport {
    pub pass: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub band: (f64, f64),
}

/// Checks that `f(x, u(t))` never leaves the initial band
/// `[min f(., u0), max f(., u0)]` beyond a discretization allowance of
/// `10 h^2 Lip(f)`, with `Lip(f)` measured on the initial snapshot.
pub fn check_max_principle(
    traj: &Trajectory,
    model: &EntropyModel,
    grid: &Grid,
) -> MaxPrincipleReport {
    let first = traj.snapshots.first().expect("non-empty trajectory");
    let f0: Vec<f64> = grid
        .cell_centers()
        .iter()
        .zip(first.values())
        .map(|(&x, &v)| model.f(x, v))
        .collect();
    let band = (
        f0.iter().copied().fold(f64::INFINITY, f64::min),
        f0.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let mut lip: f64 = 0.0;
    for j in 0..grid.n_faces() {
        if let Some((l, r)) = grid.face_neighbors(j) {
            lip = lip.max((f0[r] - f0[l]).abs() / grid.h());
        }
    }
    let tolerance = 10.0 * grid.h() * grid.h() * lip;
    let mut worst: f64 = 0.0;
    for rec in &traj.diagnostics {
        worst = worst.max(band.0 - rec.min_f).max(rec.max_f - band.1);
    }
    MaxPrincipleReport { pass: worst <= tolerance, worst_violation: worst, tolerance, band }
}
