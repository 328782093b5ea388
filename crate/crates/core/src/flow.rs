//! Explicit finite-volume time integration of the three gradient flows.
//!
//! The common transport operator is `div F` with the face flux written in
//! Phi-form,
//!
//! `F = grad Phi(x,u) - avg(Phi_x) - upwind(u) * f_x`,
//!
//! which equals `-u grad f(x,u)` but stays meaningful on vacuum: where both
//! neighbor cells are empty every term vanishes instead of producing
//! `0 * inf`. The diffusive part uses centered differences; the drift part
//! upwinds the density by the sign of the drift coefficient `f_x`.
//!
//! The reaction selects the flow:
//!
//! - `Spherical`:   `R = u (f - fbar)` with `fbar = sum(u f) / sum(u)` in
//!   the same midpoint quadrature as the mass, so the reaction is exactly
//!   mass-neutral and conservation is structural;
//! - `Conic`:       `R = u f` (any positive mass);
//! - `Wasserstein`: `R = 0`.
//!
//! Time stepping is forward Euler under the diffusive CFL bound
//! `dt <= cfl * h^2 / max Phi_u`, with step rejection (halving) whenever an
//! update dips below -1e-13 and clipping of roundoff-scale negatives.

use thiserror::Error;

use crate::diagnostics::{self, DiagnosticRecord};
use crate::entropy::{EntropyModel, ModelError};
use crate::field::DensityField;
use crate::grid::{Grid, GridError};

/// Updates below this value reject the step; negatives above it are
/// roundoff shadows and get clipped (with the defect logged).
pub const REJECT_FLOOR: f64 = -1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Spherical,
    Conic,
    Wasserstein,
}

impl FlowKind {
    pub fn name(&self) -> &'static str {
        match self {
            FlowKind::Spherical => "spherical",
            FlowKind::Conic => "conic",
            FlowKind::Wasserstein => "wasserstein",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub dt_init: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub snapshot_every: f64,
    pub positivity_floor: f64,
}

impl SolverConfig {
    pub fn new(t_end: f64, snapshot_every: f64) -> SolverConfig {
        SolverConfig {
            dt_init: f64::INFINITY,
            t_end,
            cfl_safety: 0.45,
            snapshot_every,
            positivity_floor: 0.0,
        }
    }
}

/// Time series of density snapshots plus per-snapshot diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: FlowKind,
    pub times: Vec<f64>,
    pub snapshots: Vec<DensityField>,
    pub diagnostics: Vec<DiagnosticRecord>,
    /// Total mass added by clipping roundoff negatives to zero.
    pub clipped_mass: f64,
    pub steps: u64,
}

impl Trajectory {
    pub fn last(&self) -> &DensityField {
        self.snapshots.last().expect("trajectory has at least the initial snapshot")
    }
}

/// Mass series recovered from a spherical trajectory plus the rescaled
/// (conic) snapshots `U = M u`.
#[derive(Debug, Clone)]
pub struct MassRecovery {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub scaled: Vec<DensityField>,
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("step rejected: update reached {min_value:e}")]
    StepRejected { min_value: f64 },
    #[error("non-finite value in model evaluation: {0}")]
    Numeric(String),
    #[error("time step underflow at t = {t}: the problem is too stiff for the explicit scheme")]
    Stiffness { t: f64, partial: Box<Trajectory> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// The face flux `F = grad Phi - avg(Phi_x) - upwind(u) f_x` (equal to
/// `-u grad f`). Interval boundary faces carry zero flux.
pub fn flux_faces(
    model: &EntropyModel,
    grid: &Grid,
    u: &DensityField,
) -> Result<Vec<f64>, FlowError> {
    let vals = u.values();
    let n = grid.n_cells();
    let centers = grid.cell_centers();
    let mut phi = vec![0.0; n];
    for i in 0..n {
        phi[i] = model.phi(centers[i], vals[i])?;
    }
    let drift = model.is_x_dependent();
    let mut out = vec![0.0; grid.n_faces()];
    for (j, slot) in out.iter_mut().enumerate() {
        let Some((l, r)) = grid.face_neighbors(j) else { continue };
        let mut flux = (phi[r] - phi[l]) / grid.h();
        if drift {
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
            flux -= upwind * a;
        }
        // Phi_x is identically zero for the built-in families; the term
        // -avg(Phi_x) would subtract here otherwise.
        *slot = flux;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(FlowError::Numeric("face flux is not finite".into()));
    }
    Ok(out)
}

/// Mean fitness `fbar = sum(u f) h / sum(u) h`, the quantity that makes the
/// spherical reaction mass-neutral. Returns 0 for identically zero u.
pub fn mean_fitness(model: &EntropyModel, grid: &Grid, u: &DensityField) -> f64 {
    let centers = grid.cell_centers();
    let mut sum_uf = 0.0;
    let mut sum_u = 0.0;
    for (i, &v) in u.values().iter().enumerate() {
        sum_uf += model.u_times_f(centers[i], v);
        sum_u += v;
    }
    if sum_u == 0.0 {
        0.0
    } else {
        sum_uf / sum_u
    }
}

pub struct StepOutput {
    pub u: DensityField,
    /// Mass added by clipping negatives in (REJECT_FLOOR, 0) to zero.
    pub clipped_mass: f64,
}

/// One forward-Euler update `u' = u + dt (div F + R(u))`.
pub fn step(
    model: &EntropyModel,
    grid: &Grid,
    u: &DensityField,
    dt: f64,
    kind: FlowKind,
) -> Result<StepOutput, FlowError> {
    if !(dt > 0.0) {
        return Err(FlowError::Usage("dt must be positive".into()));
    }
    let flux = flux_faces(model, grid, u)?;
    let mut div = vec![0.0; grid.n_cells()];
    grid.divergence_cells_into(&flux, &mut div);

    let centers = grid.cell_centers();
    let vals = u.values();
    let fbar = match kind {
        FlowKind::Spherical => mean_fitness(model, grid, u),
        _ => 0.0,
    };

    let mut next = vec![0.0; vals.len()];
    let mut min_value = f64::INFINITY;
    for i in 0..vals.len() {
        let reaction = match kind {
            FlowKind::Wasserstein => 0.0,
            FlowKind::Conic => model.u_times_f(centers[i], vals[i]),
            FlowKind::Spherical => model.u_times_f(centers[i], vals[i]) - vals[i] * fbar,
        };
        let v = vals[i] + dt * (div[i] + reaction);
        min_value = min_value.min(v);
        next[i] = v;
    }
    if !min_value.is_finite() {
        return Err(FlowError::Numeric("density update is not finite".into()));
    }
    if min_value < REJECT_FLOOR {
        return Err(FlowError::StepRejected { min_value });
    }
    let mut clipped = 0.0;
    if min_value < 0.0 {
        for v in &mut next {
            if *v < 0.0 {
                clipped -= *v;
                *v = 0.0;
            }
        }
    }
    Ok(StepOutput { u: DensityField::from_raw(grid, next), clipped_mass: clipped * grid.h() })
}

fn validate_initial(u0: &DensityField, kind: FlowKind) -> Result<(), FlowError> {
    match kind {
        FlowKind::Spherical | FlowKind::Wasserstein => {
            if (u0.mass() - 1.0).abs() > 1e-8 {
                return Err(FlowError::Usage(format!(
                    "{} flow requires unit initial mass, got {}",
                    kind.name(),
                    u0.mass()
                )));
            }
        }
        FlowKind::Conic => {
            if !(u0.mass() > 0.0) {
                return Err(FlowError::Usage("conic flow requires positive initial mass".into()));
            }
        }
    }
    Ok(())
}

/// Integrates to `t_end` with the adaptive explicit scheme, recording
/// diagnostics every `snapshot_every` units of simulated time (snapshot
/// instants are hit exactly).
pub fn run(
    model: &EntropyModel,
    grid: &Grid,
    u0: &DensityField,
    config: &SolverConfig,
    kind: FlowKind,
) -> Result<Trajectory, FlowError> {
    if !(config.t_end > 0.0) || !(config.snapshot_every > 0.0) {
        return Err(FlowError::Usage("t_end and snapshot_every must be positive".into()));
    }
    if !(config.cfl_safety > 0.0 && config.cfl_safety <= 1.0) {
        return Err(FlowError::Usage("cfl_safety must lie in (0, 1]".into()));
    }
    validate_initial(u0, kind)?;

    let centers = grid.cell_centers();
    let cfl_bound = |u: &DensityField| -> f64 {
        let mut max_phi_u: f64 = 0.0;
        for (i, &v) in u.values().iter().enumerate() {
            max_phi_u = max_phi_u.max(model.phi_u(centers[i], v));
        }
        if max_phi_u > 0.0 {
            config.cfl_safety * grid.h() * grid.h() / max_phi_u
        } else {
            f64::INFINITY
        }
    };

    let mut traj = Trajectory {
        kind,
        times: vec![0.0],
        snapshots: vec![u0.clone()],
        diagnostics: vec![diagnostics::record(model, grid, u0, kind, 0.0)?],
        clipped_mass: 0.0,
        steps: 0,
    };

    let mut u = u0.clone();
    let mut t = 0.0;
    let mut dt_cur = config.dt_init;
    let mut accepted = 0u32;
    let mut snap_index = 1u64;
    let eps = 1e-12 * config.t_end;

    while t < config.t_end - eps {
        let next_snap = (snap_index as f64 * config.snapshot_every).min(config.t_end);
        let dt = dt_cur.min(cfl_bound(&u)).min(next_snap - t);
        if dt < 1e-14 * config.t_end {
            return Err(FlowError::Stiffness { t, partial: Box::new(traj) });
        }
        match step(model, grid, &u, dt, kind) {
            Ok(out) => {
                u = out.u;
                traj.clipped_mass += out.clipped_mass;
                t += dt;
                traj.steps += 1;
                accepted += 1;
                if accepted >= 20 {
                    dt_cur = (dt_cur * 2.0).min(config.dt_init);
                    accepted = 0;
                }
                if t >= next_snap - eps {
                    t = next_snap; // snap exactly onto the cadence
                    traj.times.push(t);
                    traj.snapshots.push(u.clone());
                    traj.diagnostics.push(diagnostics::record(model, grid, &u, kind, t)?);
                    snap_index += 1;
                }
            }
            Err(FlowError::StepRejected { .. }) => {
                dt_cur = dt * 0.5;
                accepted = 0;
            }
            Err(other) => return Err(other),
        }
    }
    Ok(traj)
}

/// Recovers the mass series `M(t) = M0 exp(int_0^t fbar)` of the fitness
/// model from a spherical trajectory (trapezoidal quadrature of the
/// recorded fbar values) and returns the rescaled snapshots `U = M u`.
pub fn mass_recovery(
    traj: &Trajectory,
    m0: f64,
) -> Result<MassRecovery, FlowError> {
    if traj.kind != FlowKind::Spherical {
        return Err(FlowError::Usage("mass recovery needs a spherical trajectory".into()));
    }
    if !(m0 > 0.0) {
        return Err(FlowError::Usage("initial mass must be positive".into()));
    }
    if traj.diagnostics.len() != traj.times.len() || traj.diagnostics.is_empty() {
        return Err(FlowError::Usage("trajectory is missing fbar records".into()));
    }
    let mut mass = Vec::with_capacity(traj.times.len());
    let mut integral = 0.0;
    for k in 0..traj.times.len() {
        if k > 0 {
            let dt = traj.times[k] - traj.times[k - 1];
            integral +=
                0.5 * dt * (traj.diagnostics[k - 1].fbar + traj.diagnostics[k].fbar);
        }
        mass.push(m0 * integral.exp());
    }
    let scaled = traj
        .snapshots
        .iter()
        .zip(&mass)
        .map(|(u, &m)| u.scaled(m))
        .collect();
    Ok(MassRecovery { times: traj.times.clone(), mass, scaled })
}
