use serde::Serialize;

use hkflow::diagnostics::{self, DiagnosticsError};
use hkflow::flow::{self, SolverConfig, Trajectory};
use hkflow::verify;
use hkflow::{FlowError, FlowKind};

use crate::config::RunConfig;
use crate::output::{fmt_float, write_csv, write_json};
use crate::{CliError, Context};

#[derive(Serialize)]
struct DecaySummary {
    gamma: f64,
    r_squared: f64,
    n_points: usize,
}

#[derive(Serialize)]
struct MaxPrincipleSummary {
    pass: bool,
    worst_violation: f64,
    tolerance: f64,
    band_lo: f64,
    band_hi: f64,
}

#[derive(Serialize)]
struct Summary {
    kind: &'static str,
    t_end: f64,
    snapshots: usize,
    steps: u64,
    clipped_mass: f64,
    final_entropy: f64,
    worst_mass_error: f64,
    dissipation_residual: f64,
    energy_residual: f64,
    decay: Option<DecaySummary>,
    max_principle: Option<MaxPrincipleSummary>,
    /// Set when the run hit the stiffness guard and outputs are partial.
    truncated_at: Option<f64>,
}

fn write_outputs(
    config: &RunConfig,
    ctx: &Context,
    model: &hkflow::EntropyModel,
    grid: &hkflow::Grid,
    traj: &Trajectory,
    kind: FlowKind,
    truncated_at: Option<f64>,
) -> Result<(), CliError> {
    if config.wants_format("csv") {
        let rows = traj.diagnostics.iter().map(|r| {
            vec![
                fmt_float(r.t),
                fmt_float(r.entropy),
                fmt_float(r.energy),
                fmt_float(r.production),
                fmt_float(r.mass),
                fmt_float(r.fbar),
                fmt_float(r.min_f),
                fmt_float(r.max_f),
            ]
        });
        write_csv(
            &ctx.out_dir.join("trajectory.csv"),
            &["t", "entropy", "energy", "production", "mass", "fbar", "min_f", "max_f"],
            rows,
        )?;
        for (k, (t, snap)) in traj.times.iter().zip(&traj.snapshots).enumerate() {
            let rows = grid
                .cell_centers()
                .iter()
                .zip(snap.values())
                .map(|(&x, &u)| vec![fmt_float(x), fmt_float(u)]);
            let _ = t;
            write_csv(
                &ctx.out_dir.join(format!("snapshots/snap_{k:06}.csv")),
                &["x", "u"],
                rows,
            )?;
        }
        if let Some(mr) = &config.mass_recovery {
            if kind == FlowKind::Spherical {
                let rec = flow::mass_recovery(traj, mr.m0).map_err(super::flow_error)?;
                let rows = rec
                    .times
                    .iter()
                    .zip(&rec.mass)
                    .map(|(&t, &m)| vec![fmt_float(t), fmt_float(m)]);
                write_csv(&ctx.out_dir.join("mass.csv"), &["t", "M"], rows)?;
            } else {
                return Err(CliError::Config(
                    "mass_recovery requires flow.kind = spherical".into(),
                ));
            }
        }
    }
    if config.wants_format("json") {
        let decay = match diagnostics::fit_decay_rate(traj, 0.5) {
            Ok(fit) => Some(DecaySummary {
                gamma: fit.gamma,
                r_squared: fit.r_squared,
                n_points: fit.n_points,
            }),
            Err(DiagnosticsError::InsufficientData(_)) => None,
            Err(e) => return Err(CliError::Solver(e.to_string())),
        };
        let max_principle = (kind == FlowKind::Spherical).then(|| {
            let rep = diagnostics::check_max_principle(traj, model, grid);
            MaxPrincipleSummary {
                pass: rep.pass,
                worst_violation: rep.worst_violation,
                tolerance: rep.tolerance,
                band_lo: rep.band.0,
                band_hi: rep.band.1,
            }
        });
        let energy_residual =
            verify::energy_residual(model, grid, traj).map_err(|e| CliError::Solver(e.to_string()))?;
        let summary = Summary {
            kind: kind.name(),
            t_end: *traj.times.last().unwrap_or(&0.0),
            snapshots: traj.snapshots.len(),
            steps: traj.steps,
            clipped_mass: traj.clipped_mass,
            final_entropy: traj.diagnostics.last().map(|r| r.entropy).unwrap_or(0.0),
            worst_mass_error: traj
                .diagnostics
                .iter()
                .map(|r| (r.mass - traj.diagnostics[0].mass).abs())
                .fold(0.0, f64::max),
            dissipation_residual: verify::dissipation_residual(traj),
            energy_residual,
            decay,
            max_principle,
            truncated_at,
        };
        write_json(&ctx.out_dir.join("summary.json"), &summary)?;
    }
    Ok(())
}

pub fn run(config: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let grid = config.build_grid()?;
    let mut model = config.build_model()?;
    model
        .normalize_equilibrium(&grid, config.target_mass)
        .map_err(super::model_error)?;
    let kind = config.flow_kind()?;
    let flow_cfg = config.flow.as_ref().expect("flow_kind() validated presence");
    let initial = config
        .initial
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"initial\" section".into()))?;
    let u0 = initial.build(&grid, "initial")?;

    let mut solver = SolverConfig::new(flow_cfg.t_end, flow_cfg.snapshot_every);
    if let Some(dt) = flow_cfg.dt_init {
        solver.dt_init = dt;
    }
    if let Some(c) = flow_cfg.cfl_safety {
        solver.cfl_safety = c;
    }

    ctx.note(&format!(
        "simulate: {} flow to t = {} on {} cells",
        kind.name(),
        flow_cfg.t_end,
        grid.n_cells()
    ));
    match flow::run(&model, &grid, &u0, &solver, kind) {
        Ok(traj) => {
            write_outputs(config, ctx, &model, &grid, &traj, kind, None)?;
            Ok(())
        }
        Err(FlowError::Stiffness { t, partial }) => {
            // partial outputs retained, then the solver failure is reported
            write_outputs(config, ctx, &model, &grid, &partial, kind, Some(t))?;
            Err(CliError::Solver(format!("time step underflow at t = {t}")))
        }
        Err(e) => Err(super::flow_error(e)),
    }
}
