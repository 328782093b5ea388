use serde::Serialize;

use hkflow::transport::{self, SolverOpts, TransportProblem, TransportResult};
use hkflow::TransportError;

use crate::config::{transport_kinds, RunConfig};
use crate::output::{fmt_float, write_csv, write_json};
use crate::{CliError, Context};

#[derive(Serialize)]
struct KindReport {
    kind: &'static str,
    distance: f64,
    distance_sq: f64,
    residual: f64,
    iters: usize,
    converged: bool,
}

#[derive(Serialize)]
struct Summary {
    reports: Vec<KindReport>,
    /// `d_HK <= d_HKS <= W2` observed (only when all three were solved).
    ordering_ok: Option<bool>,
}

fn dump_interpolation(
    ctx: &Context,
    grid: &hkflow::Grid,
    result: &TransportResult,
) -> Result<(), CliError> {
    let Some(fields) = &result.interpolation else { return Ok(()) };
    let dt = 1.0 / fields.n_time as f64;
    let mut rows = Vec::with_capacity(fields.n_time * fields.n_cells);
    for k in 0..fields.n_time {
        let t = (k as f64 + 0.5) * dt;
        for i in 0..fields.n_cells {
            let idx = k * fields.n_cells + i;
            rows.push(vec![
                fmt_float(t),
                fmt_float(grid.cell_centers()[i]),
                fmt_float(fields.rho[idx]),
                fmt_float(fields.momentum[idx]),
                fmt_float(fields.source[idx]),
            ]);
        }
    }
    write_csv(
        &ctx.out_dir.join(format!("interpolation_{}.csv", result.kind.name())),
        &["t", "x", "rho", "momentum", "source"],
        rows,
    )
}

pub fn run(config: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let grid = config.build_grid()?;
    let tc = config
        .transport
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"transport\" section".into()))?;
    let kinds = transport_kinds(&tc.kind)?;
    let rho0 = tc.rho0.build(&grid, "transport.rho0")?;
    let rho1 = tc.rho1.build(&grid, "transport.rho1")?;

    let mut opts = SolverOpts { keep_interpolation: tc.dump_interpolation, ..Default::default() };
    if let Some(t) = tc.tol {
        opts.tol = t;
    }
    if let Some(m) = tc.max_iters {
        opts.max_iters = m;
    }
    if let Some(r) = tc.step_ratio {
        opts.step_ratio = r;
    }
    if let Some(r) = tc.relaxation {
        opts.relaxation = r;
    }
    if let Some(seed) = ctx.seed {
        opts.seed = seed;
    }

    let mut reports = Vec::new();
    let mut failure: Option<CliError> = None;
    for kind in &kinds {
        let problem = TransportProblem::new(
            grid.clone(),
            rho0.clone(),
            rho1.clone(),
            *kind,
            tc.n_time,
            opts.clone(),
        )
        .map_err(super::transport_error)?;
        ctx.note(&format!("distance: solving {}", kind.name()));
        let (result, converged) = match transport::solve_dynamic(&problem) {
            Ok(r) => (r, true),
            Err(TransportError::NonConvergence { best }) => {
                // keep the best-iterate report, then fail with exit 5
                failure.get_or_insert(CliError::Transport(format!(
                    "{} stalled at residual {:.3e}",
                    kind.name(),
                    best.residual
                )));
                (*best, false)
            }
            Err(e) => return Err(super::transport_error(e)),
        };
        dump_interpolation(ctx, &grid, &result)?;
        reports.push(KindReport {
            kind: result.kind.name(),
            distance: result.distance,
            distance_sq: result.distance_sq,
            residual: result.residual,
            iters: result.iters,
            converged,
        });
    }

    let ordering_ok = (kinds.len() == 3).then(|| {
        let get = |name: &str| reports.iter().find(|r| r.kind == name).map(|r| r.distance);
        match (get("hk"), get("hks"), get("w2")) {
            (Some(hk), Some(hks), Some(w2)) => hk <= hks + 1e-6 && hks <= w2 + 1e-6,
            _ => false,
        }
    });

    if config.wants_format("csv") {
        let rows = reports.iter().map(|r| {
            vec![
                r.kind.to_string(),
                fmt_float(r.distance),
                fmt_float(r.distance_sq),
                fmt_float(r.residual),
                r.iters.to_string(),
                (r.converged as u8).to_string(),
            ]
        });
        write_csv(
            &ctx.out_dir.join("distances.csv"),
            &["kind", "distance", "distance_sq", "residual", "iters", "converged"],
            rows,
        )?;
    }
    if config.wants_format("json") {
        write_json(&ctx.out_dir.join("summary.json"), &Summary { reports, ordering_ok })?;
    }

    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
