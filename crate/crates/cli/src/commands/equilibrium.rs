use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{fmt_float, write_csv, write_json};
use crate::{CliError, Context};

#[derive(Serialize)]
struct Summary {
    c_star: f64,
    residual: f64,
    mass: f64,
}

pub fn run(config: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let grid = config.build_grid()?;
    let mut model = config.build_model()?;
    let eq = model
        .normalize_equilibrium(&grid, config.target_mass)
        .map_err(super::model_error)?;
    ctx.note(&format!(
        "equilibrium normalized: c* = {}, residual = {:.2e}",
        eq.c_star, eq.residual
    ));

    if config.wants_format("csv") {
        let rows = grid.cell_centers().iter().zip(eq.m.values()).map(|(&x, &m)| {
            vec![fmt_float(x), fmt_float(m), fmt_float(model.f(x, m))]
        });
        write_csv(&ctx.out_dir.join("equilibrium.csv"), &["x", "m", "f_at_m"], rows)?;
    }
    if config.wants_format("json") {
        write_json(
            &ctx.out_dir.join("summary.json"),
            &Summary { c_star: eq.c_star, residual: eq.residual, mass: eq.m.mass() },
        )?;
    }
    Ok(())
}
