//! Strict JSON run configuration.
//!
//! Unknown keys are rejected everywhere; physical parameters are validated
//! against the library preconditions before any computation starts.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use hkflow::expr::Expr;
use hkflow::{DensityField, DomainKind, EntropyModel, FlowKind, Grid, TransportKind};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Option<DomainConfig>,
    pub model: Option<ModelConfig>,
    #[serde(default = "default_target_mass")]
    pub target_mass: f64,
    pub flow: Option<FlowConfig>,
    pub initial: Option<DensitySpec>,
    pub mass_recovery: Option<MassRecoveryConfig>,
    pub transport: Option<TransportConfig>,
    pub verify: Option<VerifyConfig>,
    pub output: Option<OutputConfig>,
    pub seed: Option<u64>,
}

fn default_target_mass() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: String,
    pub length: f64,
    pub n_cells: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub alpha: Option<f64>,
    pub potential: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub kind: String,
    pub t_end: f64,
    pub dt_init: Option<f64>,
    pub snapshot_every: f64,
    pub cfl_safety: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub expression: Option<String>,
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassRecoveryConfig {
    pub m0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    pub kind: String,
    pub n_time: usize,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub step_ratio: Option<f64>,
    pub relaxation: Option<f64>,
    pub rho0: DensitySpec,
    pub rho1: DensitySpec,
    #[serde(default)]
    pub dump_interpolation: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub suite: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub formats: Option<Vec<String>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn build_grid(&self) -> Result<Grid, CliError> {
        let domain = self
            .domain
            .as_ref()
            .ok_or_else(|| CliError::Config("missing \"domain\" section".into()))?;
        let kind = match domain.kind.as_str() {
            "circle" => DomainKind::Circle,
            "interval" => DomainKind::Interval,
            other => {
                return Err(CliError::Config(format!(
                    "domain.kind must be \"circle\" or \"interval\", got {other:?}"
                )))
            }
        };
        Grid::new(kind, domain.n_cells, domain.length)
            .map_err(|e| CliError::Config(format!("domain: {e}")))
    }

    /// Builds the configured model (validation errors are config errors;
    /// the caller normalizes, where failures map to exit code 3).
    pub fn build_model(&self) -> Result<EntropyModel, CliError> {
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::Config("missing \"model\" section".into()))?;
        match model.name.as_str() {
            "power_law" => {
                let alpha = model.alpha.ok_or_else(|| {
                    CliError::Config("model power_law requires \"alpha\"".into())
                })?;
                EntropyModel::power_law(alpha).map_err(|e| CliError::Config(e.to_string()))
            }
            "log_potential" => {
                let text = model.potential.as_deref().unwrap_or("0");
                let v = Expr::parse(text)
                    .map_err(|e| CliError::Config(format!("model.potential: {e}")))?;
                Ok(EntropyModel::log_potential(v))
            }
            "arctangential" => Ok(EntropyModel::arctangential()),
            other => Err(CliError::Config(format!(
                "model.name must be power_law | log_potential | arctangential, got {other:?}"
            ))),
        }
    }

    pub fn flow_kind(&self) -> Result<FlowKind, CliError> {
        let flow = self
            .flow
            .as_ref()
            .ok_or_else(|| CliError::Config("missing \"flow\" section".into()))?;
        match flow.kind.as_str() {
            "spherical" => Ok(FlowKind::Spherical),
            "conic" => Ok(FlowKind::Conic),
            "wasserstein" => Ok(FlowKind::Wasserstein),
            other => Err(CliError::Config(format!(
                "flow.kind must be spherical | conic | wasserstein, got {other:?}"
            ))),
        }
    }

    pub fn wants_format(&self, format: &str) -> bool {
        match self.output.as_ref().and_then(|o| o.formats.as_ref()) {
            Some(list) => list.iter().any(|f| f == format),
            None => true,
        }
    }
}

pub fn transport_kinds(name: &str) -> Result<Vec<TransportKind>, CliError> {
    match name {
        "w2" => Ok(vec![TransportKind::W2]),
        "hk" => Ok(vec![TransportKind::HK]),
        "hks" => Ok(vec![TransportKind::HKS]),
        "all" => Ok(vec![TransportKind::HK, TransportKind::HKS, TransportKind::W2]),
        other => Err(CliError::Config(format!(
            "transport.kind must be w2 | hk | hks | all, got {other:?}"
        ))),
    }
}

impl DensitySpec {
    /// Materializes the density on the grid from an expression or CSV.
    pub fn build(&self, grid: &Grid, label: &str) -> Result<DensityField, CliError> {
        let field = match (&self.expression, &self.csv) {
            (Some(expr), None) => {
                let e = Expr::parse(expr)
                    .map_err(|err| CliError::Config(format!("{label}.expression: {err}")))?;
                DensityField::from_fn(grid, |x| e.eval(x)).map_err(|err| {
                    CliError::Config(format!("{label}: expression yields invalid density: {err}"))
                })?
            }
            (None, Some(path)) => read_density_csv(grid, path, label)?,
            _ => {
                return Err(CliError::Config(format!(
                    "{label}: provide exactly one of \"expression\" or \"csv\""
                )))
            }
        };
        if self.normalize {
            field.normalized_to(1.0).ok_or_else(|| {
                CliError::Config(format!("{label}: cannot normalize a zero-mass density"))
            })
        } else {
            Ok(field)
        }
    }
}

fn read_density_csv(grid: &Grid, path: &Path, label: &str) -> Result<DensityField, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{label}: cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 && line.starts_with('x') {
            continue; // header
        }
        let last = line.split(',').next_back().unwrap_or(line).trim();
        let v: f64 = last.parse().map_err(|_| {
            CliError::Config(format!("{label}: bad number {last:?} on line {}", lineno + 1))
        })?;
        values.push(v);
    }
    if values.len() != grid.n_cells() {
        return Err(CliError::Config(format!(
            "{label}: {} values but the grid has {} cells",
            values.len(),
            grid.n_cells()
        )));
    }
    DensityField::new(grid, values)
        .map_err(|e| CliError::Config(format!("{label}: invalid density: {e}")))
}
