//! Named property suites over configured families.
//!
//! Each suite runs a fixed, seeded family of cases and reports one row per
//! case plus a verdict; the CLI serializes the rows and maps the verdict
//! to its exit code. Tolerances are pinned here as constants with their
//! origin, not scattered through the calls.

use std::sync::Mutex;

use thiserror::Error;

use crate::diagnostics::{self, DiagnosticsError};
use crate::entropy::{EntropyModel, ModelError};
use crate::expr::Expr;
use crate::field::DensityField;
use crate::flow::{self, FlowError, FlowKind, SolverConfig};
use crate::grid::Grid;
use crate::seeded::{random_trig_density, SplitMix64};
use crate::transport::{self, SolverOpts, TransportError, TransportKind};

/// Relative dissipation/energy identity residual allowed at n = 256
/// (spatial O(h^2) consistency plus Euler and trapezoid time errors).
pub const IDENTITY_RESIDUAL_TOL: f64 = 0.05;
/// Entropy may exceed its predecessor by at most this much (roundoff).
pub const MONOTONICITY_SLACK: f64 = 1e-10;
/// Structural mass conservation allowance for spherical runs.
pub const MASS_TOL: f64 = 1e-12;
/// Allowed relative change of the EEP sup when the family is doubled.
pub const EEP_SUP_STABILITY: f64 = 0.05;
/// Universal spherical Talagrand bound: d_HKS^2 <= pi^2, with a 1% margin
/// for discretization and solver gap.
pub const HKS_PI_SQ_MARGIN: f64 = 1.01;
/// Conic bound d_HK^2 <= 4 (mass0 + mass1), same margin.
pub const HK_MASS_MARGIN: f64 = 1.01;
/// A seeded sup is "stable" when doubling the family grows it by at most
/// this factor.
pub const SEEDED_SUP_STABILITY: f64 = 1.5;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub id: String,
    pub fields: Vec<(String, f64)>,
    pub pass: bool,
    pub note: String,
}

impl CaseResult {
    fn new(id: impl Into<String>) -> CaseResult {
        CaseResult { id: id.into(), fields: Vec::new(), pass: true, note: String::new() }
    }

    fn field(mut self, name: &str, value: f64) -> CaseResult {
        self.fields.push((name.to_string(), value));
        self
    }

    fn check(mut self, ok: bool, note: &str) -> CaseResult {
        if !ok {
            self.pass = false;
            if !self.note.is_empty() {
                self.note.push_str("; ");
            }
            self.note.push_str(note);
        }
        self
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: Vec<CaseResult>,
    pub pass: bool,
}

impl SuiteReport {
    fn collect(suite: &str, cases: Vec<CaseResult>) -> SuiteReport {
        let pass = cases.iter().all(|c| c.pass);
        SuiteReport { suite: suite.to_string(), cases, pass }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOpts {
    pub seed: u64,
    pub jobs: usize,
}

impl Default for VerifyOpts {
    fn default() -> Self {
        VerifyOpts {
            seed: 42,
            jobs: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

pub const SUITE_NAMES: [&str; 7] = [
    "dissipation",
    "eep",
    "logsobolev",
    "talagrand",
    "ordering",
    "maxprinciple",
    "comparison",
];

/// Runs one named suite (or `all`).
pub fn run_suite(name: &str, opts: &VerifyOpts) -> Result<Vec<SuiteReport>, VerifyError> {
    match name {
        "dissipation" => Ok(vec![dissipation_suite()?]),
        "eep" => Ok(vec![eep_suite()?]),
        "logsobolev" => Ok(vec![logsobolev_suite()?]),
        "talagrand" => Ok(vec![talagrand_suite(opts)?]),
        "ordering" => Ok(vec![ordering_suite(opts)?]),
        "maxprinciple" => Ok(vec![maxprinciple_suite()?]),
        "comparison" => Ok(vec![comparison_suite()?]),
        "all" => {
            let mut out = Vec::new();
            for suite in SUITE_NAMES {
                out.extend(run_suite(suite, opts)?);
            }
            Ok(out)
        }
        other => Err(VerifyError::UnknownSuite(other.to_string())),
    }
}

/// Index-stable parallel map over a fixed worker count.
fn parallel_map<T, R, F>(jobs: usize, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let jobs = jobs.max(1);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let work: Mutex<std::vec::IntoIter<(usize, T)>> =
        Mutex::new(items.into_iter().enumerate().collect::<Vec<_>>().into_iter());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let next = work.lock().unwrap().next();
                match next {
                    Some((idx, item)) => {
                        let r = f(item);
                        *slots[idx].lock().unwrap() = Some(r);
                    }
                    None => break,
                }
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().unwrap().expect("worker filled slot")).collect()
}

fn cosine_bump(grid: &Grid, a: f64) -> DensityField {
    DensityField::from_fn(grid, |x| 1.0 + a * (2.0 * std::f64::consts::PI * x).cos())
        .expect("cosine bump is nonnegative for |a| < 1")
}

fn power_law_model(grid: &Grid) -> Result<EntropyModel, ModelError> {
    let mut model = EntropyModel::power_law(1.0)?;
    model.normalize_equilibrium(grid, 1.0)?;
    Ok(model)
}

fn log_cos_model(grid: &Grid) -> Result<EntropyModel, ModelError> {
    let mut model =
        EntropyModel::log_potential(Expr::parse("cos(2*pi*x)").expect("static expression"));
    model.normalize_equilibrium(grid, 1.0)?;
    Ok(model)
}

/// Max relative residual of the dissipation identity over snapshot pairs,
/// comparing the entropy slope against the trapezoid of the recorded
/// production.
///
/// Upwinded drift makes the discrete steady state sit O(h) away from the
/// analytic equilibrium, so entropy and production both plateau at an
/// O(h^2) floor where the continuum identity carries no signal at any
/// resolution. The residual is therefore measured on the smooth-data
/// regime where the entropy still dominates that floor: snapshots with
/// E(t) >= 0.02 E(0), i.e. the first 50x of decay. For drift-free models
/// the plateau is at roundoff and the window is immaterial.
pub fn dissipation_residual(traj: &flow::Trajectory) -> f64 {
    let initial = traj.diagnostics.first().map(|r| r.entropy).unwrap_or(0.0);
    let floor = (0.02 * initial).max(1e-16);
    let mut worst: f64 = 0.0;
    for w in traj.diagnostics.windows(2) {
        if w[0].entropy < floor || w[1].entropy < floor {
            continue;
        }
        let dt = w[1].t - w[0].t;
        let slope = (w[1].entropy - w[0].entropy) / dt;
        let production = 0.5 * (w[0].production + w[1].production);
        let res = (slope + production).abs() / production.max(1e-8);
        worst = worst.max(res);
    }
    worst
}

/// Max relative residual of the energy identity, comparing the energy
/// slope against the trapezoid of the right-hand side assembled from the
/// same discrete operators the scheme uses. This identity is exact in
/// space, so no windowing is needed.
pub fn energy_residual(
    model: &EntropyModel,
    grid: &Grid,
    traj: &flow::Trajectory,
) -> Result<f64, VerifyError> {
    let mut worst: f64 = 0.0;
    let mut rhs = Vec::with_capacity(traj.snapshots.len());
    for snap in &traj.snapshots {
        rhs.push(diagnostics::energy_identity_rhs(model, grid, snap, traj.kind)?);
    }
    for k in 0..traj.times.len().saturating_sub(1) {
        let dt = traj.times[k + 1] - traj.times[k];
        let slope = (traj.diagnostics[k + 1].energy - traj.diagnostics[k].energy) / dt;
        let want = 0.5 * (rhs[k] + rhs[k + 1]);
        let res = (slope - want).abs() / want.abs().max(1e-8);
        worst = worst.max(res);
    }
    Ok(worst)
}

struct DissipationRun {
    residual: f64,
    energy_residual: f64,
    monotone: bool,
    worst_mass_err: f64,
}

fn dissipation_run(
    model: &EntropyModel,
    grid: &Grid,
    snapshot_every: f64,
) -> Result<DissipationRun, VerifyError> {
    let u0 = cosine_bump(grid, 0.5);
    let config = SolverConfig { snapshot_every, ..SolverConfig::new(0.5, snapshot_every) };
    let traj = flow::run(model, grid, &u0, &config, FlowKind::Spherical)?;
    let residual = dissipation_residual(&traj);
    let energy_residual = energy_residual(model, grid, &traj)?;
    let monotone = traj
        .diagnostics
        .windows(2)
        .all(|w| w[1].entropy <= w[0].entropy + MONOTONICITY_SLACK);
    let worst_mass_err = traj
        .diagnostics
        .iter()
        .map(|r| (r.mass - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(DissipationRun { residual, energy_residual, monotone, worst_mass_err })
}

fn dissipation_suite() -> Result<SuiteReport, VerifyError> {
    let mut cases = Vec::new();
    let models: [(&str, fn(&Grid) -> Result<EntropyModel, ModelError>); 2] =
        [("power_law_a1", power_law_model), ("log_cos", log_cos_model)];
    for (name, make) in models {
        let mut residuals = Vec::new();
        for (n, snap) in [(256usize, 1e-3), (512usize, 2.5e-4)] {
            let grid = Grid::circle(n, 1.0)?;
            let model = make(&grid)?;
            let run = dissipation_run(&model, &grid, snap)?;
            residuals.push(run.residual);
            cases.push(
                CaseResult::new(format!("{name}_n{n}"))
                    .field("n", n as f64)
                    .field("dissipation_residual", run.residual)
                    .field("energy_residual", run.energy_residual)
                    .field("monotone", run.monotone as u8 as f64)
                    .field("worst_mass_err", run.worst_mass_err)
                    .check(run.residual <= IDENTITY_RESIDUAL_TOL, "dissipation residual")
                    .check(run.energy_residual <= IDENTITY_RESIDUAL_TOL, "energy residual")
                    .check(run.monotone, "entropy not monotone")
                    .check(run.worst_mass_err <= MASS_TOL, "mass drift"),
            );
        }
        cases.push(
            CaseResult::new(format!("{name}_refinement"))
                .field("coarse", residuals[0])
                .field("fine", residuals[1])
                .check(residuals[1] < residuals[0], "residual did not decrease"),
        );
    }
    Ok(SuiteReport::collect("dissipation", cases))
}

fn eep_suite() -> Result<SuiteReport, VerifyError> {
    let grid = Grid::circle(256, 1.0)?;
    let model = power_law_model(&grid)?;
    let family9: Vec<DensityField> =
        (1..=9).map(|k| cosine_bump(&grid, 0.1 * k as f64)).collect();
    let family18: Vec<DensityField> =
        (1..=18).map(|k| cosine_bump(&grid, 0.05 * k as f64)).collect();
    let small = diagnostics::eep_ratio_sweep(&model, &grid, &family9, FlowKind::Spherical)?;
    let large = diagnostics::eep_ratio_sweep(&model, &grid, &family18, FlowKind::Spherical)?;
    let mut cases = Vec::new();
    for (i, r) in small.ratios.iter().enumerate() {
        cases.push(
            CaseResult::new(format!("family9_member{i}"))
                .field("amplitude", 0.1 * (i + 1) as f64)
                .field("ratio", *r)
                .check(r.is_finite() && *r > 0.0, "non-finite ratio"),
        );
    }
    let drift = (large.sup_ratio - small.sup_ratio).abs() / small.sup_ratio;
    cases.push(
        CaseResult::new("sup_stability")
            .field("sup9", small.sup_ratio)
            .field("sup18", large.sup_ratio)
            .field("relative_change", drift)
            .check(drift < EEP_SUP_STABILITY, "sup not stable under family extension"),
    );
    Ok(SuiteReport::collect("eep", cases))
}

fn logsobolev_suite() -> Result<SuiteReport, VerifyError> {
    let grid = Grid::circle(256, 1.0)?;
    let mut model = EntropyModel::log_potential(Expr::constant(0.0));
    model.normalize_equilibrium(&grid, 1.0)?;
    let reference = {
        let u = cosine_bump(&grid, 0.05);
        let e = diagnostics::entropy_total(&model, &grid, &u)?;
        let d = diagnostics::entropy_production(&model, &grid, &u, FlowKind::Wasserstein)?;
        e / d
    };
    let sharp = 1.0 / (8.0 * std::f64::consts::PI * std::f64::consts::PI);
    let mut cases = vec![CaseResult::new("small_amplitude")
        .field("ratio", reference)
        .field("linearized_constant", sharp)
        .check(
            (reference - sharp).abs() <= 0.15 * sharp,
            "small-amplitude ratio far from 1/(8 pi^2)",
        )];
    for k in 1..=9 {
        let a = 0.1 * k as f64;
        let u = cosine_bump(&grid, a);
        let e = diagnostics::entropy_total(&model, &grid, &u)?;
        let d = diagnostics::entropy_production(&model, &grid, &u, FlowKind::Wasserstein)?;
        let ratio = e / d;
        cases.push(
            CaseResult::new(format!("amplitude_{k}"))
                .field("amplitude", a)
                .field("ratio", ratio)
                .check(ratio.is_finite(), "non-finite ratio")
                .check(ratio <= 2.0 * reference, "ratio above 2x small-amplitude value"),
        );
    }
    Ok(SuiteReport::collect("logsobolev", cases))
}

fn talagrand_suite(opts: &VerifyOpts) -> Result<SuiteReport, VerifyError> {
    let grid = Grid::circle(64, 1.0)?;
    let model = power_law_model(&grid)?;
    let n_time = 24;
    let solver = SolverOpts { tol: 1e-5, max_iters: 60_000, ..SolverOpts::default() };
    let pi_sq = std::f64::consts::PI * std::f64::consts::PI;

    let mut rng = SplitMix64::new(opts.seed);
    let mut inputs: Vec<(usize, TransportKind, DensityField)> = Vec::new();
    for idx in 0..20 {
        let u = random_trig_density(&grid, &mut rng, 3, 0.15, 1.0);
        inputs.push((idx, TransportKind::HKS, u));
    }
    for idx in 0..20 {
        let mass = rng.next_in(0.6, 1.8);
        let u = random_trig_density(&grid, &mut rng, 3, 0.15, mass);
        inputs.push((idx, TransportKind::HK, u));
    }

    let results = parallel_map(opts.jobs, inputs, |(idx, kind, u)| {
        let r = transport::talagrand_check(&model, &grid, &u, kind, n_time, &solver);
        (idx, kind, u.mass(), r)
    });

    let mut cases = Vec::new();
    let mut sups: std::collections::BTreeMap<&'static str, (f64, f64)> = Default::default();
    for (idx, kind, mass, outcome) in results {
        let case = match outcome {
            Ok(tc) => {
                let ratio = tc.ratio.unwrap_or(0.0);
                let bound_ok = match kind {
                    TransportKind::HKS => tc.distance_sq <= pi_sq * HKS_PI_SQ_MARGIN,
                    _ => tc.distance_sq <= 4.0 * (tc.mass_u0 + tc.mass_m) * HK_MASS_MARGIN,
                };
                let entry = sups.entry(kind.name()).or_insert((0.0, 0.0));
                if idx < 10 {
                    entry.0 = entry.0.max(ratio);
                }
                entry.1 = entry.1.max(ratio);
                CaseResult::new(format!("{}_{idx}", kind.name()))
                    .field("mass", mass)
                    .field("distance_sq", tc.distance_sq)
                    .field("entropy", tc.entropy)
                    .field("ratio", ratio)
                    .check(ratio.is_finite(), "non-finite ratio")
                    .check(bound_ok, "universal bound violated")
            }
            Err(e) => CaseResult::new(format!("{}_{idx}", kind.name()))
                .field("mass", mass)
                .check(false, &format!("solver failure: {e}")),
        };
        cases.push(case);
    }
    for (kind, (sup_half, sup_full)) in sups {
        cases.push(
            CaseResult::new(format!("{kind}_sup_stability"))
                .field("sup_first_half", sup_half)
                .field("sup_full", sup_full)
                .check(
                    sup_full <= SEEDED_SUP_STABILITY * sup_half.max(1e-12),
                    "sup unstable under family extension",
                ),
        );
    }
    Ok(SuiteReport::collect("talagrand", cases))
}

fn ordering_suite(opts: &VerifyOpts) -> Result<SuiteReport, VerifyError> {
    let grid = Grid::circle(64, 1.0)?;
    let n_time = 32;
    let solver = SolverOpts { tol: 1e-5, max_iters: 60_000, ..SolverOpts::default() };
    let mut rng = SplitMix64::new(opts.seed ^ 0x0FD1);
    let pairs: Vec<(usize, DensityField, DensityField)> = (0..10)
        .map(|idx| {
            let a = random_trig_density(&grid, &mut rng, 3, 0.1, 1.0);
            let b = random_trig_density(&grid, &mut rng, 3, 0.1, 1.0);
            (idx, a, b)
        })
        .collect();
    let results = parallel_map(opts.jobs, pairs, |(idx, a, b)| {
        (idx, transport::check_ordering(&grid, &a, &b, n_time, &solver))
    });
    let mut cases = Vec::new();
    for (idx, outcome) in results {
        let case = match outcome {
            Ok(rep) => CaseResult::new(format!("pair_{idx}"))
                .field("d_hk", rep.hk.distance)
                .field("d_hks", rep.hks.distance)
                .field("w2", rep.w2.distance)
                .field("epsilon", rep.epsilon)
                .check(rep.pass, "ordering violated"),
            Err(e) => {
                CaseResult::new(format!("pair_{idx}")).check(false, &format!("solver failure: {e}"))
            }
        };
        cases.push(case);
    }
    Ok(SuiteReport::collect("ordering", cases))
}

fn maxprinciple_suite() -> Result<SuiteReport, VerifyError> {
    let grid = Grid::circle(128, 1.0)?;
    let mut cases = Vec::new();
    let models: [(&str, fn(&Grid) -> Result<EntropyModel, ModelError>); 2] =
        [("power_law_a1", power_law_model), ("log_cos", log_cos_model)];
    for (name, make) in models {
        let model = make(&grid)?;
        let u0 = cosine_bump(&grid, 0.5);
        let config = SolverConfig::new(2.0, 0.01);
        let traj = flow::run(&model, &grid, &u0, &config, FlowKind::Spherical)?;
        let report = diagnostics::check_max_principle(&traj, &model, &grid);
        let worst_mass = traj
            .diagnostics
            .iter()
            .map(|r| (r.mass - 1.0).abs())
            .fold(0.0, f64::max);
        cases.push(
            CaseResult::new(name)
                .field("band_lo", report.band.0)
                .field("band_hi", report.band.1)
                .field("worst_violation", report.worst_violation)
                .field("tolerance", report.tolerance)
                .field("worst_mass_err", worst_mass)
                .check(report.pass, "band violated")
                .check(worst_mass <= MASS_TOL, "mass drift"),
        );
    }
    Ok(SuiteReport::collect("maxprinciple", cases))
}

fn comparison_suite() -> Result<SuiteReport, VerifyError> {
    let grid = Grid::circle(96, 1.0)?;
    let model = power_law_model(&grid)?;
    let tau = 2.0 * std::f64::consts::PI;
    let lo0 = DensityField::from_fn(&grid, |x| 1.0 + 0.3 * (tau * x).cos()).unwrap();
    let hi0 = DensityField::from_fn(&grid, |x| 1.25 + 0.3 * (tau * x).cos()).unwrap();
    let mut cases = Vec::new();
    for kind in [FlowKind::Wasserstein, FlowKind::Conic] {
        let mut lo = lo0.clone();
        let mut hi = hi0.clone();
        // shared, conservative dt (max Phi_u over both initial states)
        let dt = 0.25 * grid.h() * grid.h() / 1.55;
        let mut worst: f64 = f64::NEG_INFINITY;
        for _ in 0..1500 {
            lo = flow::step(&model, &grid, &lo, dt, kind)?.u;
            hi = flow::step(&model, &grid, &hi, dt, kind)?.u;
        }
        for (a, b) in lo.values().iter().zip(hi.values()) {
            worst = worst.max(a - b);
        }
        cases.push(
            CaseResult::new(format!("power_law_{}", kind.name()))
                .field("worst_excess", worst)
                .check(worst <= MONOTONICITY_SLACK, "comparison principle violated"),
        );
    }
    Ok(SuiteReport::collect("comparison", cases))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_preserves_order() {
        let out = parallel_map(3, (0..50).collect::<Vec<_>>(), |x| x * x);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
    }

    #[test]
    fn comparison_suite_passes() {
        let report = comparison_suite().unwrap();
        assert!(report.pass, "{:?}", report.cases);
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(matches!(
            run_suite("bogus", &VerifyOpts::default()),
            Err(VerifyError::UnknownSuite(_))
        ));
    }
}
