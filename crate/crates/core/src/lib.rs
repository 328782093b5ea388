//! Entropy gradient flows and dynamic-formulation transport distances on
//! one-dimensional domains (circle or no-flux interval).
//!
//! The library has three legs:
//!
//! - **Flows**: explicit finite-volume time integration of
//!   `du/dt = -div(u grad f) + R(u)` where `f = f(x, u)` is a strictly
//!   decreasing fitness/nonlinearity. The reaction `R` selects the flow:
//!   `u(f - fbar)` (mass-conserving spherical flow), `u f` (conic flow on
//!   measures of any mass), or `0` (Fokker-Planck / Wasserstein flow).
//! - **Diagnostics**: relative entropy `E(u) = int E(x,u) dx`, energy
//!   `W(u) = int Psi(x,u) dx`, entropy production, decay-rate fits, and
//!   empirical entropy--entropy-production and max-principle checks.
//! - **Transport**: the distances `W2`, `d_HK`, `d_HKS` computed from the
//!   dynamic (Benamou-Brenier) formulation with action
//!   `int_0^1 int (|v|^2 + |a|^2) drho dt` under the continuity equation
//!   `d_t rho + div(rho v) = rho a`, solved by a primal-dual splitting on
//!   a staggered space-time grid.
//!
//! All quadrature is the shared midpoint rule of [`grid::Grid`], so the
//! discrete conservation and dissipation identities close structurally
//! rather than approximately.

pub mod diagnostics;
pub mod entropy;
pub mod expr;
pub mod field;
pub mod flow;
pub mod grid;
pub mod quad;
pub mod seeded;
pub mod transport;
pub mod verify;

pub use diagnostics::{DiagnosticRecord, InequalityReport};
pub use entropy::{EntropyModel, EquilibriumResult, ModelError};
pub use expr::Expr;
pub use field::DensityField;
pub use flow::{FlowError, FlowKind, SolverConfig, Trajectory};
pub use grid::{DomainKind, Grid, GridError};
pub use transport::{
    SolverOpts, TransportError, TransportKind, TransportProblem, TransportResult,
};
