pub mod distance;
pub mod equilibrium;
pub mod simulate;
pub mod verify;

use hkflow::{FlowError, ModelError, TransportError};

use crate::CliError;

pub fn model_error(e: ModelError) -> CliError {
    match e {
        ModelError::InvalidParameter(_) => CliError::Config(e.to_string()),
        _ => CliError::Equilibrium(e.to_string()),
    }
}

pub fn flow_error(e: FlowError) -> CliError {
    match e {
        FlowError::Usage(_) => CliError::Config(e.to_string()),
        _ => CliError::Solver(e.to_string()),
    }
}

pub fn transport_error(e: TransportError) -> CliError {
    match e {
        TransportError::Usage(_) => CliError::Config(e.to_string()),
        TransportError::NonConvergence { .. } => CliError::Transport(e.to_string()),
        _ => CliError::Solver(e.to_string()),
    }
}
