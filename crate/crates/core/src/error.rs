use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("flow-time overflow: |t| = {0} exceeds the allowed range")]
    FlowTimeOverflow(f64),
    #[error("off-shell point: p0 = {p0}, expected {expected}")]
    OffShell { p0: f64, expected: f64 },
    #[error("reduction stall: base point at distance {distance} from the center")]
    ReductionStall { distance: f64 },
    #[error("rejection failure: acceptance rate {rate} below 1%")]
    RejectionFailure { rate: f64 },
    #[error("stencil unstable: Richardson levels differ by {spread} (tolerance {tol})")]
    StencilUnstable { spread: f64, tol: f64 },
    #[error("energy drift exceeded: {drift} > {limit}")]
    EnergyDriftExceeded { drift: f64, limit: f64 },
    #[error("negative radicand: anchor energy {anchor_energy} below potential term {potential_term}")]
    NegativeRadicand { anchor_energy: f64, potential_term: f64 },
    #[error("no dominant coefficient among the first {count} derivative coefficients")]
    NoDominantCoefficient { count: usize },
    #[error("root finding failed: residual {0}")]
    RootResidual(f64),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
