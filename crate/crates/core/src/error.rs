use thiserror::Error;

/// Errors raised by the solvers and the flux/potential calculus.
///
/// Each variant maps to a module-qualified code (see [`Error::code`]) so the
/// scenario runner can surface failures without string matching.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no flux shift K makes f(a)/a positive and increasing on [{lo}, {hi}] (feasible interval ({k_min}, {k_max}) is empty)")]
    InfeasibleNormalization { lo: f64, hi: f64, k_min: f64, k_max: f64 },

    #[error("supplied derivative disagrees with central difference at {at}: given {given}, estimated {estimated}")]
    DerivativeMismatch { at: f64, given: f64, estimated: f64 },

    #[error("inversion failed for target {target}: residual {residual}")]
    InversionFailure { target: f64, residual: f64 },

    #[error("adaptive quadrature on [{a}, {b}] did not reach tolerance within the refinement limit")]
    QuadratureFailure { a: f64, b: f64 },

    #[error("time step {dt} exceeds CFL bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("stretch eta fell to {value} in cell {cell} at t = {t}")]
    PositivityLoss { cell: usize, value: f64, t: f64 },

    #[error("flow map is not strictly increasing at node {node} (increment {increment})")]
    MonotonicityLoss { node: usize, increment: f64 },

    #[error("anchor state drifted by {drift} (domain window too small)")]
    AnchorDrift { drift: f64 },

    #[error("point {y} lies outside the image [{lo}, {hi}] of the flow map")]
    OutOfRange { y: f64, lo: f64, hi: f64 },

    #[error("transport coefficient is degenerate at u = {u}")]
    DegenerateCoefficient { u: f64 },

    #[error("principal part is not hyperbolic: AC - B^2 = {value}")]
    NonHyperbolic { value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Module-qualified error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InfeasibleNormalization { .. } => "flux.infeasible_normalization",
            Error::DerivativeMismatch { .. } => "flux.derivative_mismatch",
            Error::InversionFailure { .. } => "flux.inversion_failure",
            Error::QuadratureFailure { .. } => "numerics.quadrature_failure",
            Error::CflViolation { .. } => "eulerian.cfl_violation",
            Error::PositivityLoss { .. } => "temple.positivity_loss",
            Error::MonotonicityLoss { .. } => "flow_map.monotonicity_loss",
            Error::AnchorDrift { .. } => "flow_map.anchor_drift",
            Error::OutOfRange { .. } => "flow_map.out_of_range",
            Error::DegenerateCoefficient { .. } => "variational.degenerate_coefficient",
            Error::NonHyperbolic { .. } => "systems.non_hyperbolic",
            Error::InvalidInput(_) => "input.invalid",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
