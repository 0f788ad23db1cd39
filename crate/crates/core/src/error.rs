use thiserror::Error;

use crate::lichnerowicz::CaseId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has {found} values, expected {expected}")]
    BadLength { expected: usize, found: usize },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("metric is not positive definite at node {0}")]
    NonPositiveDefinite(usize),
    #[error("conformal factor must be positive, found minimum {0}")]
    NonPositive(f64),
    #[error("eigen solve stagnated after {iterations} iterations (residual {residual:e})")]
    EigenSolveFailure { iterations: usize, residual: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrylovError {
    #[error(
        "Krylov solve stagnated after {iterations} iterations (relative residual {residual:e})"
    )]
    Stagnation { iterations: usize, residual: f64 },
    #[error("operator is not positive definite (curvature {0:e})")]
    Indefinite(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LichError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("field must be positive, found minimum {0}")]
    NonPositive(f64),
    #[error("source amplitude w must be nonnegative, found minimum {0}")]
    NegativeSource(f64),
    #[error("no solution exists for this data (case {0:?})")]
    CaseUnsolvable(CaseId),
    #[error("Lichnerowicz solve did not converge (best residual {best_residual:e}, tolerance {tolerance:e})")]
    NoConvergence { best_residual: f64, tolerance: f64 },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error("solution overlaps the conformal Killing kernel by {0:e}")]
    KernelContamination(f64),
    #[error("phi must be nonnegative, found minimum {0}")]
    NegativePhi(f64),
    #[error("vector solve residual {residual:e} above tolerance {tolerance:e}")]
    Tolerance { residual: f64, tolerance: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoupledError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Lich(#[from] LichError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("invalid constraint data: {0}")]
    InvalidData(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("fixed-point iteration did not converge in {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("sup phi = {sup:e} exceeded the ceiling")]
    BlowUp { sup: f64 },
    #[error("mean curvature must be positive, found minimum {0}")]
    TauNotPositive(f64),
    #[error("sup psi grew only by a factor {0:.3} across the trace tail")]
    InsufficientBlowUp(f64),
    #[error("kappa_1 is unbounded below: R < 0 where tau vanishes (node {0})")]
    Unbounded(usize),
    #[error("pair is not a solution (Lichnerowicz residual {lich:e}, vector residual {vector:e})")]
    NotASolution { lich: f64, vector: f64 },
    #[error("no t in the grid produced a converged fixed point")]
    NotFound,
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid study spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Coupled(#[from] CoupledError),
    #[error(transparent)]
    Lich(#[from] LichError),
    #[error(transparent)]
    Io(#[from] IoError),
}
