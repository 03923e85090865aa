use thiserror::Error;

/// Every failure mode of the library. Numerical failures carry the location
/// where they were detected so callers can report it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields do not share a grid")]
    GridMismatch,
    #[error("stencil at node ({i}, {j}) does not fit inside the grid")]
    BoundaryProximity { i: usize, j: usize },
    #[error("leading coefficient of the cubic is zero")]
    DegenerateLeadingCoefficient,
    #[error("unknown solution id `{0}`")]
    UnknownSolution(String),
    #[error("point ({x}, {y}) is outside the domain of `{id}`")]
    DomainViolation { id: String, x: f64, y: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no real root in bracket [{lo}, {hi}] at ({x}, {y})")]
    NoRootInBracket { lo: f64, hi: f64, x: f64, y: f64 },
    #[error("{count} roots in bracket [{lo}, {hi}] at ({x}, {y}); narrow the bracket")]
    AmbiguousRoot { count: usize, lo: f64, hi: f64, x: f64, y: f64 },
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("denominator below floor at {} node(s), first at ({}, {})", .nodes.len(), .nodes[0].0, .nodes[0].1)]
    DenominatorFloor { nodes: Vec<(usize, usize)> },
    #[error("degenerate frame at node ({i}, {j})")]
    DegenerateFrame { i: usize, j: usize },
    #[error("characteristic roots are not real")]
    ComplexRoots,
    #[error("characteristic roots coincide or vanish")]
    CoincidentRoots,
    #[error("square-root chamber violated at {} node(s), first at ({}, {})", .nodes.len(), .nodes[0].0, .nodes[0].1)]
    ChamberViolation { nodes: Vec<(usize, usize)> },
    #[error("form is not closed: max |d form| = {residual:e} exceeds {tolerance:e}")]
    NotClosed { residual: f64, tolerance: f64 },
    #[error("resampling point ({xi}, {eta}) has no preimage in the grid")]
    ResampleOutOfRange { xi: f64, eta: f64 },
    #[error("p fell below the floor at x = {x}, y = {y}")]
    PFloor { x: f64, y: f64 },
    #[error("i/o: {0}")]
    Io(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
