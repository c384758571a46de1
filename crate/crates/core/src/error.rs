//! Error types shared across the crate.

use thiserror::Error;

/// Rejection reasons for a graph description.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph has no vertices")]
    Empty,
    #[error("graph has no edges")]
    NoEdges,
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("edge {edge} references undeclared vertex `{vertex}`")]
    UnknownVertex { edge: usize, vertex: String },
    #[error("boundary vertex `{0}` is not a declared vertex")]
    UnknownBoundaryVertex(String),
    #[error("edge {edge} is a self-loop at `{vertex}`")]
    SelfLoop { edge: usize, vertex: String },
    #[error("edges {first} and {second} join the same pair of vertices")]
    DuplicateEdge { first: usize, second: usize },
    #[error("edge {edge} has nonpositive length {length}")]
    NonPositiveLength { edge: usize, length: f64 },
    #[error("edge {edge} has nonpositive weight {weight}")]
    NonPositiveWeight { edge: usize, weight: f64 },
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
}

/// Errors raised while building grids or assembling operators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscretizationError {
    #[error("edge {edge} has {cells} cells; at least 3 are required")]
    TooFewCells { edge: usize, cells: usize },
    #[error("expected {expected} per-edge cell counts, got {got}")]
    CellCountMismatch { expected: usize, got: usize },
    #[error("state has length {got}, grid has {expected} unknowns")]
    StateLength { expected: usize, got: usize },
    #[error("mobility exponent n = {0} is below 1 (set allow_small_exponent to override)")]
    ExponentOutOfRange(f64),
    #[error("regularization eps = {0} must be nonnegative")]
    NegativeEps(f64),
}

/// Failures of the time integrator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("non-finite value in state at t = {t}, step {step}")]
    NonFinite { t: f64, step: usize },
    #[error("step-size underflow at t = {t}, step {step}: dt = {dt} cannot be reduced below dt_min")]
    StepUnderflow { t: f64, step: usize, dt: f64 },
    #[error("at t = {t}, step {step}: {source}")]
    AtStep {
        t: f64,
        step: usize,
        #[source]
        source: Box<SolverError>,
    },
    #[error("eigen-solver failure: {0}")]
    Eigen(String),
    #[error("ode integration failure: {0}")]
    Ode(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

/// Invalid initial profiles or inconsistent vertex values.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("edge {edge}: {message}")]
    Invalid { edge: usize, message: String },
    #[error("edge {edge}: profile is negative ({value}) at s = {s}")]
    Negative { edge: usize, s: f64, value: f64 },
    #[error("vertex `{vertex}`: incident profiles disagree by {spread:e}")]
    VertexMismatch { vertex: String, spread: f64 },
    #[error("expected {expected} edge profiles, got {got}")]
    Count { expected: usize, got: usize },
}

/// Configuration parse and semantic errors.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Semantic { path: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl ConfigError {
    pub fn semantic(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Semantic {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Top-level error used by the command-line driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed data file: {0}")]
    Format(String),
}

impl Error {
    /// Process exit code for this error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Graph(_) | Error::Discretization(_) => 2,
            Error::Solver(_) => 3,
            Error::Io(_) | Error::Csv(_) | Error::Format(_) => 4,
        }
    }

    /// Short machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "numerical",
            _ => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
