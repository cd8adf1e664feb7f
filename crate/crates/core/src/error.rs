use thiserror::Error;

/// Failures raised while reading, generating or validating a graph.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: self-loop at vertex {vertex}")]
    SelfLoop { line: usize, vertex: u64 },
    #[error("line {line}: duplicate edge {u}-{v}")]
    DuplicateEdge { line: usize, u: u64, v: u64 },
    #[error("line {line}: edge weight {weight} is not positive")]
    NonPositiveWeight { line: usize, weight: f64 },
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("graph has no edges")]
    Empty,
    #[error("unknown graph family `{0}`")]
    UnknownFamily(String),
    #[error("{family} level {level} exceeds the vertex cap ({cap})")]
    LevelTooLarge {
        family: &'static str,
        level: usize,
        cap: usize,
    },
    #[error("invalid generator option: {0}")]
    InvalidOption(String),
}

/// Errors produced by the computational modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("vertex {vertex} out of range (graph has {count} vertices)")]
    InvalidVertex { vertex: usize, count: usize },
    #[error("start vertex {0} is not inside the region")]
    StartOutsideRegion(usize),
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("sets overlap at vertex {0}")]
    Overlap(usize),
    #[error("linear system is singular: {0}")]
    Singular(String),
    #[error("harmonic problem has no boundary value at vertex {0}")]
    MissingBoundaryValue(usize),
    #[error("iterative solver stalled after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("request at vertex {x}, radius {radius} reaches the truncation boundary")]
    NotInterior { x: usize, radius: f64 },
    #[error("value {requested} lies beyond the computed profile (max {available})")]
    OutOfRange { requested: f64, available: f64 },
    #[error("profile too short: {len} radii, need at least {need}")]
    ProfileTooShort { len: usize, need: usize },
    #[error("sweep is empty after interior-validity filtering")]
    EmptySweep,
    #[error("graph failed the very-strong-recurrence gate (constant {0:.4})")]
    NotVsr(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
