use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("edge set contains a directed cycle through node {node}")]
    CycleDetected { node: usize },
    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },
    #[error("duplicate edge ({parent}, {child})")]
    DuplicateEdge { parent: usize, child: usize },
    #[error("node id {id} out of range for a graph with {m} nodes")]
    NodeIdOutOfRange { id: usize, m: usize },

    #[error("empty input")]
    EmptyInput,
    #[error("{what}: value {value} outside its domain")]
    DomainError { what: &'static str, value: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("p-value {value} at position {index} is not in [0, 1]")]
    InvalidPValue { index: usize, value: f64 },

    #[error("annotation of child {child} is not contained in that of parent {parent}")]
    AnnotationNotNested { parent: usize, child: usize },
    #[error("node {node} has an empty item annotation")]
    EmptyAnnotation { node: usize },

    #[error("lambda = {0} must lie in (0, 1)")]
    LambdaOutOfRange(f64),
    #[error("depth {depth} has no group larger than c = {c}")]
    NoEligibleGroup { depth: usize, c: usize },
    #[error("depth {depth} is not a depth of this graph (max depth {max})")]
    DepthOutOfRange { depth: usize, max: usize },

    #[error("weight {value} of node {node} is not positive and finite")]
    NonpositiveWeight { node: usize, value: f64 },
    #[error("target level q = {0} must lie in (0, 1)")]
    QOutOfRange(f64),
    #[error("invalid reshaping function: {0}")]
    InvalidReshaping(String),
    #[error("graph is not a tree")]
    NotATree,
    #[error("testing level {0} must lie in (0, 1)")]
    LevelOutOfRange(f64),
    #[error("rho = {0} must lie in [0, 1)")]
    RhoOutOfRange(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot parse {kind} from {input:?}")]
    UnknownName { kind: &'static str, input: String },
}
