use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph is not strongly connected ({components} components, largest has {largest} nodes: {largest_members})")]
    NotStronglyConnected {
        components: usize,
        largest: usize,
        largest_members: String,
    },
    #[error("fitness of node {node} must be positive (m = {mutant}, r = {resident})")]
    NonPositiveFitness { node: usize, mutant: f64, resident: f64 },
    #[error("out-weights of node {node} sum to {sum}, not 1")]
    BadDistribution { node: usize, sum: f64 },
    #[error("node {0} has no outgoing edge")]
    DanglingNode(usize),
    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) listed more than once")]
    DuplicateEdge(usize, usize),
    #[error("edge ({u}, {v}) has non-positive or non-finite weight {weight}")]
    BadWeight { u: usize, v: usize, weight: f64 },
    #[error("node index {index} out of range for {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("delta must be non-negative, got {0}")]
    NegativeDelta(f64),
    #[error("operation requires an undirected graph")]
    DirectedGraphUnsupported,
    #[error("exact solving is limited to {cap} nodes, graph has {n}")]
    TooLarge { n: usize, cap: usize },
    #[error("absorbing-chain system is singular")]
    SingularSystem,
    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("graph is not neutral (m != r at node {0})")]
    NotNeutral(usize),
    #[error("graph is not undirected")]
    NotUndirected,
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
    #[error("every run hit the step cap ({runs} runs)")]
    AllRunsCapped { runs: u64 },
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
    #[error("epsilon must lie in (0, 1/2), got {0}")]
    EpsOutOfRange(f64),
    #[error("set {0} is empty")]
    EmptySet(usize),
    #[error("invalid range: {0}")]
    BadRange(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("evaluator failed: {0}")]
    EvaluatorFailure(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
