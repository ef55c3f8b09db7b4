use thiserror::Error;

use crate::pairgraph::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate pair ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),

    #[error("self pair on node {0}")]
    SelfLoop(NodeId),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite feature difference in pair ({0}, {1})")]
    NonFinite(NodeId, NodeId),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("edge ({0}, {1}) is not in the graph")]
    MissingEdge(NodeId, NodeId),

    #[error("source and target are the same node {0}")]
    SameNode(NodeId),

    #[error("graph has {nodes} nodes, above the exact-search limit of {limit}; use the upper bound")]
    GraphTooLarge { nodes: usize, limit: usize },

    #[error("cycle-isolation search exceeded its budget of {0} expansions; use the upper bound")]
    SearchBudgetExceeded(u64),

    #[error("operation requires a {expected} relation")]
    RelationMismatch { expected: &'static str },

    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("the Gaussian mechanism requires delta > 0")]
    DeltaZero,

    #[error("delta must lie in [0, 1), got {0}")]
    InvalidDelta(f64),

    #[error("staircase gamma must lie in (0, 1], got {0}")]
    InvalidGamma(f64),

    #[error("value {0} is outside [-1, 1]")]
    OutOfRange(f64),

    #[error("label {0} is not 0 or 1")]
    InvalidLabel(String),

    #[error("hinge gradient undefined at zero projected distance")]
    DegenerateDistance,

    #[error("empty batch")]
    EmptyBatch,

    #[error("row index {row} out of range for {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("empty training set")]
    EmptyTrainSet,

    #[error("requested density {density} needs {needed} pairs but only {available} exist")]
    InfeasibleDensity { density: f64, needed: usize, available: usize },

    #[error("cannot balance pairs: need {needed} of each label, only {available} available")]
    InfeasibleBalance { needed: usize, available: usize },

    #[error("need at least two classes")]
    SingleClass,

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("label column '{0}' not found")]
    MissingLabelColumn(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
