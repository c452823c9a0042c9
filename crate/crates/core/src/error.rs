use thiserror::Error;

use crate::model::NodeId;

/// Violations of the network model's structural invariants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("unknown link index {0}")]
    UnknownLink(usize),
    #[error("duplicate node name `{0}`")]
    DuplicateNode(String),
    #[error("duplicate link {0}")]
    DuplicateLink(String),
    #[error("wired link {0} must connect two routers or base stations")]
    BadWiredEndpoint(String),
    #[error("wireless link {0} must go from a base station to a user")]
    BadWirelessEndpoint(String),
    #[error("wired link {link} has negative capacity {capacity}")]
    NegativeCapacity { link: String, capacity: f64 },
    #[error("the instance needs at least one tone")]
    NoTones,
    #[error("wireless link {link} uses tone {tone}, but only {num_tones} tones exist")]
    ToneOutOfRange {
        link: String,
        tone: usize,
        num_tones: usize,
    },
    #[error("wireless link {0} has a zero direct channel")]
    ZeroDirectChannel(String),
    #[error("user {0} needs a strictly positive noise power")]
    NonPositiveNoise(String),
    #[error("base station {0} has a negative or non-finite power budget")]
    BadPowerBudget(String),
    #[error("commodity {0} has identical source and destination")]
    SameEndpoints(usize),
    #[error("commodity {0} has a negative demand")]
    NegativeDemand(usize),
    #[error("commodity {commodity}: no positive-capacity path from {source_node} to {dest}")]
    Disconnected {
        commodity: usize,
        source_node: String,
        dest: String,
    },
    #[error("rate unit must be positive and finite, got {0}")]
    BadRateUnit(f64),
    #[error("state dimension mismatch: {0}")]
    Dimension(String),
}

/// Errors surfaced by the solver layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bisection failed to bracket a root ({0})")]
    NonBracketing(&'static str),
    #[error("receive weight update is singular on wireless link {0}")]
    SingularWeight(usize),
    #[error("receive weight on wireless link {link} has imaginary residue {residue:e}")]
    ComplexWeight { link: usize, residue: f64 },
    #[error("nonpositive receive weight {0}")]
    NonPositiveWeight(f64),
    #[error("all precoders are zero; the surrogate cannot leave p = 0")]
    ZeroPrecoderStart,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing multipliers: {0}")]
    MissingMultipliers(String),
    #[error("linear program is infeasible")]
    LpInfeasible,
    #[error("linear program is unbounded")]
    LpUnbounded,
    #[error("linear program solver stopped: {0}")]
    LpFailed(String),
    #[error("user {0:?} has no admissible wireless link")]
    NoAdmissibleLink(NodeId),
    #[error("unknown scenario template `{0}`")]
    UnknownTemplate(String),
    #[error("serialization: {0}")]
    Serialize(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
