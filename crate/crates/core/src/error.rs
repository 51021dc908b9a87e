use cmdplab_lp::LpError;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("induced chain has more than one recurrent class")]
    ReducibleChain,

    #[error("induced chain is not ergodic: no all-positive power up to t = {searched}")]
    PeriodicChain { searched: usize },

    #[error("MDP is not communicating: state {to} unreachable from state {from}")]
    NotCommunicating { from: usize, to: usize },

    #[error("confidence parameter must lie in (0, 1), got {0}")]
    InvalidDelta(f64),

    #[error("regret budget b[{index}] = {value} outside [0, 34]")]
    InvalidBudget { index: usize, value: f64 },

    #[error("tightened threshold for cost {index} is {threshold} <= 0; raise b_{index} or T")]
    BudgetTooTight { index: usize, threshold: f64 },

    #[error("learner requires a different environment: {0}")]
    WrongEnvironment(String),

    #[error("true CMDP is infeasible; regret is undefined")]
    OracleInfeasible,

    #[error("CMDP is not strictly feasible (best uniform slack {slack})")]
    NotStrictlyFeasible { slack: f64 },

    #[error("fundamental matrix I - P + 1·dᵀ is singular")]
    SingularFundamentalMatrix,

    #[error("invalid inputs: {0}")]
    InvalidInputs(String),

    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
