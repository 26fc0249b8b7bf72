use thiserror::Error;

/// Errors produced by the pebbling toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A value or argument did not satisfy an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A one-way function name that is not built in.
    #[error("unknown one-way function `{0}`")]
    UnknownOwf(String),

    /// A pebbler was stepped after its final round.
    #[error("pebbler exhausted after {rounds} rounds")]
    Exhausted { rounds: u64 },

    /// A prover has released every element of its chain.
    #[error("chain exhausted: all {released} preimages have been released")]
    ChainExhausted { released: u64 },

    /// A serialized state could not be parsed.
    #[error("decode error: {0}")]
    Decode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
