use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("missing config key `{key}` in section [{section}]")]
    MissingKey { section: String, key: String },

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite dynamics at t={t}, x={x:?}, u={u:?}, v={v:?}")]
    NonFinite {
        t: f64,
        x: Vec<f64>,
        u: Vec<f64>,
        v: Vec<f64>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty payoff cloud")]
    EmptyCloud,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("construction failed at step {step}: {msg}")]
    Construction { step: usize, msg: String },

    #[error("strategy error: {0}")]
    Strategy(String),

    #[error("parse error at {what} line {line}: {msg}")]
    Parse {
        what: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
