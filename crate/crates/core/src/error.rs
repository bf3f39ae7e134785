use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A utility entry was not strictly positive where the learning rule needs it to be.
    #[error("positive-utility violation: player {player} received {payoff}")]
    NonPositiveUtility { player: usize, payoff: f64 },

    #[error("step-size domain error: {0}")]
    StepSizeDomain(String),

    #[error("simulation produced no statistics: {0}")]
    EmptyStats(String),

    #[error("game needs at least two players for a multi-agent tremble, got {0}")]
    TooFewPlayers(usize),

    #[error("game has no pure Nash equilibria; refusing to estimate a chain over an empty state set")]
    NoEquilibria,

    #[error("estimation failed for row {row} ({label}): 0 of {episodes} episodes resolved, {escapes} escaped")]
    EstimationFailed {
        row: usize,
        label: String,
        episodes: u64,
        escapes: u64,
    },

    #[error("stationary solver did not converge after {iterations} iterations (residual {residual:e}, spectral gap estimate {gap_estimate:e})")]
    SolverDiverged {
        iterations: usize,
        residual: f64,
        gap_estimate: f64,
    },

    #[error("parse error in {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
