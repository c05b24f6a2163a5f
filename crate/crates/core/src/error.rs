use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("market needs 1 <= players <= arms, got {n_players} players and {n_arms} arms")]
    Dimension { n_players: usize, n_arms: usize },

    #[error("bernoulli means must lie in [0, 1], largest requested mean is {max}")]
    BernoulliRange { max: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid market: {0}")]
    InvalidMarket(String),

    #[error("exhaustive enumeration is limited to {limit} arms, market has {n_arms}")]
    EnumerationTooLarge { n_arms: usize, limit: usize },

    #[error("reward {reward} is outside [0, 1] and cannot be binarized")]
    RewardOutOfRange { reward: f64 },

    #[error("{algorithm} cannot run on {reward_model} rewards")]
    Incompatible {
        algorithm: String,
        reward_model: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("series grids do not match: {0}")]
    GridMismatch(String),

    #[error("trace does not belong to market: {0}")]
    TraceMismatch(String),

    #[error("run with seed {seed} failed: {source}")]
    Run {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("failed to parse `{key}`: {message}")]
    Parse { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
