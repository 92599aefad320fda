use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("support bound {bound} is below the smallest support element {x0}")]
    BoundTooSmall { bound: u64, x0: u64 },

    #[error("{n} exceeds the sequence horizon {horizon}")]
    BeyondHorizon { n: u64, horizon: u64 },

    #[error("no weight is <= {0}")]
    NoWeightBelow(u64),

    #[error("need {needed} gaps but only {available} are available")]
    NotEnoughGaps { needed: usize, available: usize },

    #[error("range [{lo}, {hi}] is not inside [1, {horizon}]")]
    RangeOutOfBounds { lo: u64, hi: u64, horizon: u64 },

    #[error("index {index} is outside the weight list of length {len}")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("0 must belong to both summand sets")]
    MissingZero,

    #[error("gcd hypothesis violated: gcd of sequence is {whole}, gcd of shifted sequence is {shifted}")]
    GcdHypothesis { whole: u64, shifted: u64 },

    #[error(
        "support gcd is {0}: every sum of weights is a multiple of {0}, so no \
         completeness is possible"
    )]
    GcdObstruction(u64),

    #[error("degenerate gap distribution: {0}")]
    Degenerate(String),

    #[error("all {0} samples were censored")]
    AllCensored(usize),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
