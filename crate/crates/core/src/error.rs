use thiserror::Error;

/// Errors raised by channel construction, estimation and the privacy calculators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// `a = 1/2` makes every output equally likely under every input; the
    /// channel matrix is singular and nothing can be estimated.
    #[error("singular channel: a = {a} (a = 1/2 destroys all information; the channel is not invertible)")]
    SingularChannel { a: f64 },

    #[error("dense materialization of width {width} exceeds the cap of {cap} bits (set BIRR_DENSE_CAP to raise it)")]
    WidthCap { width: u32, cap: u32 },

    #[error("parameter {name} = {value} is outside its domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("degenerate distribution: s = {s} (loss is only defined for s = pi^T pi < 1)")]
    Degenerate { s: f64 },

    #[error("infinite disclosure: a = {a} leaves at least one input unrandomized")]
    InfiniteDisclosure { a: f64 },

    #[error("empty corpus: at least one response is required")]
    EmptyCorpus,

    #[error("invalid marginal query: {0}")]
    Query(String),

    #[error("invalid mechanism: {0}")]
    Mechanism(String),

    #[error("index {index} out of range for width {width}")]
    Index { index: u64, width: u32 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}
