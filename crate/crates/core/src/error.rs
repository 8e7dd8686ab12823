use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent caller input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A later spanning tree of a k-MST could not connect every node once the
    /// edges of the earlier trees were removed.
    #[error("tree {tree} of the {k}-MST cannot span all {nodes} nodes")]
    Construction { tree: usize, k: usize, nodes: usize },

    /// The closed-form moments divide by `N - 3`.
    #[error(
        "closed-form null moments need at least 4 observations (got {0}); \
         use the enumeration or permutation path instead"
    )]
    UnsupportedSize(usize),

    /// Exhaustive enumeration guard.
    #[error("{count} label assignments exceed the enumeration limit of {limit}")]
    TooManyAssignments { count: u128, limit: u128 },

    /// The null distribution carries no information (all variances vanish).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A simulation replicate failed; the inner error names the cause.
    #[error("replicate {index} failed: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by numerically degenerate data rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Degenerate(_) | Error::Construction { .. } => true,
            Error::Replicate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
