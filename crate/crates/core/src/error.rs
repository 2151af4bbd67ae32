use thiserror::Error;

/// Unified error type for construction, solving, and pricing failures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuctionError {
    /// An allocation references bidders or atoms the instance does not
    /// contain; signals a corrupted allocation rather than infeasibility.
    #[error("corrupted allocation: {0}")]
    Structural(String),

    /// A solver or pricing routine was invoked outside its preconditions.
    #[error("contract violated: {0}")]
    Contract(String),

    /// The instance exceeds a guard that keeps exhaustive methods tractable.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// A pricing rule was paired with an incompatible solver or bid class.
    #[error("pricing policy misuse: {0}")]
    Policy(String),

    /// A scenario or instance is internally inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numeric argument lies outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, AuctionError>;
