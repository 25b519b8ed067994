use thiserror::Error;

use crate::chainsim::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A numeric argument fell outside the domain of the operation.
    #[error("invalid {name}: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("path enumeration needs {steps} steps, oracle limit is {limit}")]
    EnumerationBudget { steps: usize, limit: usize },

    #[error("exact rational evaluation is limited to L <= {limit}, got L = {final_length}")]
    ExactModeLimit { final_length: usize, limit: usize },

    #[error("race already finished ({0:?})")]
    RaceFinished(crate::chainsim::RaceStatus),

    #[error("counterfeit block rejected: {0}")]
    CounterfeitRejected(Violation),

    #[error("block {index} does not extend a known parent")]
    UnknownParent { index: u64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }
}
