use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("class {class} has {available} samples but {requested} were requested")]
    InsufficientClass {
        class: usize,
        requested: usize,
        available: usize,
    },

    #[error("label {label} out of range for {class_count} classes")]
    LabelOutOfRange { label: usize, class_count: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty selection: at least one sample must be selected")]
    EmptySelection,

    #[error("variance of gradients for sample {sample} is not ready")]
    NotReady { sample: usize },

    #[error("epoch {epoch} for sample {sample} is not after the last recorded epoch {last}")]
    NonMonotoneEpoch {
        sample: usize,
        epoch: usize,
        last: usize,
    },

    #[error("final-epoch selections do not cover sample {index} exactly once")]
    Coverage { index: usize },

    #[error("sample {0} is not in the noisy set")]
    NotNoisy(usize),

    #[error("infeasible budget: {rounds} rounds x {per_round} per round exceeds {available} training samples")]
    InfeasibleBudget {
        rounds: usize,
        per_round: usize,
        available: usize,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
