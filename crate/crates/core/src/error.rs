use thiserror::Error;

use crate::model::MulticastGroup;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("rejected parameters: {0}")]
    RejectedParameters(String),

    #[error("malformed table: {0}")]
    MalformedTable(String),

    #[error("construction failed: {0}")]
    ConstructionFailure(String),

    #[error("m = {m} exceeds the per-column budget {bound}")]
    InfeasibleM { m: usize, bound: usize },

    #[error("no integral plan found: {0}")]
    SearchFailure(String),

    #[error("donor mapping needs at least two baseline columns")]
    NoDonor,

    #[error("interference channel of {group} has nullity {nullity} < multiplicity {theta}")]
    NullityDeficient {
        group: MulticastGroup,
        nullity: usize,
        theta: usize,
    },

    #[error("assembled column {column} is not linearly decodable: {detail}")]
    AssemblyFailure { column: usize, detail: String },

    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RejectedParameters(_) => "rejected-parameters",
            Error::MalformedTable(_) => "malformed-table",
            Error::ConstructionFailure(_) => "construction-failure",
            Error::InfeasibleM { .. } => "infeasible-m",
            Error::SearchFailure(_) => "search-failure",
            Error::NoDonor => "no-donor",
            Error::NullityDeficient { .. } => "nullity-deficient",
            Error::AssemblyFailure { .. } => "assembly-failure",
            Error::Verification(_) => "verification-failure",
        }
    }
}
