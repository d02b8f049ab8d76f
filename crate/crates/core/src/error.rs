use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed table: {0}")]
    InvalidTable(String),
    #[error("table is not a Latin square: {kind} {index} repeats element {element}")]
    NotLatinSquare {
        kind: &'static str,
        index: usize,
        element: usize,
    },
    #[error("operation is not associative: ({a}*{b})*{c} != {a}*({b}*{c})")]
    NotAssociative { a: usize, b: usize, c: usize },
    #[error("table has no two-sided identity element")]
    NoIdentity,
    #[error("{what} of size {size} exceeds the cap {cap}")]
    CapExceeded { what: &'static str, size: u128, cap: u128 },
    #[error("subgroup is not normal")]
    NotNormal,
    #[error("operands live on different groups")]
    GroupMismatch,
    #[error("invalid element index {0}")]
    InvalidElement(usize),
    #[error("not a homomorphism: {0}")]
    NotHomomorphism(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("not a probability measure: {0}")]
    NotProbability(String),
    #[error("matrix dimension {size} exceeds the cap {cap}")]
    DimensionCap { size: usize, cap: usize },
    #[error("quotient chain mismatch: {0}")]
    ChainMismatch(String),
    #[error("invalid quotient chain: {0}")]
    InvalidChain(String),
    #[error("the subgroup family does not generate the group")]
    NotGenerating,
    #[error("image of family member {index} is not normal in the running quotient")]
    NotNormalInQuotient { index: usize },
    #[error("target group is infinite while the source has free rank")]
    BInfinite,
    #[error("group exponent {exponent} does not divide {modulus}")]
    ExponentMismatch { exponent: u64, modulus: u64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
