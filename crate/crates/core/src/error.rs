use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("series has no certified tail bound")]
    NoTailBound,
    #[error("enclosure goal {0} unreachable within the summation ladder")]
    GoalUnreachable(String),
    #[error("sets belong to incomparable models")]
    IncomparableModels,
    #[error("carriers overlap: {0}")]
    DisjointnessViolation(String),
    #[error("strand {0} does not converge at exponent p")]
    DivergentAtP(String),
    #[error("carrier budget exceeded in base element {0}")]
    BudgetExceeded(u64),
    #[error("invalid exponent sequence: {0}")]
    InvalidRSequence(String),
    #[error("construction not available on this space model: {0}")]
    ModelMismatch(String),
    #[error("two generators share the seed branch {0}")]
    SeedCollision(String),
    #[error("all coefficients are zero")]
    AllZero,
    #[error("polynomial has a constant term")]
    ConstantTerm,
    #[error("polynomial has duplicate exponent rows")]
    DuplicateRows,
    #[error("unsupported leaf for this transport: {0}")]
    UnsupportedLeaf(String),
    #[error("Rademacher support {0} exceeds the configured limit {1}")]
    SupportTooLarge(usize, usize),
    #[error("zero vector or zero base function")]
    ZeroVector,
    #[error("family cannot be classified: {0}")]
    UnclassifiableFamily(String),
    #[error("no resident strand in base element {0}")]
    MissingResident(u64),
    #[error("supports overlap between family members {0} and {1}")]
    OverlapDetected(usize, usize),
    #[error("schema or hash mismatch: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
