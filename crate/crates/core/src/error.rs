use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u32, u32),

    #[error("shape error: {0}")]
    ShapeError(String),

    #[error("unsupported prime {0}: expected an odd prime in [3, 31]")]
    UnsupportedPrime(u32),

    #[error("invalid argument: {0}")]
    ArgumentError(String),

    #[error("construction mismatch: {0}")]
    ConstructionMismatch(String),

    #[error("derivation is not in the image of the contact operator")]
    NotInContactImage,

    #[error("embedding error: {0}")]
    EmbeddingError(String),

    #[error("span is not invariant: generator x1^{generator}*d1 maps basis vector {vector} outside the span")]
    NotInvariant { generator: usize, vector: usize },

    #[error("unclassifiable block: {0}")]
    Unclassifiable(String),

    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error("decomposition stuck: {0}")]
    DecompositionStuck(String),

    #[error("i/o error: {0}")]
    Io(String),
}
