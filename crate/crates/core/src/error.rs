use thiserror::Error;

/// Errors raised by the structural preconditions of the library.
///
/// Numerical checks never fail through this type; they return reports whose
/// records carry the violation magnitude instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TpsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sector index {sector} out of range for a space with {sectors} sectors")]
    SectorOutOfRange { sector: usize, sectors: usize },

    #[error("vector has zero norm and does not define a ray")]
    ZeroVector,

    #[error("vector is not normalized: norm {norm}")]
    NotNormalized { norm: f64 },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("empty point list")]
    EmptyKernel,

    #[error("kernel is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("hbar must be positive, sector {sector} has {value}")]
    InvalidHbar { sector: usize, value: f64 },

    #[error("duplicate point: entries {first} and {second} represent the same ray")]
    DuplicatePoint { first: usize, second: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("projection onto the subspace vanishes (ray lies in the orthoplement)")]
    DegenerateProjection,

    #[error("kernel block is reducible: it splits into {components} sectors")]
    Reducible { components: usize },

    #[error("chart pivot {pivot} is degenerate at this point, switch to pivot {suggested}")]
    ChartPivot { pivot: usize, suggested: usize },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed document: {0}")]
    Document(String),
}

pub type Result<T> = std::result::Result<T, TpsError>;
