use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),

    #[error("subsystem `{subsystem}` has no basis label `{label}`")]
    UnknownLabel { subsystem: String, label: String },

    #[error("duplicate subsystem name `{0}`")]
    DuplicateSubsystem(String),

    #[error("subsystem `{subsystem}` declares label `{label}` twice")]
    DuplicateLabel { subsystem: String, label: String },

    #[error("subsystem `{0}` has no basis labels")]
    EmptySubsystem(String),

    #[error("label tuple has {got} entries, layout has {expected} subsystems")]
    TupleArity { expected: usize, got: usize },

    #[error("state has zero norm")]
    DegenerateState,

    #[error("subsystem `{0}` appears on both sides of a tensor product")]
    LayoutConflict(String),

    #[error("layout mismatch: expected [{expected}], got [{got}]")]
    LayoutMismatch { expected: String, got: String },

    #[error("operation left the unit sphere (norm {norm})")]
    NormViolation { norm: f64 },

    #[error("operator is not unitary (max |U†U - I| entry {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("matrix shape {rows}x{cols} does not match layouts ({expected_rows}x{expected_cols})")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },

    #[error("partial trace must keep at least one subsystem")]
    EmptyKeep,

    #[error("subsystems [{0}] are not adjacent; reorder before grouping")]
    NotAdjacent(String),

    #[error("label map sends both {first} and {second} to `{label}`")]
    NonInjectiveLabelMap {
        label: String,
        first: String,
        second: String,
    },

    #[error("subsystem `{0}` is not a grouped subsystem")]
    NotGrouped(String),

    #[error("basis is empty")]
    EmptyBasis,

    #[error("basis is not orthonormal: Gram entry ({row}, {col}) = {value}")]
    NonOrthonormalBasis { row: usize, col: usize, value: f64 },

    #[error("basis does not cover the state's support on [{subsystems}] (residual norm {residual:e})")]
    IncompleteBasis { subsystems: String, residual: f64 },

    #[error("apparatus `{apparatus}` is not in ready state `{ready}` (overlap {overlap})")]
    ApparatusNotReady {
        apparatus: String,
        ready: String,
        overlap: f64,
    },

    #[error("apparatus `{apparatus}` has {dim} levels, needs {needed}")]
    ApparatusTooSmall {
        apparatus: String,
        dim: usize,
        needed: usize,
    },

    #[error("outcome label `{0}` repeated")]
    DuplicateOutcome(String),

    #[error("{outcomes} outcome labels for {basis} basis vectors")]
    OutcomeCountMismatch { outcomes: usize, basis: usize },

    #[error("branches do not span the state's support (residual norm {residual:e})")]
    IncompleteBranching { residual: f64 },

    #[error("outcome has probability {probability:e}; cannot condition on it")]
    ImpossibleOutcome { probability: f64 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("decoherent semantics needs at least one environment model")]
    EmptyModelFamily,

    #[error("unknown agent `{0}`")]
    UnknownAgent(String),

    #[error("proposition cannot be evaluated: {0}")]
    InvalidProposition(String),

    #[error("scenario step {index} ({name}) failed: {source}")]
    Step {
        index: usize,
        name: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn mismatch(expected: &impl std::fmt::Display, got: &impl std::fmt::Display) -> Self {
        Error::LayoutMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
