use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid tolerance `{name}`: {value} (must be strictly positive)")]
    InvalidTolerance { name: &'static str, value: f64 },

    #[error("matrix is not square or too small: {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },

    #[error("vector is not unit spacelike: <v,v> = {norm}")]
    NotUnitSpacelike { norm: f64 },

    #[error("matrix is not orthogonal: residual {residual:e}")]
    NotOrthogonal { residual: f64 },

    #[error("matrix is not a Lorentz transformation: residual {residual:e}")]
    NotLorentz { residual: f64 },

    #[error("cap normal has a degenerate spatial part (norm {norm:e})")]
    DegenerateCap { norm: f64 },

    #[error("caps {first} and {second} are not separated ({relation})")]
    CapsNotSeparated {
        first: usize,
        second: usize,
        relation: String,
    },

    #[error("cap pairing verification failed: {0}")]
    PairingFailed(String),

    #[error("group is not certified")]
    Uncertified,

    #[error("could not place {caps} caps at separation {separation} after {attempts} attempts")]
    Placement {
        caps: usize,
        separation: f64,
        attempts: usize,
    },

    #[error("invalid graph of groups: {0}")]
    InvalidGraph(String),

    #[error("edge `{0}` not found")]
    EdgeNotFound(u64),

    #[error("graph is not in normal form: edge `{0}` is trivial")]
    NotNormalForm(u64),

    #[error("extension order {n} is not compatible with chi = {chi}: {reason}")]
    BadExtensionOrder {
        n: String,
        chi: String,
        reason: String,
    },

    #[error("genus must be at least {min}, got {g}")]
    GenusTooSmall { g: String, min: u32 },

    #[error("dimension must be at least {min}, got {d}")]
    DimensionTooSmall { d: u32, min: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("arithmetic invariant violated: {0}")]
    Arithmetic(String),

    #[error("separation search failed for edge {edge}: {detail}")]
    SeparationSearch { edge: usize, detail: String },

    #[error("degenerate ray selection for edge {0}")]
    DegenerateRay(usize),

    #[error("realization is not verified")]
    NotVerified,

    #[error("no nontrivial kernel word found with at most {maxlen} syllables")]
    NoKernelWord { maxlen: usize },

    #[error("fixed-point chain is not strictly increasing: {0}")]
    ChainNotIncreasing(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}
