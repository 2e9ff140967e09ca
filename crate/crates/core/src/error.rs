//! Error type shared by all simulator modules.

use thiserror::Error;

/// Errors surfaced by state operations and algorithm pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("register layouts differ: {0}")]
    LayoutMismatch(String),
    #[error("no register named `{0}` in layout")]
    UnknownRegister(String),
    #[error("value {value} exceeds bound {bound} in register `{register}`")]
    BoundViolation {
        register: String,
        value: u64,
        bound: u64,
    },
    #[error("map is not a bijection: {a} and {b} both map to {image}")]
    NotBijective { a: String, b: String, image: String },
    #[error("branch weights for {config} have norm {norm}, expected 1")]
    BranchNorm { config: String, norm: f64 },
    #[error("operation changed the state norm from {before} to {after}")]
    NormDrift { before: f64, after: f64 },
    #[error("state has no terms")]
    EmptyState,
    #[error("amplitude is not finite")]
    NonFiniteAmplitude,
    #[error("register `{register}` is not constant across the support, cannot drop it")]
    RegisterNotConstant { register: String },
    #[error("register `{register}` is entangled with the rest of the state")]
    RegisterEntangled { register: String },
    #[error("record register `{register}` is not zero on {config}")]
    RecordNotZero { register: String, config: String },
    #[error("input list is not sorted under rule `{rule}` on {config}")]
    NotSorted { rule: String, config: String },
    #[error("comparison rule `{rule}` is not antisymmetric on ({a}, {b})")]
    IncomparableTuples { rule: String, a: String, b: String },
    #[error("tuple arity {arity} does not divide register width {width}")]
    ArityMismatch { arity: usize, width: usize },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("list is not non-decreasing: {0}")]
    NotNsil(String),
    #[error("list is not strictly increasing: {0}")]
    NotSil(String),
    #[error("invalid lower exceeding sequence: {0}")]
    InvalidLes(String),
    #[error("prefix sum overflow: {value} exceeds modulus 2^{bits}")]
    ScanOverflow { value: u64, bits: u32 },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("support mixes particle numbers / list lengths: {0}")]
    MixedSupport(String),
    #[error("input state is not in the symmetric sector (projection mass {mass})")]
    NotSymmetric { mass: f64 },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
