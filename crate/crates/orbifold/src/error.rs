use thiserror::Error;

/// Failure modes shared across the crate.
///
/// Numeric and group-theoretic routines return these directly; atlas
/// validation collects most problems into [`crate::atlas::ValidationReport`]
/// instead and reserves errors for malformed inputs.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("mixed exact/approx scalars in one computation")]
    MixedMode,

    #[error("matrix is singular")]
    Singular,

    #[error("generated set exceeded the closure cap of {cap} elements")]
    NotFinite { cap: usize },

    #[error("search budget of {budget} candidates exhausted")]
    BudgetExceeded { budget: u64 },

    #[error("canonical representative is ambiguous at tolerance {tolerance}: orbit points straddle the comparison")]
    AmbiguousCanonical { tolerance: f64 },

    #[error("map evaluation failed: {0}")]
    Evaluation(String),

    #[error("sampled map is not orbit-preserving: point ({witness}) maps off every group translate")]
    NotOrbitPreserving { witness: String },

    #[error("no sample determines a unique group element ({detail})")]
    Ambiguous { detail: String },

    #[error("samples disagree on the group element: {detail}")]
    Inconsistent { detail: String },

    #[error("path step at index {index} is ambiguous between orbit points (gap {gap:.3e} below tolerance)")]
    StepTooLarge { index: usize, gap: f64 },

    #[error("seed point is not on the orbit of the first path image")]
    SeedOffOrbit,

    #[error("no group element matches the loop endpoints")]
    NoGroupElement,

    #[error("group element index {index} admits no unanimous image under the sampled lift")]
    NoConsistentImage { index: usize },

    #[error("assembled table is not a homomorphism: {detail}")]
    NotHomomorphism { detail: String },

    #[error("jacobian is singular at the base point (|det| = {det:.3e})")]
    SingularJacobian { det: f64 },

    #[error("no group element factors one injection through the other")]
    NoFactor,

    #[error("chart {chart}: restriction selection misses the model entirely")]
    EmptyRestriction { chart: String },

    #[error("point lies outside the model of chart {chart}")]
    OutOfChart { chart: String },

    #[error("presentations share no identification data for chart {chart}")]
    IdentificationIncomplete { chart: String },

    #[error("parse error at {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
}

pub type Result<T> = std::result::Result<T, Error>;
