use thiserror::Error;

/// Every failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed spec: {0}")]
    MalformedSpec(String),
    #[error("vertex `{0}` has no incident edges")]
    IsolatedVertex(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("potential shape mismatch: {0}")]
    PotentialShapeMismatch(String),
    #[error("eigensolver failure at {context}")]
    EigensolverFailure { context: String },
    #[error("period mean of q nonzero: |Q_x(τ)| = {value:e} at vertex {vertex} exceeds {tol:e}")]
    PeriodMeanNonzero { vertex: usize, value: f64, tol: f64 },
    #[error("unknown condition `{0}`")]
    UnknownCondition(String),
    #[error("condition {condition} needs weight data `{field}`")]
    MissingWeight { condition: String, field: String },
    #[error("weight b vanishes at vertex {0}")]
    WeightVanishes(usize),
    #[error("step budget exceeded: {0}")]
    StepBudgetExceeded(String),
    #[error("non-Hermitian generator sample at t = {t}: defect {defect:e}")]
    NonHermitianSample { t: f64, defect: f64 },
    #[error("quadrature budget exceeded: {0}")]
    QuadratureBudgetExceeded(String),
    #[error("matrix is not unitary: defect {0:e}")]
    NonUnitaryInput(f64),
    #[error("not an eigenpair of the monodromy: residual {0:e}")]
    NotAnEigenpair(f64),
    #[error("λ hits the shifted spectrum σ(h0)+ωn at mode {mode} (distance {distance:e})")]
    SpectrumHit { mode: i64, distance: f64 },
    #[error("resonant period: |1 − e^(iτφ)| = {0:e}")]
    ResonantPeriod(f64),
    #[error("gauge would break periodicity: |Q_x(τ)| = {value:e} at vertex {vertex}")]
    MeanNonzero { vertex: usize, value: f64 },
    #[error("boundary contamination: boundary mass {mass:e} exceeds cap {cap:e} at step {step}")]
    BoundaryContamination { step: usize, mass: f64, cap: f64 },
    #[error("input state not normalized: ‖f‖ = {0}")]
    NonNormalizedInput(f64),
    #[error("solver stagnation: {0}")]
    SolverStagnation(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
