use thiserror::Error;

/// Errors shared by every layer of the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("wedge product would exceed bidegree ({p}, {q}) in ambient dimension {n}")]
    DegreeOverflow { n: usize, p: usize, q: usize },

    #[error("top-form ratio against a volume form with zero coefficient")]
    ZeroVolumeForm,

    #[error("degenerate metric form: {0}")]
    DegenerateMetric(String),

    #[error("fibre rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),

    #[error("bidegree mismatch: expected ({expected_p}, {expected_q}), got ({got_p}, {got_q})")]
    BidegreeMismatch {
        expected_p: usize,
        expected_q: usize,
        got_p: usize,
        got_q: usize,
    },

    #[error("matrix shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in field input")]
    NonFiniteInput,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("form is not positive definite at point {point}: {detail}")]
    NotPositiveDefinite { point: usize, detail: String },

    #[error("form is not ddbar-closed: sup residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    NotDdbarClosed { residual: f64, tolerance: f64 },

    #[error("form is not weakly positive: sampled density {density:.3e} below {delta:.3e} at point {point}")]
    NotWeaklyPositive {
        point: usize,
        density: f64,
        delta: f64,
    },

    #[error("test form loses positivity at the requested amplitude {epsilon}")]
    PositivityLostAtEpsilon { epsilon: f64 },

    #[error("auxiliary potential does not produce a positive form: {0}")]
    InvalidAuxiliaryPotential(String),

    #[error("right-hand side is not orthogonal to constants: mean {mean:.3e} vs tolerance {tolerance:.3e}")]
    IncompatibleRightHandSide { mean: f64, tolerance: f64 },

    #[error("solver did not reach the residual target: {residual:.3e} after {iterations} iterations")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("invalid bundle specification: {0}")]
    InvalidSpec(String),

    #[error("extension form is not dbar-closed: sup residual {residual:.3e} exceeds {tolerance:.3e}")]
    NotDdbarClosedBetaStar { residual: f64, tolerance: f64 },

    #[error("exterior power {power} exceeds rank {rank}")]
    InvalidPower { power: usize, rank: usize },

    #[error("bundle of rank zero")]
    ZeroRank,

    #[error("metric is not weakly Hermite-Einstein: deviation {deviation:.3e} exceeds {tolerance:.3e}")]
    NotWeaklyHE { deviation: f64, tolerance: f64 },

    #[error("metric is not Hermite-Einstein: {0}")]
    NotHermiteEinstein(String),

    #[error("section is not holomorphic: {0}")]
    NonHolomorphicSection(String),

    #[error("ambient metric is not Hermite-Einstein: deviation {deviation:.3e}")]
    AmbientNotHE { deviation: f64 },

    #[error("declared family member is not a subobject: {0}")]
    NotASubobject(String),

    #[error("configuration error at {path}: {reason}")]
    ConfigError { path: String, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
