//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised while validating inputs or running a computation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("likelihood row {row} sums to {sum}, expected 1")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("negative or non-finite mass {value} in {field}[{index}]")]
    NegativeMass {
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("prior sums to {sum}, expected 1")]
    PriorNotNormalized { sum: f64 },
    #[error("dimension mismatch in {field}: expected {expected}, found {found}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("psi map is not surjective: label {label:?} has no theta assigned")]
    NotSurjective { label: String },
    #[error("psi assignment for theta {theta} points to unknown label {target:?}")]
    UnknownPsi { theta: usize, target: String },
    #[error("observation {x} has zero prior predictive probability")]
    ImpossibleObservation { x: usize },
    #[error("psi value {psi} has zero prior mass")]
    EmptyFiber { psi: usize },
    #[error("index {index} out of range for {field} of length {len}")]
    IndexOutOfRange {
        field: &'static str,
        index: usize,
        len: usize,
    },
    #[error("bad range: lo = {lo} must be finite and below hi = {hi}")]
    BadRange { lo: f64, hi: f64 },
    #[error("a grid needs at least one cell")]
    ZeroCells,
    #[error("refinement factor must be at least 2, got {factor}")]
    BadRefinement { factor: usize },
    #[error("quadrature needs at least one point per cell")]
    ZeroQuadraturePoints,
    #[error("density is negative or non-finite ({value}) at {at}")]
    NegativeDensity { at: f64, value: f64 },
    #[error("density puts no mass on the grid")]
    AllZeroMass,
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("psi value {index} has zero prior mass but positive posterior mass")]
    ZeroPriorPositivePosterior { index: usize },
    #[error("empty table")]
    EmptyTable,
    #[error("loss needs strictly positive prior masses; psi value {psi} has mass 0")]
    ZeroPriorMass { psi: usize },
    #[error("eta must be positive and finite, got {eta}")]
    BadEta { eta: f64 },
    #[error("rule space of {size} rules exceeds the enumeration cap of {cap}")]
    RuleSpaceTooLarge { size: f64, cap: u64 },
    #[error("both class densities are zero at the new observation")]
    BothDensitiesZero,
    #[error("design matrix is rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("direction vector w is zero")]
    ZeroDirection,
    #[error("posterior and prior variances of the functional nearly coincide (1 - ratio = {margin:e})")]
    NearSingularMagnifier { margin: f64 },
    #[error("grid argmax is {gap} away from the closed form, more than two cell widths ({cell_width})")]
    GridTooCoarse { gap: f64, cell_width: f64 },
    #[error("relative belief maximizer is not unique at observation {x}")]
    TieAtMaximizer { x: usize },
    #[error("relative belief ratio is flat on the grid; no separated maximizer")]
    SeparationViolated,
    #[error("grid ladder is not nested in the reference grid")]
    LadderNotNested,
    #[error("no attainable credible content for gamma = {gamma}")]
    NoAttainableGamma { gamma: f64 },
    #[error("{0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors raised by numerical guards rather than input validation.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::GridTooCoarse { .. }
                | Error::NearSingularMagnifier { .. }
                | Error::SeparationViolated
                | Error::TieAtMaximizer { .. }
                | Error::RuleSpaceTooLarge { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
