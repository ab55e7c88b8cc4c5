//! Error taxonomy shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("CFL bound violated: dt = {dt} exceeds a * min light speed = {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("invalid spatial metric: weight {weight} at site {site} is not strictly positive")]
    InvalidMetric { site: usize, weight: f64 },
    #[error("exterior derivative undefined: degree {0} would exceed the lattice dimension")]
    DegreeOverflow(usize),
    #[error("codifferential undefined on degree 0")]
    DegreeUnderflow,
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("unsupported degree {0} for this operation")]
    DegreeUnsupported(usize),
    #[error("cochains live on different lattices or dual flags differ")]
    LatticeMismatch,
    #[error("source touches the temporal boundary (interior window required)")]
    SourceTouchesBoundary,
    #[error("massless field not allowed here; route m = 0 through the gauge sector")]
    MasslessNotAllowed,
    #[error("bad initial data: {0}")]
    BadInitialData(String),
    #[error("cutoff band is thinner than the stencil width")]
    BandTooThin,
    #[error("input is not coclosed: |delta f| = {0:.3e}")]
    NotCoclosed(f64),
    #[error("input does not solve the required equation of motion: residual {0:.3e}")]
    NotASolution(f64),
    #[error("spatial topology is nontrivial (harmonic 1-forms present)")]
    NontrivialTopology,
    #[error("Weyl elements built over different quadratic-form caches")]
    BasisMismatch,
    #[error("generator support leaves the embedding image")]
    SupportOutsideImage,
    #[error("regions are not spacelike separated")]
    RegionsNotSeparated,
    #[error("region is empty")]
    EmptyRegion,
    #[error("region is not causally convex")]
    NotCausallyConvex,
    #[error("causal complement is empty")]
    EmptyComplement,
    #[error("requested Fock dimension {0} exceeds the guard {1}")]
    DimensionTooLarge(usize, usize),
    #[error("operator/vector dimension mismatch")]
    DimensionMismatch,
    #[error("spatial operator has a (near-)zero mode; ground state undefined")]
    ZeroMode,
    #[error("mode {index} is unstable for this time step: dt^2 * omega^2 = {value} >= 4")]
    ModeUnstable { index: usize, value: f64 },
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error("Dirac sector requires dt = a and a flat spatial metric")]
    DiracLatticeUnsupported,
    #[error("configuration error: {0}")]
    ConfigError(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
