use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index ({i}, {j}) outside the grid")]
    OutOfRange { i: usize, j: usize },
    #[error("non-real factorization: the momenta polynomial has a complex root pair ({re} ± {im}i)")]
    NonRealFactorization { re: f64, im: f64 },
    #[error("polynomial identically zero at the evaluated point")]
    ZeroPolynomial,
    #[error("leading coefficient a_(N-1) vanishes at grid point ({i}, {j})")]
    VanishingCoefficient { i: usize, j: usize },
    #[error("system is empty after masking: polynomial identically zero")]
    EmptySystem,
    #[error("invalid zero mask: {0}")]
    InvalidMask(String),
    #[error("missing coefficient field a_{0}")]
    MissingField(usize),
    #[error("degenerate branch points at grid index {index}: {detail}")]
    DegenerateBranchPoints { index: usize, detail: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("positivity violated: a = {value} at grid index {index}")]
    Positivity { index: usize, value: f64 },
    #[error("degenerate signature: |g12| = {value} >= 1 at grid point ({i}, {j})")]
    DegenerateSignature { i: usize, j: usize, value: f64 },
    #[error("coincident characteristic velocities: {0}")]
    CoincidentVelocities(String),
    #[error("state outside the interpolation domain")]
    OutOfDomain,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
