//! Crate-wide error type. Variants are specific enough that callers (and the
//! CLI) can distinguish domain violations from file problems from solver
//! breakdowns without string matching.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({re}, {im}) lies outside the open unit disk (|z| = {modulus})")]
    PointOutsideDisk { re: f64, im: f64, modulus: f64 },

    #[error("coordinate is not finite: ({re}, {im})")]
    NonFiniteCoordinate { re: f64, im: f64 },

    #[error("evaluation point has |z| = {modulus}, outside the closed disk")]
    EvaluationOutsideDomain { modulus: f64 },

    #[error("zero configuration must contain at least one zero")]
    EmptyConfiguration,

    #[error("sample must contain at least one point")]
    EmptySample,

    #[error("Hardy exponent must satisfy p >= 1, got {p}")]
    InvalidExponent { p: f64 },

    #[error("quadrature needs a power-of-two node count >= {min}, got {nodes}")]
    InvalidNodeCount { nodes: usize, min: usize },

    #[error("norm radius must lie in (0, 1], got {radius}")]
    InvalidRadius { radius: f64 },

    #[error("evaluation at radius 1 requires a function that extends continuously to the boundary")]
    BoundaryDiscontinuous,

    #[error("constraint tolerance must be finite and >= 0, got {epsilon}")]
    InvalidEpsilon { epsilon: f64 },

    #[error("disk radius must lie strictly between 0 and 1, got {radius}")]
    InvalidDiskRadius { radius: f64 },

    #[error("generator parameter out of range: {detail}")]
    InvalidGeneratorParams { detail: String },

    #[error("generated point at index {index} would touch the unit circle; reduce count")]
    GeneratorAtBoundary { index: usize },

    #[error("unknown generator family \"{name}\"")]
    UnknownFamily { name: String },

    #[error("unsupported file version {found}, expected {expected}")]
    VersionMismatch { found: u64, expected: u64 },

    #[error("malformed file {path}: {detail}")]
    MalformedFile { path: String, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("brute force accepts at most {max} sample points, got {len}")]
    SampleTooLarge { len: usize, max: usize },

    #[error("brute force max_degree must lie in 1..={limit}, got {max_degree}")]
    DegreeOutOfRange { max_degree: usize, limit: usize },

    #[error("bound carries no certificate (infeasible marker); nothing to promote")]
    InfeasibleCertificate,

    #[error("certificate failed re-validation: {detail}")]
    CertificateInvalid { detail: String },

    #[error(
        "kernel solver requires p = 2, got {p} (other exponents have no finite reduction here)"
    )]
    UnsupportedExponent { p: f64 },

    #[error(
        "Gram matrix numerically singular: points ({a_re}, {a_im}) and ({b_re}, {b_im}) are \
         {distance:.3e} apart in pseudo-hyperbolic distance"
    )]
    GramConditioning {
        a_re: f64,
        a_im: f64,
        b_re: f64,
        b_im: f64,
        distance: f64,
    },

    #[error("kernel solver failed to converge: {detail}")]
    SolverStalled { detail: String },

    #[error("epsilon grid spec must be start:factor:count with start > 0, 0 < factor, count >= 1; got \"{raw}\"")]
    BadEpsilonGrid { raw: String },

    #[error("scaling fit needs at least 3 usable rows, got {usable}")]
    NotEnoughRows { usable: usize },

    #[error("scaling fit is degenerate: log g has zero variance across usable rows")]
    ZeroVariance,

    #[error("study row invariant violated at eps = {epsilon}: g = {g_value} > d2 = {d2_value} + slack\n{dump}")]
    RowInvariant {
        epsilon: f64,
        g_value: f64,
        d2_value: f64,
        dump: String,
    },

    #[error("search produced a value below the best feasible singleton: {detail}")]
    SearchRegression { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an I/O error with the path it concerns.
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Wrap a serde error with the file it came from.
    pub fn malformed(path: &std::path::Path, detail: impl std::fmt::Display) -> Self {
        Error::MalformedFile {
            path: path.display().to_string(),
            detail: detail.to_string(),
        }
    }
}
