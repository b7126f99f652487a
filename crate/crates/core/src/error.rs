use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in the toolkit.
///
/// Variants are split into two families: input/configuration problems (the
/// caller handed us something outside a precondition) and certification
/// failures (the mathematics was evaluated and a bound did not hold). The CLI
/// maps the first family to exit code 2 and the second to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("essential singularity: theta is not defined at z = 0")]
    EssentialSingularity,

    #[error("point {modulus:e} lies outside the certified truncation domain")]
    TruncationDomain { modulus: f64 },

    #[error("z = {z} is too close to the zero spiral of theta (infimum {infimum:.3e} <= {delta:.3e})")]
    SpiralProximity { z: String, infimum: f64, delta: f64 },

    #[error("|Im z| = {imag:.4} is outside the strip of width {beta:.4}")]
    OutsideStrip { imag: f64, beta: f64 },

    #[error("decay profile not certified: {0}")]
    UncertifiedProfile(String),

    #[error("growth certificate violated: {0}")]
    CertificateViolated(String),

    #[error("point outside the domain: {0}")]
    OutsideDomain(String),

    #[error("quadrature did not converge: estimate {estimate:.3e} > tolerance {tolerance:.3e} after {evaluations} evaluations")]
    Quadrature {
        estimate: f64,
        tolerance: f64,
        evaluations: usize,
    },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("row {row} violates the domain constraint: {reason}")]
    RowRejected { row: usize, reason: String },

    #[error("gluing failed: {0}")]
    Gluing(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of a mathematical check, false for bad input or
    /// operational problems.
    pub fn is_certification_failure(&self) -> bool {
        matches!(
            self,
            Error::CertificateViolated(_)
                | Error::UncertifiedProfile(_)
                | Error::Hypothesis(_)
                | Error::Certification(_)
                | Error::Gluing(_)
                | Error::Quadrature { .. }
        )
    }

    /// Short machine-readable tag used in the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidFrame(_) => "invalid_frame",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::EssentialSingularity => "essential_singularity",
            Error::TruncationDomain { .. } => "truncation_domain",
            Error::SpiralProximity { .. } => "spiral_proximity",
            Error::OutsideStrip { .. } => "outside_strip",
            Error::UncertifiedProfile(_) => "uncertified_profile",
            Error::CertificateViolated(_) => "certificate_violated",
            Error::OutsideDomain(_) => "outside_domain",
            Error::Quadrature { .. } => "quadrature",
            Error::Hypothesis(_) => "hypothesis",
            Error::Certification(_) => "certification",
            Error::Degenerate(_) => "degenerate",
            Error::RowRejected { .. } => "row_rejected",
            Error::Gluing(_) => "gluing",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
