use thiserror::Error;

/// Errors raised by the core library.
///
/// Every variant maps to a stable, machine-readable reason code through
/// [`Error::reason_code`]; the harness writes that code into failure records.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("space mismatch: expected {expected}, found {found}")]
    SpaceMismatch { expected: String, found: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("degenerate functional: it vanishes on every element of the normalizing set")]
    DegenerateFunctional,

    #[error("activation overflow: argument {argument} exceeds the exponent cap {cap}")]
    ActivationOverflow { argument: f64, cap: f64 },

    #[error(
        "derivative of order {order} is numerically zero on the threshold range \
         (best |estimate| {best_estimate:e} vs threshold {threshold:e}); the activation is \
         likely a polynomial of degree < {order}, check it with detect_polynomial"
    )]
    LikelyPolynomial {
        order: usize,
        best_estimate: f64,
        threshold: f64,
    },

    #[error(
        "inadmissible activation: {activation} behaves as a polynomial of degree {degree}; \
         density requires a continuous activation that is not a polynomial"
    )]
    InadmissibleActivation { activation: String, degree: usize },

    #[error("activation {0} is not differentiable; mollify it or enable subgradient mode")]
    NonSmoothActivation(String),

    #[error("training diverged at iteration {iteration} (loss {loss:e})")]
    Divergence {
        iteration: usize,
        loss: f64,
        trace: Vec<f64>,
    },

    #[error("ill-conditioned least-squares system (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("threshold {threshold} required by the construction lies outside the admissible interval ({lo}, {hi})")]
    ThresholdOutOfRange { threshold: f64, lo: f64, hi: f64 },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub fn reason_code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::SpaceMismatch { .. } => "space_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::UnsupportedCombination(_) => "unsupported_combination",
            Error::DegenerateFunctional => "degenerate_functional",
            Error::ActivationOverflow { .. } => "activation_overflow",
            Error::LikelyPolynomial { .. } => "likely_polynomial",
            Error::InadmissibleActivation { .. } => "inadmissible_activation",
            Error::NonSmoothActivation(_) => "non_smooth_activation",
            Error::Divergence { .. } => "divergence",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::ThresholdOutOfRange { .. } => "threshold_out_of_range",
            Error::Serialization(_) => "serialization",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
