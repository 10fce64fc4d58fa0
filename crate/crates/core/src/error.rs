use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "omega = {omega} rad/s sits on an imaginary-axis pole (|den(j omega)| = {magnitude:e})"
    )]
    PoleOnAxis { omega: f64, magnitude: f64 },

    #[error("composition produced a zero denominator")]
    DegenerateResult,

    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    #[error(
        "improper transfer function: numerator degree {num_deg} > denominator degree {den_deg}"
    )]
    ImproperTf { num_deg: usize, den_deg: usize },

    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("line {line}: frequencies must be strictly increasing")]
    NonMonotone { line: usize },

    #[error("FRF data needs at least 2 samples")]
    TooShort,

    #[error("omega = {omega} rad/s outside measured band [{lo}, {hi}]")]
    OutOfRange { omega: f64, lo: f64, hi: f64 },

    #[error("bad frequency range: need 0 < omega_min < omega_max and n >= 2")]
    BadRange,

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("measured-FRF plants cannot be realized in state space")]
    NotRealizable,

    #[error("component {name} is improper: {detail}")]
    ImproperComponent { name: &'static str, detail: String },

    #[error("|M1(j omega)| = {magnitude:e} below tolerance at omega = {omega} rad/s")]
    DividedByLoopZero { omega: f64, magnitude: f64 },

    #[error("resolvent (j omega I - A) singular at omega = {omega} rad/s")]
    SingularResolvent { omega: f64 },

    #[error("no Pade order <= {max_order} meets the phase tolerance over the requested band")]
    OrderExceeded { max_order: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
