//! High-precision evaluation of truncated theta sums
//! `F(K, j; a, b) = K^{-j} Σ_{k=0}^{K} k^j exp(2πi(ak + bk²))`
//! and their relatives, in time polynomial in `log(K/ε)`.
//!
//! The evaluator repeatedly applies Poisson summation: each pass converts a
//! length-`K` quadratic sum into a sum of length `⌊a + 2bK⌋ ≤ (K+1)/2` plus
//! remainder integrals that never contain a saddle point and therefore reduce
//! to rapidly converging one-dimensional integrals. Between passes the
//! arguments are renormalized into `[0,1) × [0,1/4]` using the periodicity of
//! the complex exponential, so at most `⌊log₂K⌋ + 1` passes are needed.
//!
//! Crate layout:
//!
//! - [`arith`]: precision contexts, counted HP real/complex arithmetic.
//! - [`quad`]: the saddle-free oscillatory integrals (`J`, `Ĩ_C`, `h`).
//! - [`euler`]: Bernoulli numbers, derivative recursion, Euler–Maclaurin
//!   branch for nearly linear phases.
//! - [`theta`]: argument normalization, saddle coefficients, the Poisson
//!   pass, and the top-level drivers.
//! - [`apps`]: `G(K, j; a, b)` sums and the Diophantine solution counter.
//! - [`oracle`]: slow reference implementations with rigorous error bounds.

use std::fmt;

pub mod apps;
pub mod arith;
pub mod euler;
pub mod oracle;
pub mod quad;
pub mod theta;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Evaluation target outside `(0, e⁻¹)`.
    EpsOutOfRange(f64),
    /// A stated hypothesis of the evaluation routine is violated; the message
    /// names the bound.
    HypothesisViolated(String),
    /// Operation called on the wrong dispatch branch (e.g. Euler–Maclaurin
    /// asked to handle `p < q`).
    WrongBranch(String),
    /// Derivative order `j` exceeds the supported range for this `K`.
    JTooLarge { j: u32, j_max: u32 },
    /// Malformed argument (domain error, parse failure, ...).
    InvalidArgument(String),
    /// Reference-oracle request exceeds its configured size guard.
    OracleInfeasible(String),
    /// Accumulated error bound too large to certify the requested output.
    InsufficientPrecision(String),
    /// Coefficient-growth bound violated during iteration.
    CoefficientBound(String),
    /// Non-finite input where a finite number is required.
    NonFinite(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EpsOutOfRange(e) => {
                write!(f, "eps must lie in (0, e^-1) ≈ (0, 0.3679), got {e}")
            }
            Error::HypothesisViolated(m) => write!(f, "hypothesis violated: {m}"),
            Error::WrongBranch(m) => write!(f, "wrong branch: {m}"),
            Error::JTooLarge { j, j_max } => {
                write!(f, "j = {j} exceeds supported maximum {j_max} for this K")
            }
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::OracleInfeasible(m) => write!(f, "oracle infeasible: {m}"),
            Error::InsufficientPrecision(m) => write!(f, "insufficient precision: {m}"),
            Error::CoefficientBound(m) => write!(f, "coefficient bound violated: {m}"),
            Error::NonFinite(m) => write!(f, "non-finite input: {m}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
