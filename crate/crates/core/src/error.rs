//! Error types shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("exponent {exp} is not on the declared 1/{den} grid for {var}")]
    Grid { var: char, exp: String, den: i64 },

    #[error("query ({q}, {y}) lies outside the guaranteed window (unknown, not zero)")]
    Window { q: String, y: String },

    #[error("series directions differ ({0} vs {1}); re-expand one operand first")]
    Direction(String, String),

    #[error("leading slice has no extreme monomial in the declared direction; series is not invertible")]
    NotInvertible,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("no convention in the documented search space matches: {0}")]
    ConventionUnresolved(String),

    #[error("evaluation point outside the convergence domain: {0}")]
    Domain(String),

    #[error("input too close to a lattice zero (|theta| = {0:.3e})")]
    NearSingular(f64),

    #[error("alpha is a rational lattice point (N*alpha in Z + Z*tau)")]
    Lattice,

    #[error("SL2(Z) search exhausted at bound {0}; raise the bound")]
    Search(i64),

    #[error("sample matrix is ill-conditioned (pivot {0:.3e})")]
    Conditioning(f64),
}

pub type Result<T> = std::result::Result<T, EngineError>;
