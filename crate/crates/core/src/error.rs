use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the spectral routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("potential is not PT-symmetric: {0}")]
    NotPtSymmetric(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integrator failed at x = {x}: {reason}")]
    StepFailure { x: f64, reason: String },

    #[error("Newton iteration did not converge from seed {seed} (last iterate {last}, residual {residual:e})")]
    NoConvergence {
        seed: Complex64,
        last: Complex64,
        residual: f64,
    },

    #[error("Newton iterate {iterate} left the search window")]
    OutOfWindow { iterate: Complex64 },

    #[error("curve tracer stalled near {at}")]
    Stall { at: Complex64 },

    #[error("QR iteration did not converge within {iterations} sweeps")]
    QrNoConvergence { iterations: usize },

    #[error("Bloch vector is degenerate (both eigenvector forms vanish)")]
    DegenerateVector,

    #[error("resonance {n} has c_n = c_-n = 0; the divisor ellipse is undefined")]
    DegenerateDivisor { n: u32 },

    #[error(
        "divisor continuation broke{}: {reason}",
        last_good_x.map(|x| format!(" after x = {x}")).unwrap_or_default()
    )]
    ContinuationBreak { last_good_x: Option<f64>, reason: String },

    #[error("samples are collinear; segment from {} to {}", .endpoints[0], .endpoints[1])]
    DegenerateFit { endpoints: [Complex64; 2] },

    #[error("need at least {needed} samples for a conic fit, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("conic fit failed: {0}")]
    FitFailure(String),

    #[error("divisor points {j} and {k} collided at x = {x}")]
    DivisorCollision { j: usize, k: usize, x: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
