//! Recovery of wave-equation coefficients from single-receiver data.
//!
//! Two scalar problems on R^3 x (0,T), both driven by an impulsive point
//! source at the origin:
//!
//! * potential:  (d_tt - lap - q(x)) u = delta(x, t)
//! * damping:    (d_tt - lap + q(x) d_t) u = delta(x, t)
//!
//! In each case the solution splits into a sharp spherical front and a
//! smooth remainder behind it.  The crate provides the integral geometry
//! of the confocal prolate spheroids |x| + |x - e| = 2 tau (foci at the
//! source 0 and the receiver e = (1,0,0)), the front attenuation and
//! characteristic-cone traces of the remainder, retarded-potential and
//! characteristic-grid forward solvers, numerical verification of the
//! receiver-data integral identities, and the layer-stripping
//! reconstructors built on them.

pub mod cli;
pub mod config;
pub mod forward;
pub mod geometry;
pub mod greens;
pub mod identity;
pub mod inversion;
pub mod oracles;
pub mod profile;
pub mod quad;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("non-finite sample at {context}: f({x:?}) = {value}")]
    NonFiniteSample {
        context: String,
        x: [f64; 3],
        value: f64,
    },
    #[error("profile error: {0}")]
    Profile(String),
    #[error("quadrature did not reach tolerance {tol:e} on [{a}, {b}] (best error {err:e})")]
    QuadratureTolerance { a: f64, b: f64, tol: f64, err: f64 },
    #[error("solver step too large: {0}")]
    StepTooLarge(String),
    #[error("CFL violation: dt = {dt}, limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("iteration did not converge after {iterations} sweeps; residual history {history:?}")]
    NonConvergence {
        iterations: usize,
        history: Vec<f64>,
    },
    #[error("layer {layer} at coordinate {coord}: {reason}")]
    LayerFailure {
        layer: usize,
        coord: f64,
        reason: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Receiver focus shared by the whole crate: the second focus of every
/// confocal spheroid, e = (1, 0, 0).
pub const RECEIVER: [f64; 3] = [1.0, 0.0, 0.0];

/// Euclidean norm of a 3-vector.
#[inline]
pub fn norm(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Distance between two points.
#[inline]
pub fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}
