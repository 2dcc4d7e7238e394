//! Time-harmonic scattering by a locally perturbed, perfectly reflecting
//! plane in two dimensions, and reconstruction of the perturbation from
//! intensity-only far-field or near-field measurements.
//!
//! The forward problem is solved with a combined-field boundary integral
//! equation over the closed contour formed by the perturbed part of the
//! surface and the lower half of a circle of radius `R`, using reflected
//! kernels so that only a bounded contour is discretised. The inverse
//! problem is attacked with a regularised Newton iteration that sweeps the
//! wavenumbers in ascending order.
//!
//! Module map:
//!
//! * [`special_fn`]: Bessel/Hankel functions and the Helmholtz Green's function.
//! * [`geometry`]: surface profiles, the quartic spline basis, graded meshes.
//! * [`waves`]: incident plus reflected plane waves.
//! * [`forward`]: Nyström assembly, dense solve, far/near field evaluation.
//! * [`synth`]: phaseless synthetic measurements with multiplicative noise.
//! * [`inversion`]: phaseless data maps, their derivatives, and the
//!   recursive-in-frequency Levenberg-Marquardt driver.
//! * [`verification`]: executable translation-invariance properties.
//! * [`cli`]: scenario files, presets and run artifacts.

use thiserror::Error;

pub mod cli;
pub mod forward;
pub mod geometry;
pub mod inversion;
pub mod special_fn;
pub mod synth;
pub mod verification;
pub mod waves;

/// A point or vector in the plane.
pub type Point = nalgebra::Vector2<f64>;

pub use num_complex::Complex64;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("kernel singularity: source and target points coincide")]
    Singularity,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown profile preset `{0}`")]
    UnknownPreset(String),
    #[error("linear solver failure: {0}")]
    Solver(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("malformed data file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
