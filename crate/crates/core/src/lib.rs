//! Numerical and exact-arithmetic checks for the analytic machinery of a
//! GL(3)xGL(2) subconvexity argument: special functions, character sums,
//! automorphic coefficient models, oscillatory integrals, the delta-symbol
//! expansion, Voronoi transforms, an exponent ledger and an end-to-end
//! pipeline that ties them together at desk scale.

pub mod arith;
pub mod delta_method;
pub mod error;
pub mod exponents;
pub mod quad;
pub mod forms;
pub mod oscillatory;
pub mod pipeline;
pub mod special_fn;
pub mod suites;
pub mod voronoi;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use num_rational::Rational64;

pub use arith::{CharSumParams, ResidueSum};
pub use delta_method::DeltaExpansion;
pub use exponents::{ExpExpr, Ledger};
pub use forms::{GL3Coeffs, HoloForm};
pub use oscillatory::{AmplitudeSpec, Bump, PhaseSpec};
pub use pipeline::{ExperimentConfig, Report};
pub use special_fn::{SpectralParams, StirlingExpansion};
pub use voronoi::{TestFunction, TransformParams};

/// e(x) = exp(2 pi i x).
#[inline]
pub fn e(x: f64) -> Complex64 {
    let t = std::f64::consts::TAU * x;
    Complex64::new(t.cos(), t.sin())
}

/// Numerical stand-in for the T^eps factor in every truncation formula.
pub const T_EPS: f64 = 10.0;
