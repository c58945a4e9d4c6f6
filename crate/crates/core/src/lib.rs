//! Sampling, inversion and sparse reconstruction for functions of
//! generalized bounded variation.
//!
//! The crate works with the canonical representatives of such functions,
//! [`PolySpline`]s whose `N`-th derivative is a finite sum of Dirac atoms,
//! and exposes them only through one-sided traces `f^-(t)`, `f^+(t)` and
//! their derivative analogues.
//!
//! * [`measures`]: signed measures (atoms plus piecewise-constant density).
//! * [`spline`]: D^N-splines, Green's functions, traces, the GBV norm.
//! * [`systems`]: fundamental systems, the null-space projector and the
//!   canonical right-inverse of `D^N`.
//! * [`sampling`]: trace functionals, continuity bounds, the weak*
//!   counterexample.
//! * [`solver`]: TV-regularized reconstruction from trace samples.
//! * [`checks`]: the randomized invariant suite behind `gbv check`.
//!
//! ```
//! use gbv::{PolySpline, Side};
//!
//! // Heaviside step u = (.)_+^0
//! let u = PolySpline::green(1, 0.0, 1.0).unwrap();
//! assert_eq!(u.eval_trace(0.0, Side::Minus), 0.0);
//! assert_eq!(u.eval_trace(0.0, Side::Plus), 1.0);
//! ```

pub mod checks;
pub mod error;
pub mod measures;
pub mod sampling;
pub mod solver;
pub mod spline;
pub mod systems;

pub use error::{GbvError, Result};
pub use measures::{
    Atom, DensityPiece, Interval, PiecewiseLinearTestFunction, Side, SignedMeasure,
};
pub use sampling::{Measurement, SamplingFunctional, Term};
pub use solver::{Loss, Problem, Solution, SolveOptions};
pub use spline::{greens, PolySpline, TraceEval};
pub use systems::FundamentalSystem;

// Chapters of the guide in book/, compiled so that their snippets stay in
// sync with the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/traces.md")]
    mod traces {}
    #[doc = include_str!("../../../book/src/fundamental-systems.md")]
    mod fundamental_systems {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
