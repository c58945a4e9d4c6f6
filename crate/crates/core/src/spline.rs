//! D^N-splines, the canonical representatives of generalized BV functions.
//!
//! A [`PolySpline`] of order `N` is
//!
//! ```text
//! f(t) = sum_j b_j t^j / j!  +  sum_k a_k (t - tau_k)_+^(N-1) / (N-1)!
//! ```
//!
//! so that `D^N f = sum_k a_k delta_{tau_k}`. Pointwise values are only
//! exposed through one-sided traces; at a jump of an order-1 spline the
//! "value" is not defined, the left and right traces are.

use serde::{Deserialize, Serialize};

use crate::error::{GbvError, Result};
use crate::measures::{canonical_atoms, Atom, Side, SignedMeasure};
use crate::systems::FundamentalSystem;

/// One-sided trace of the causal Green's function `u_N(x) = x_+^(N-1) / (N-1)!`.
///
/// For `N = 1` this is the Heaviside step, whose left trace at 0 is 0 and
/// right trace is 1. For `N >= 2` both traces agree.
pub fn greens(order: usize, x: f64, side: Side) -> Result<f64> {
    if order == 0 {
        return Err(GbvError::InvalidOrder(order));
    }
    Ok(green_trace(order, x, side))
}

pub(crate) fn green_trace(order: usize, x: f64, side: Side) -> f64 {
    if order == 1 {
        return match side {
            Side::Minus => (x > 0.0) as u8 as f64,
            Side::Plus => (x >= 0.0) as u8 as f64,
        };
    }
    if x <= 0.0 {
        0.0
    } else {
        scaled_power(x, order - 1)
    }
}

/// `x^k / k!`, with `x^0 / 0! = 1` for every `x`.
pub(crate) fn scaled_power(x: f64, k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * x / i as f64)
}

/// Anything whose generalized one-sided traces `D^d f^{+/-}(t)` can be read.
pub trait TraceEval {
    fn order(&self) -> usize;

    /// Side trace of the `d`-th derivative at `t`, for `0 <= d < order`.
    fn generalized_trace(&self, t: f64, side: Side, d: usize) -> Result<f64>;
}

#[derive(Deserialize)]
struct RawSpline {
    order: usize,
    null_coeffs: Vec<f64>,
    #[serde(default)]
    knots: Vec<Atom>,
}

impl TryFrom<RawSpline> for PolySpline {
    type Error = GbvError;

    fn try_from(raw: RawSpline) -> Result<Self> {
        PolySpline::new(raw.order, raw.null_coeffs, raw.knots)
    }
}

/// A D^N-spline: polynomial null-space part plus weighted shifted Green's functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpline")]
pub struct PolySpline {
    order: usize,
    null_coeffs: Vec<f64>,
    knots: Vec<Atom>,
}

impl PolySpline {
    /// `null_coeffs[j]` multiplies `t^j / j!`; exactly `order` of them are required.
    /// Knots are put in canonical form (sorted, merged, zero weights dropped).
    pub fn new(order: usize, null_coeffs: Vec<f64>, knots: Vec<Atom>) -> Result<Self> {
        if order == 0 {
            return Err(GbvError::InvalidOrder(order));
        }
        if null_coeffs.len() != order {
            return Err(GbvError::InvalidSpline(format!(
                "order {order} needs {order} null-space coefficients, got {}",
                null_coeffs.len()
            )));
        }
        if null_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(GbvError::InvalidSpline(
                "non-finite null-space coefficient".into(),
            ));
        }
        if knots
            .iter()
            .any(|k| !k.location.is_finite() || !k.weight.is_finite())
        {
            return Err(GbvError::InvalidSpline("non-finite knot".into()));
        }
        Ok(PolySpline {
            order,
            null_coeffs,
            knots: canonical_atoms(knots),
        })
    }

    pub fn zero(order: usize) -> Result<Self> {
        Self::new(order, vec![0.0; order], Vec::new())
    }

    /// Knot-free spline `sum_j coeffs[j] t^j / j!`.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs.len(), coeffs, Vec::new())
    }

    /// `weight * u_N(. - tau)`.
    pub fn green(order: usize, tau: f64, weight: f64) -> Result<Self> {
        Self::new(order, vec![0.0; order.max(1)], vec![Atom::new(tau, weight)])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn null_coeffs(&self) -> &[f64] {
        &self.null_coeffs
    }

    pub fn knots(&self) -> &[Atom] {
        &self.knots
    }

    pub fn knot_count(&self) -> usize {
        self.knots.len()
    }

    pub fn is_zero(&self) -> bool {
        self.knots.is_empty() && self.null_coeffs.iter().all(|&c| c == 0.0)
    }

    /// Weight of the knot at exactly `t`, or 0.
    pub fn knot_weight_at(&self, t: f64) -> f64 {
        self.knots
            .binary_search_by(|k| k.location.total_cmp(&t))
            .map(|i| self.knots[i].weight)
            .unwrap_or(0.0)
    }

    /// One-sided trace `f^{+/-}(t)`.
    pub fn eval_trace(&self, t: f64, side: Side) -> f64 {
        self.trace_unchecked(t, side, 0)
    }

    fn trace_unchecked(&self, t: f64, side: Side, d: usize) -> f64 {
        let poly: f64 = self.null_coeffs[d..]
            .iter()
            .enumerate()
            .map(|(k, b)| b * scaled_power(t, k))
            .sum();
        let greens: f64 = self
            .knots
            .iter()
            .map(|k| k.weight * green_trace(self.order - d, t - k.location, side))
            .sum();
        poly + greens
    }

    /// `D^N f` as a purely atomic measure.
    pub fn derivative_measure(&self) -> SignedMeasure {
        SignedMeasure::atomic(self.knots.iter().map(|k| (k.location, k.weight)))
    }

    pub fn add(&self, other: &PolySpline) -> Result<PolySpline> {
        if self.order != other.order {
            return Err(GbvError::OrderMismatch {
                expected: self.order,
                found: other.order,
            });
        }
        let null_coeffs = self
            .null_coeffs
            .iter()
            .zip(&other.null_coeffs)
            .map(|(a, b)| a + b)
            .collect();
        let knots = self.knots.iter().chain(&other.knots).copied().collect();
        PolySpline::new(self.order, null_coeffs, knots)
    }

    pub fn sub(&self, other: &PolySpline) -> Result<PolySpline> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, alpha: f64) -> PolySpline {
        let null_coeffs = self.null_coeffs.iter().map(|b| alpha * b).collect();
        let knots = self
            .knots
            .iter()
            .map(|k| Atom::new(k.location, alpha * k.weight))
            .collect();
        PolySpline {
            order: self.order,
            null_coeffs,
            knots: canonical_atoms(knots),
        }
    }

    /// `||D^N f||_M + sum_j |<phi_j, f>|` for the given fundamental system.
    pub fn gbv_norm(&self, sys: &FundamentalSystem) -> Result<f64> {
        let jets = sys.jet(self)?;
        Ok(self.derivative_measure().tv_norm() + jets.iter().map(|c| c.abs()).sum::<f64>())
    }
}

impl TraceEval for PolySpline {
    fn order(&self) -> usize {
        self.order
    }

    fn generalized_trace(&self, t: f64, side: Side, d: usize) -> Result<f64> {
        if d >= self.order {
            return Err(GbvError::DerivativeOutOfRange {
                d,
                max: self.order - 1,
            });
        }
        Ok(self.trace_unchecked(t, side, d))
    }
}

/// Free-function form of [`PolySpline::eval_trace`].
pub fn eval_trace(f: &PolySpline, t: f64, side: Side) -> f64 {
    f.eval_trace(t, side)
}

/// Free-function form of [`TraceEval::generalized_trace`].
pub fn generalized_trace(f: &PolySpline, t: f64, side: Side, d: usize) -> Result<f64> {
    f.generalized_trace(t, side, d)
}

/// Free-function form of [`PolySpline::derivative_measure`].
pub fn derivative_measure(f: &PolySpline) -> SignedMeasure {
    f.derivative_measure()
}

/// Free-function form of [`PolySpline::gbv_norm`].
pub fn gbv_norm(f: &PolySpline, sys: &FundamentalSystem) -> Result<f64> {
    f.gbv_norm(sys)
}
