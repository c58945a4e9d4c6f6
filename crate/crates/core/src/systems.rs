//! Fundamental bi-orthogonal systems over an interval `K = [a, b]`.
//!
//! The system is the causal, left-anchored one: the null-space basis is
//! `p_j(t) = (t - a)^j / j!` and the dual functionals are
//! `phi_j = D^j delta_a^+`, the right trace of the `j`-th derivative at the
//! left endpoint. It induces
//!
//! * the projector `P f = sum_j <phi_j, f> p_j` onto the null space of `D^N`;
//! * the right-inverse `D^{-N}_phi`, which maps an atomic measure `mu` in `K`
//!   to the unique spline `g` with `D^N g = mu` and `<phi_j, g> = 0`;
//! * the kernel `g_phi(t, tau) = u_N(t - tau) - sum_j p_j(t) u_{N-j}(a - tau)`
//!   of that right-inverse, which reduces to the shifted Green's function
//!   whenever `tau > a`.

use serde::{Deserialize, Serialize};

use crate::error::{GbvError, Result};
use crate::measures::{Atom, Interval, Side, SignedMeasure};
use crate::spline::{green_trace, scaled_power, PolySpline, TraceEval};

/// Upper endpoint of `K` in documents: a number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Endpoint {
    Finite(f64),
    Named(InfName),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InfName {
    #[serde(rename = "inf")]
    Inf,
}

impl Endpoint {
    pub fn value(self) -> f64 {
        match self {
            Endpoint::Finite(x) => x,
            Endpoint::Named(InfName::Inf) => f64::INFINITY,
        }
    }

    pub fn from_value(x: f64) -> Self {
        if x == f64::INFINITY {
            Endpoint::Named(InfName::Inf)
        } else {
            Endpoint::Finite(x)
        }
    }
}

/// Serialized form `{order, K: [a, b | "inf"]}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDocument {
    pub order: usize,
    #[serde(rename = "K")]
    pub k: (f64, Endpoint),
}

/// Fundamental system of order `N` localized to `K = [a, b]`, anchored at `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemDocument", into = "SystemDocument")]
pub struct FundamentalSystem {
    order: usize,
    interval: Interval,
}

impl TryFrom<SystemDocument> for FundamentalSystem {
    type Error = GbvError;

    fn try_from(doc: SystemDocument) -> Result<Self> {
        FundamentalSystem::new(doc.order, doc.k.0, doc.k.1.value())
    }
}

impl From<FundamentalSystem> for SystemDocument {
    fn from(sys: FundamentalSystem) -> Self {
        SystemDocument {
            order: sys.order,
            k: (sys.anchor(), Endpoint::from_value(sys.interval.hi())),
        }
    }
}

impl FundamentalSystem {
    /// `K = [a, b]` with `a` finite; `b = +inf` gives the half-line `[a, +inf)`.
    pub fn new(order: usize, a: f64, b: f64) -> Result<Self> {
        if order == 0 {
            return Err(GbvError::InvalidOrder(order));
        }
        if !a.is_finite() {
            return Err(GbvError::InvalidInterval(format!(
                "anchor must be finite, got {a}"
            )));
        }
        if b.is_nan() || b <= a {
            return Err(GbvError::InvalidInterval(format!(
                "need a < b, got [{a}, {b}]"
            )));
        }
        Ok(FundamentalSystem {
            order,
            interval: Interval::closed(a, b)?,
        })
    }

    /// `[min(abscissae) - 1, +inf)`, the default when no interval is given.
    pub fn default_for(order: usize, abscissae: impl IntoIterator<Item = f64>) -> Result<Self> {
        let lo = abscissae.into_iter().fold(f64::INFINITY, f64::min);
        let a = if lo.is_finite() { lo - 1.0 } else { -1.0 };
        Self::new(order, a, f64::INFINITY)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn interval(&self) -> &Interval {
        &self.interval
    }

    pub fn anchor(&self) -> f64 {
        self.interval.lo()
    }

    /// Same interval, different order.
    pub fn with_order(&self, order: usize) -> Result<Self> {
        Self::new(order, self.anchor(), self.interval.hi())
    }

    fn check_order(&self, found: usize) -> Result<()> {
        if found != self.order {
            return Err(GbvError::OrderMismatch {
                expected: self.order,
                found,
            });
        }
        Ok(())
    }

    /// The null-space basis function `p_j`.
    pub fn basis(&self, j: usize) -> Result<NullBasis> {
        if j >= self.order {
            return Err(GbvError::DerivativeOutOfRange {
                d: j,
                max: self.order - 1,
            });
        }
        Ok(NullBasis {
            order: self.order,
            anchor: self.anchor(),
            index: j,
        })
    }

    /// `p_j^{(d)}(t)`.
    pub fn basis_derivative(&self, j: usize, t: f64, d: usize) -> f64 {
        if j < d {
            0.0
        } else {
            scaled_power(t - self.anchor(), j - d)
        }
    }

    /// `<phi_j, f> = D^j f^+(a)`.
    pub fn dual<F: TraceEval + ?Sized>(&self, j: usize, f: &F) -> Result<f64> {
        self.check_order(f.order())?;
        f.generalized_trace(self.anchor(), Side::Plus, j)
    }

    /// All dual coefficients `(<phi_0, f>, ..., <phi_{N-1}, f>)`.
    pub fn jet<F: TraceEval + ?Sized>(&self, f: &F) -> Result<Vec<f64>> {
        (0..self.order).map(|j| self.dual(j, f)).collect()
    }

    /// The matrix `[<phi_i, p_j>]`.
    pub fn biorthogonality_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.order)
            .map(|i| {
                (0..self.order)
                    .map(|j| {
                        let p = self.basis(j).expect("index below order");
                        self.dual(i, &p).expect("orders agree")
                    })
                    .collect()
            })
            .collect()
    }

    /// Spline of `sum_j c_j p_j`, converted to the monomial basis `t^i / i!`.
    pub fn null_spline(&self, coeffs: &[f64]) -> Result<PolySpline> {
        self.check_order(coeffs.len())?;
        let shift = -self.anchor();
        let monomial = (0..self.order)
            .map(|i| {
                (i..self.order)
                    .map(|j| coeffs[j] * scaled_power(shift, j - i))
                    .sum()
            })
            .collect();
        PolySpline::new(self.order, monomial, Vec::new())
    }

    /// Null-space projector `P f = sum_j <phi_j, f> p_j`.
    ///
    /// A knot-free spline already lies in the null space and is returned as is.
    pub fn project_null(&self, f: &PolySpline) -> Result<PolySpline> {
        self.check_order(f.order())?;
        if f.knot_count() == 0 {
            return Ok(f.clone());
        }
        self.null_spline(&self.jet(f)?)
    }

    /// The canonical right-inverse `D^{-N}_phi mu`.
    pub fn right_inverse(&self, mu: &SignedMeasure) -> Result<PolySpline> {
        if !mu.is_atomic() {
            return Err(GbvError::NonAtomicMeasure);
        }
        if let Some(a) = mu
            .atoms()
            .iter()
            .find(|a| !self.interval.contains(a.location))
        {
            return Err(GbvError::AtomOutsideInterval(a.location));
        }
        let n = self.order;
        let anchor = self.anchor();
        // correction_j = sum_k w_k u_{N-j}(a - tau_k); nonzero only for atoms at or left of a
        let correction: Vec<f64> = (0..n)
            .map(|j| {
                -mu.atoms()
                    .iter()
                    .map(|a| a.weight * green_trace(n - j, anchor - a.location, Side::Plus))
                    .sum::<f64>()
            })
            .collect();
        let null = if correction.iter().all(|&c| c == 0.0) {
            vec![0.0; n]
        } else {
            self.null_spline(&correction)?.null_coeffs().to_vec()
        };
        PolySpline::new(n, null, mu.atoms().to_vec())
    }

    /// Trace of the right-inverse kernel `g_phi(t, tau)`.
    pub fn kernel(&self, t: f64, tau: f64, side: Side) -> f64 {
        self.kernel_derivative(t, tau, side, 0)
    }

    /// `d`-th `t`-derivative of the kernel (trace on `side`), `d < N`.
    pub fn kernel_derivative(&self, t: f64, tau: f64, side: Side, d: usize) -> f64 {
        let n = self.order;
        let lead = green_trace(n - d, t - tau, side);
        let correction: f64 = (d..n)
            .map(|j| {
                self.basis_derivative(j, t, d) * green_trace(n - j, self.anchor() - tau, Side::Plus)
            })
            .sum();
        lead - correction
    }

    /// `sup_tau |d^d/dt^d g_phi(t, tau)|` over all real `tau`, both traces.
    ///
    /// The kernel vanishes for `tau < min(t, a)` and `tau > max(t, a)`; in
    /// between it is `+/- (t - tau)^M / M!` with `M = N - 1 - d`, whose modulus
    /// is largest at `tau = a`. For `M = 0` the bound is the step height 1.
    pub fn kernel_sup(&self, t: f64, d: usize) -> f64 {
        let m = self.order - 1 - d;
        if m == 0 {
            1.0
        } else {
            scaled_power((t - self.anchor()).abs(), m)
        }
    }

    /// `max_j |p_j^{(d)}(t)|`.
    pub fn basis_sup(&self, t: f64, d: usize) -> f64 {
        (d..self.order)
            .map(|j| self.basis_derivative(j, t, d).abs())
            .fold(0.0, f64::max)
    }
}

/// Null-space basis function `p_j(t) = (t - a)^j / j!` evaluated in anchored form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NullBasis {
    order: usize,
    anchor: f64,
    index: usize,
}

impl TraceEval for NullBasis {
    fn order(&self) -> usize {
        self.order
    }

    fn generalized_trace(&self, t: f64, _side: Side, d: usize) -> Result<f64> {
        if d >= self.order {
            return Err(GbvError::DerivativeOutOfRange {
                d,
                max: self.order - 1,
            });
        }
        Ok(if self.index < d {
            0.0
        } else {
            scaled_power(t - self.anchor, self.index - d)
        })
    }
}

/// Free-function form of [`FundamentalSystem::project_null`].
pub fn project_null(f: &PolySpline, sys: &FundamentalSystem) -> Result<PolySpline> {
    sys.project_null(f)
}

/// Free-function form of [`FundamentalSystem::right_inverse`].
pub fn right_inverse(mu: &SignedMeasure, sys: &FundamentalSystem) -> Result<PolySpline> {
    sys.right_inverse(mu)
}

/// Free-function form of [`FundamentalSystem::kernel`].
pub fn kernel(sys: &FundamentalSystem, t: f64, tau: f64, side: Side) -> f64 {
    sys.kernel(t, tau, side)
}

/// Spline `sum_k w_k g_phi(., tau_k)` assembled knot by knot, an independent
/// route to [`FundamentalSystem::right_inverse`] used in tests.
#[doc(hidden)]
pub fn kernel_sum_trace(sys: &FundamentalSystem, atoms: &[Atom], t: f64, side: Side) -> f64 {
    atoms
        .iter()
        .map(|a| a.weight * sys.kernel(t, a.location, side))
        .sum()
}
