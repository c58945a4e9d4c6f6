//! Generalized sampling functionals `D^d delta_t^{+/-}` and finite linear
//! combinations of them.
//!
//! Trace functionals are norm-continuous on GBV but not weak*-continuous;
//! [`continuity_bound`] gives the explicit constant of the first fact and
//! [`weakstar_counterexample`] exhibits the second.

use serde::{Deserialize, Serialize};

use crate::error::{GbvError, Result};
use crate::measures::{PiecewiseLinearTestFunction, Side, SignedMeasure};
use crate::spline::{PolySpline, TraceEval};
use crate::systems::FundamentalSystem;

/// `f -> D^d f^{side}(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingFunctional {
    pub t: f64,
    pub side: Side,
    #[serde(default)]
    pub d: usize,
}

impl SamplingFunctional {
    pub fn new(t: f64, side: Side, d: usize) -> Self {
        SamplingFunctional { t, side, d }
    }

    pub fn trace(t: f64, side: Side) -> Self {
        Self::new(t, side, 0)
    }

    pub fn apply<F: TraceEval + ?Sized>(&self, f: &F) -> Result<f64> {
        f.generalized_trace(self.t, self.side, self.d)
    }
}

/// One term `c * functional`; serialized flat as `{c, t, side, d}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub c: f64,
    #[serde(flatten)]
    pub functional: SamplingFunctional,
}

#[derive(Deserialize)]
struct RawMeasurement {
    terms: Vec<Term>,
}

impl TryFrom<RawMeasurement> for Measurement {
    type Error = GbvError;

    fn try_from(raw: RawMeasurement) -> Result<Self> {
        Measurement::new(raw.terms)
    }
}

/// Finite linear combination of sampling functionals, the rows of the
/// measurement operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasurement")]
pub struct Measurement {
    terms: Vec<Term>,
}

impl Measurement {
    /// At least one term, every coefficient nonzero and finite.
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(GbvError::InvalidMeasurement("no terms".into()));
        }
        for term in &terms {
            if term.c == 0.0 || !term.c.is_finite() {
                return Err(GbvError::InvalidMeasurement(format!(
                    "bad coefficient {}",
                    term.c
                )));
            }
            if !term.functional.t.is_finite() {
                return Err(GbvError::InvalidMeasurement("non-finite abscissa".into()));
            }
        }
        Ok(Measurement { terms })
    }

    pub fn single(c: f64, functional: SamplingFunctional) -> Result<Self> {
        Self::new(vec![Term { c, functional }])
    }

    /// `delta_t^{side}`.
    pub fn trace(t: f64, side: Side) -> Self {
        Self::single(1.0, SamplingFunctional::trace(t, side)).expect("unit trace is valid")
    }

    /// `D^d delta_t^{side}`.
    pub fn derivative_trace(t: f64, side: Side, d: usize) -> Self {
        Self::single(1.0, SamplingFunctional::new(t, side, d)).expect("unit trace is valid")
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn max_derivative(&self) -> usize {
        self.terms.iter().map(|t| t.functional.d).max().unwrap_or(0)
    }

    pub fn abscissae(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().map(|t| t.functional.t)
    }

    /// Whether every term samples the top derivative `D^{N-1}`.
    pub fn is_top_order(&self, order: usize) -> bool {
        self.terms.iter().all(|t| t.functional.d + 1 == order)
    }

    pub fn check_order(&self, order: usize) -> Result<()> {
        match self.terms.iter().find(|t| t.functional.d >= order) {
            Some(t) => Err(GbvError::DerivativeOutOfRange {
                d: t.functional.d,
                max: order.saturating_sub(1),
            }),
            None => Ok(()),
        }
    }

    pub fn apply<F: TraceEval + ?Sized>(&self, f: &F) -> Result<f64> {
        self.check_order(f.order())?;
        self.terms
            .iter()
            .map(|t| Ok(t.c * t.functional.apply(f)?))
            .sum()
    }

    pub fn scale(&self, alpha: f64) -> Result<Measurement> {
        Measurement::new(
            self.terms
                .iter()
                .map(|t| Term {
                    c: alpha * t.c,
                    ..*t
                })
                .collect(),
        )
    }

    /// Terms sorted by `(t, side, d)` with equal functionals merged; `None`
    /// if everything cancels.
    pub fn normalized(&self) -> Option<Measurement> {
        let mut terms = self.terms.clone();
        terms.sort_by(|a, b| {
            let (fa, fb) = (&a.functional, &b.functional);
            fa.t.total_cmp(&fb.t)
                .then(fa.side.cmp(&fb.side))
                .then(fa.d.cmp(&fb.d))
        });
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for term in terms {
            match out.last_mut() {
                Some(last) if last.functional == term.functional => last.c += term.c,
                _ => out.push(term),
            }
        }
        out.retain(|t| t.c != 0.0);
        Measurement::new(out).ok()
    }

    /// Returns `alpha` with `self = alpha * other` as functionals, if any.
    pub fn proportionality(&self, other: &Measurement) -> Option<f64> {
        let (a, b) = (self.normalized()?, other.normalized()?);
        if a.terms.len() != b.terms.len() {
            return None;
        }
        let alpha = a.terms[0].c / b.terms[0].c;
        let same = a.terms.iter().zip(&b.terms).all(|(x, y)| {
            x.functional == y.functional && (x.c - alpha * y.c).abs() <= 1e-12 * x.c.abs().max(1.0)
        });
        same.then_some(alpha)
    }
}

/// `nu(f) = sum_i c_i D^{d_i} f^{side_i}(t_i)`.
pub fn apply(m: &Measurement, f: &PolySpline) -> Result<f64> {
    m.apply(f)
}

/// Constant `C` with `|m(f)| <= C * ||f||_GBV` for every `f`.
///
/// Each term contributes `|c_i| * max(sup_tau |D^d g_phi(t_i, tau)|, max_j |p_j^{(d)}(t_i)|)`;
/// for top-order terms at or right of the anchor this is exactly `|c_i|`.
/// Lower-order terms grow polynomially with the distance to the anchor and
/// the constant is then only an upper bound.
pub fn continuity_bound(m: &Measurement, sys: &FundamentalSystem) -> Result<f64> {
    m.check_order(sys.order())?;
    Ok(m.terms()
        .iter()
        .map(|term| {
            let SamplingFunctional { t, d, .. } = term.functional;
            term.c.abs() * sys.kernel_sup(t, d).max(sys.basis_sup(t, d))
        })
        .sum())
}

/// Output of [`weakstar_counterexample`].
#[derive(Clone, Debug, PartialEq)]
pub struct WeakStarSample {
    pub n: u64,
    /// `<g, D f_n>`, tends to 0.
    pub pairing: f64,
    /// `f_n^+(0)`, constantly 1.
    pub trace: f64,
    /// `(<phi_0, f_n>)`, constantly 0.
    pub jet: Vec<f64>,
}

/// Sequence `f_n = u - u(. - 1/n)` that converges weak* to 0 while its right
/// trace at 0 stays at 1.
pub fn weakstar_counterexample(
    n: u64,
    g: &PiecewiseLinearTestFunction,
    sys: &FundamentalSystem,
) -> Result<WeakStarSample> {
    if n == 0 {
        return Err(GbvError::InvalidProblem("n must be at least 1".into()));
    }
    if sys.order() != 1 {
        return Err(GbvError::OrderMismatch {
            expected: 1,
            found: sys.order(),
        });
    }
    if sys.anchor() > -1.0 {
        return Err(GbvError::InvalidInterval(format!(
            "anchor must be at most -1, got {}",
            sys.anchor()
        )));
    }
    let h = 1.0 / n as f64;
    let f = PolySpline::new(1, vec![0.0], vec![(0.0, 1.0).into(), (h, -1.0).into()])?;
    let mu: SignedMeasure = f.derivative_measure();
    Ok(WeakStarSample {
        n,
        pairing: g.pair(&mu),
        trace: f.eval_trace(0.0, Side::Plus),
        jet: sys.jet(&f)?,
    })
}

/// A spline attaining `|m(f)| = C * ||f||` for a single top-order term.
///
/// Right of the anchor it is a Green's function with its knot strictly
/// between the anchor and `t` (for a minus trace) or at most `t` (plus);
/// at the anchor it is the top null-space basis function `p_{N-1}`.
pub fn tightness_witness(term: &SamplingFunctional, sys: &FundamentalSystem) -> Result<PolySpline> {
    let n = sys.order();
    if term.d + 1 != n {
        return Err(GbvError::InvalidMeasurement(
            "witness needs a top-order functional".into(),
        ));
    }
    let a = sys.anchor();
    if term.t > a {
        let tau = match term.side {
            Side::Plus => 0.5 * (a + term.t),
            Side::Minus => a + 0.25 * (term.t - a),
        };
        if tau > a && tau < term.t {
            return PolySpline::green(n, tau, 1.0);
        }
    }
    let mut coeffs = vec![0.0; n];
    coeffs[n - 1] = 1.0;
    sys.null_spline(&coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_line(order: usize) -> FundamentalSystem {
        FundamentalSystem::new(order, -1.0, f64::INFINITY).unwrap()
    }

    #[test]
    fn apply_examples() {
        let u = PolySpline::green(1, 0.0, 1.0).unwrap();
        assert_eq!(Measurement::trace(0.0, Side::Plus).apply(&u).unwrap(), 1.0);
        assert_eq!(Measurement::trace(0.0, Side::Minus).apply(&u).unwrap(), 0.0);
        let m = Measurement::new(vec![
            Term {
                c: 1.0,
                functional: SamplingFunctional::trace(1.0, Side::Plus),
            },
            Term {
                c: -1.0,
                functional: SamplingFunctional::trace(0.0, Side::Plus),
            },
        ])
        .unwrap();
        let f = PolySpline::new(1, vec![1.0], vec![(0.5, 2.0).into()]).unwrap();
        assert_eq!(m.apply(&f).unwrap(), 2.0);
    }

    #[test]
    fn apply_rejects_order_mismatch() {
        let u = PolySpline::green(1, 0.0, 1.0).unwrap();
        let m = Measurement::derivative_trace(0.0, Side::Plus, 1);
        assert!(matches!(
            m.apply(&u),
            Err(GbvError::DerivativeOutOfRange { .. })
        ));
    }

    #[test]
    fn continuity_bound_examples() {
        for t in [-1.0, 0.0, 3.5] {
            for side in Side::BOTH {
                assert_eq!(
                    continuity_bound(&Measurement::trace(t, side), &half_line(1)).unwrap(),
                    1.0
                );
                for n in 2..=4 {
                    let m = Measurement::derivative_trace(t, side, n - 1);
                    assert_eq!(continuity_bound(&m, &half_line(n)).unwrap(), 1.0);
                }
            }
            let m = Measurement::single(2.0, SamplingFunctional::trace(t, Side::Plus)).unwrap();
            assert_eq!(continuity_bound(&m, &half_line(1)).unwrap(), 2.0);
        }
    }

    #[test]
    fn lower_order_bound_grows() {
        let sys = half_line(2);
        let m = Measurement::derivative_trace(3.0, Side::Plus, 0);
        // |t - a| = 4
        assert_eq!(continuity_bound(&m, &sys).unwrap(), 4.0);
    }

    #[test]
    fn weakstar_examples() {
        let g = PiecewiseLinearTestFunction::unit_hat();
        let sys = half_line(1);
        for (n, want) in [(1, 1.0), (2, 0.5), (10, 0.1)] {
            let s = weakstar_counterexample(n, &g, &sys).unwrap();
            assert_eq!(s.pairing, want);
            assert_eq!(s.trace, 1.0);
            assert_eq!(s.jet, vec![0.0]);
        }
        assert!(weakstar_counterexample(0, &g, &sys).is_err());
        let bad_anchor = FundamentalSystem::new(1, 0.0, f64::INFINITY).unwrap();
        assert!(weakstar_counterexample(1, &g, &bad_anchor).is_err());
    }

    #[test]
    fn witness_attains_bound() {
        for n in 1..=4 {
            let sys = half_line(n);
            for t in [-1.0, -0.5, 0.0, 2.0] {
                for side in Side::BOTH {
                    let func = SamplingFunctional::new(t, side, n - 1);
                    let f = tightness_witness(&func, &sys).unwrap();
                    let value = func.apply(&f).unwrap().abs();
                    let norm = f.gbv_norm(&sys).unwrap();
                    assert!(
                        value >= 0.99 * norm,
                        "n={n} t={t} {side}: {value} vs {norm}"
                    );
                }
            }
        }
    }

    #[test]
    fn json_shape() {
        let m = Measurement::trace(0.0, Side::Plus);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"terms":[{"c":1.0,"t":0.0,"side":"plus","d":0}]}"#);
        assert_eq!(serde_json::from_str::<Measurement>(&s).unwrap(), m);
        assert!(serde_json::from_str::<Measurement>(r#"{"terms":[]}"#).is_err());
    }

    #[test]
    fn proportional_measurements() {
        let a = Measurement::trace(0.0, Side::Plus);
        let b = a.scale(-3.0).unwrap();
        assert_eq!(b.proportionality(&a), Some(-3.0));
        assert_eq!(
            Measurement::trace(0.0, Side::Minus).proportionality(&a),
            None
        );
    }
}
