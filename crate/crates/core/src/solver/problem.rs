use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GbvError, Result};
use crate::measures::Atom;
use crate::sampling::Measurement;
use crate::spline::{green_trace, scaled_power, PolySpline};
use crate::systems::{Endpoint, FundamentalSystem};

/// Data-fidelity term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Loss {
    /// `sum_m w_m (nu_m(f) - y_m)^2`; unit weights when omitted.
    Squared {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// Hard constraint `nu(f) = y`.
    Interpolation,
}

impl Loss {
    pub fn squared() -> Self {
        Loss::Squared { weights: None }
    }

    pub fn is_interpolation(&self) -> bool {
        matches!(self, Loss::Interpolation)
    }
}

/// Serialized problem `{order, K, measurements, y, loss, lambda}`. `K` may be
/// omitted, in which case `[min abscissa - 1, +inf)` is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub order: usize,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<(f64, Endpoint)>,
    pub measurements: Vec<Measurement>,
    pub y: Vec<f64>,
    pub loss: Loss,
    #[serde(default)]
    pub lambda: f64,
}

/// `min_f E(nu(f), y) + lambda ||D^N f||_M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemDocument", into = "ProblemDocument")]
pub struct Problem {
    system: FundamentalSystem,
    measurements: Vec<Measurement>,
    y: Vec<f64>,
    loss: Loss,
    lambda: f64,
}

impl TryFrom<ProblemDocument> for Problem {
    type Error = GbvError;

    fn try_from(doc: ProblemDocument) -> Result<Self> {
        let system = match doc.k {
            Some((a, b)) => FundamentalSystem::new(doc.order, a, b.value())?,
            None => FundamentalSystem::default_for(
                doc.order,
                doc.measurements
                    .iter()
                    .flat_map(|m| m.abscissae().collect::<Vec<_>>()),
            )?,
        };
        Problem::new(system, doc.measurements, doc.y, doc.loss, doc.lambda)
    }
}

impl From<Problem> for ProblemDocument {
    fn from(p: Problem) -> Self {
        ProblemDocument {
            order: p.order(),
            k: Some((
                p.system.anchor(),
                Endpoint::from_value(p.system.interval().hi()),
            )),
            measurements: p.measurements,
            y: p.y,
            loss: p.loss,
            lambda: p.lambda,
        }
    }
}

impl Problem {
    /// Structural validation only; modelling checks such as `lambda > 0`
    /// live in [`check_wellposedness`](super::check_wellposedness).
    pub fn new(
        system: FundamentalSystem,
        measurements: Vec<Measurement>,
        y: Vec<f64>,
        loss: Loss,
        lambda: f64,
    ) -> Result<Self> {
        if measurements.is_empty() {
            return Err(GbvError::InvalidProblem("no measurements".into()));
        }
        if measurements.len() != y.len() {
            return Err(GbvError::InvalidProblem(format!(
                "{} measurements but {} data values",
                measurements.len(),
                y.len()
            )));
        }
        for m in &measurements {
            m.check_order(system.order())?;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(GbvError::InvalidProblem("non-finite data value".into()));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(GbvError::InvalidProblem(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if let Loss::Squared { weights: Some(w) } = &loss {
            if w.len() != y.len() {
                return Err(GbvError::InvalidProblem(format!(
                    "{} weights for {} measurements",
                    w.len(),
                    y.len()
                )));
            }
            if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(GbvError::InvalidProblem(
                    "loss weights must be positive".into(),
                ));
            }
        }
        Ok(Problem {
            system,
            measurements,
            y,
            loss,
            lambda,
        })
    }

    /// Problem on the default system `[min abscissa - 1, +inf)`.
    pub fn with_default_system(
        order: usize,
        measurements: Vec<Measurement>,
        y: Vec<f64>,
        loss: Loss,
        lambda: f64,
    ) -> Result<Self> {
        let system = FundamentalSystem::default_for(
            order,
            measurements
                .iter()
                .flat_map(|m| m.abscissae().collect::<Vec<_>>()),
        )?;
        Self::new(system, measurements, y, loss, lambda)
    }

    pub fn order(&self) -> usize {
        self.system.order()
    }

    pub fn system(&self) -> &FundamentalSystem {
        &self.system
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn loss(&self) -> &Loss {
        &self.loss
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(
            self.system,
            self.measurements.clone(),
            self.y.clone(),
            self.loss.clone(),
            lambda,
        )
    }

    pub fn with_data(&self, y: Vec<f64>, loss: Loss) -> Result<Self> {
        Self::new(self.system, self.measurements.clone(), y, loss, self.lambda)
    }

    pub fn weights(&self) -> Vec<f64> {
        match &self.loss {
            Loss::Squared { weights: Some(w) } => w.clone(),
            _ => vec![1.0; self.len()],
        }
    }

    /// Whether every measurement term samples `D^{N-1}` (the exact-reduction regime).
    pub fn is_top_order(&self) -> bool {
        self.measurements
            .iter()
            .all(|m| m.is_top_order(self.order()))
    }

    /// Distinct measurement abscissae, sorted.
    pub fn abscissae(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self
            .measurements
            .iter()
            .flat_map(|m| m.abscissae().collect::<Vec<_>>())
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    /// Measurement of the monomial `t^j / j!`, row by row.
    pub(crate) fn null_column(&self, j: usize) -> Vec<f64> {
        self.measurements
            .iter()
            .map(|m| {
                m.terms()
                    .iter()
                    .filter(|term| term.functional.d <= j)
                    .map(|term| term.c * scaled_power(term.functional.t, j - term.functional.d))
                    .sum()
            })
            .collect()
    }

    /// Measurement of `u_N(. - tau)`, row by row.
    pub(crate) fn knot_column(&self, tau: f64) -> Vec<f64> {
        let n = self.order();
        self.measurements
            .iter()
            .map(|m| {
                m.terms()
                    .iter()
                    .map(|term| {
                        let f = term.functional;
                        term.c * green_trace(n - f.d, f.t - tau, f.side)
                    })
                    .sum()
            })
            .collect()
    }

    /// `nu(f) - y`.
    pub fn residuals(&self, f: &PolySpline) -> Result<Vec<f64>> {
        self.measurements
            .iter()
            .zip(&self.y)
            .map(|(m, y)| Ok(m.apply(f)? - y))
            .collect()
    }

    /// `E(nu(f), y) + lambda ||D^N f||_M`, or `||D^N f||_M` for interpolation.
    pub fn objective(&self, f: &PolySpline) -> Result<f64> {
        let tv = f.derivative_measure().tv_norm();
        match &self.loss {
            Loss::Interpolation => Ok(tv),
            Loss::Squared { .. } => {
                let r = self.residuals(f)?;
                let fit: f64 = self.weights().iter().zip(&r).map(|(w, r)| w * r * r).sum();
                Ok(fit + self.lambda * tv)
            }
        }
    }
}

/// The finite-dimensional program over a fixed candidate set: unknowns are
/// the visible null-space coefficients and one weight per candidate knot.
#[derive(Clone, Debug)]
pub(crate) struct Design {
    pub order: usize,
    /// Monomial indices `j` kept as unknowns.
    pub null_index: Vec<usize>,
    /// Candidate knot positions, one column each.
    pub knots: Vec<f64>,
    /// `[H_visible | A]`, rows are measurements.
    pub matrix: DMatrix<f64>,
}

impl Design {
    pub fn new(p: &Problem, knots: Vec<f64>) -> Self {
        let null_index = visible_null_columns(p);
        let m = p.len();
        let cols: Vec<Vec<f64>> = null_index
            .iter()
            .map(|&j| p.null_column(j))
            .chain(knots.iter().map(|&tau| p.knot_column(tau)))
            .collect();
        let matrix = DMatrix::from_fn(m, cols.len(), |r, c| cols[c][r]);
        Design {
            order: p.order(),
            null_index,
            knots,
            matrix,
        }
    }

    pub fn n_null(&self) -> usize {
        self.null_index.len()
    }

    pub fn n_vars(&self) -> usize {
        self.matrix.ncols()
    }

    /// Builds the spline from a full unknown vector `(b_visible, a)`; weights
    /// with `|a| <= prune` are dropped.
    pub fn spline(&self, x: &DVector<f64>, prune: f64) -> Result<PolySpline> {
        let mut null = vec![0.0; self.order];
        for (i, &j) in self.null_index.iter().enumerate() {
            null[j] = x[i];
        }
        let knots = self
            .knots
            .iter()
            .enumerate()
            .map(|(k, &tau)| Atom::new(tau, x[self.n_null() + k]))
            .filter(|a| a.weight.abs() > prune)
            .collect();
        PolySpline::new(self.order, null, knots)
    }
}

/// Greedy selection of linearly independent monomial columns. The remaining
/// directions are invisible to the measurements, or redundant with the
/// selected ones, and are fixed at 0.
pub(crate) fn visible_null_columns(p: &Problem) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut keep = Vec::new();
    for j in 0..p.order() {
        let col = DVector::from_vec(p.null_column(j));
        let scale = col.amax();
        if scale == 0.0 {
            continue;
        }
        let mut r = col.clone();
        for q in &basis {
            let proj = q.dot(&r);
            r -= q * proj;
        }
        if r.norm() > 1e-10 * col.norm() {
            basis.push(r.normalize());
            keep.push(j);
        }
    }
    keep
}

/// Solves `a z = y` on a support, in the least-squares sense when `a` is
/// tall. Square systems go through LU, which keeps simple integer data
/// exact; the SVD is the fallback. One refinement step follows.
pub(crate) fn solve_support(a: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    if a.ncols() == 0 {
        return Some(DVector::zeros(0));
    }
    let svd = a.clone().svd(true, true);
    let eps = 1e-13 * a.amax().max(1e-300);
    let refine = |z: DVector<f64>| -> DVector<f64> {
        match svd.solve(&(y - a * &z), eps) {
            Ok(dz) => {
                let z2 = &z + dz;
                if (a * &z2 - y).amax() < (a * &z - y).amax() {
                    z2
                } else {
                    z
                }
            }
            Err(_) => z,
        }
    };
    let mut best: Option<DVector<f64>> = None;
    if a.is_square() {
        if let Some(z) = a.clone().lu().solve(y) {
            best = Some(refine(z));
        }
    }
    if let Ok(z) = svd.solve(y, eps) {
        let z = refine(z);
        let better = match &best {
            Some(b) => (a * &z - y).amax() < (a * b - y).amax(),
            None => true,
        };
        if better {
            best = Some(z);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Side;

    fn two_point() -> Problem {
        Problem::with_default_system(
            1,
            vec![
                Measurement::trace(0.0, Side::Plus),
                Measurement::trace(1.0, Side::Plus),
            ],
            vec![0.0, 2.0],
            Loss::squared(),
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn objective_of_closed_form_solution() {
        let p = two_point();
        let f = PolySpline::new(1, vec![0.05], vec![Atom::new(1.0, 1.9)]).unwrap();
        assert!((p.objective(&f).unwrap() - 0.195).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        let m = vec![Measurement::trace(0.0, Side::Plus)];
        assert!(Problem::with_default_system(1, vec![], vec![], Loss::squared(), 0.1).is_err());
        assert!(
            Problem::with_default_system(1, m.clone(), vec![1.0, 2.0], Loss::squared(), 0.1)
                .is_err()
        );
        assert!(
            Problem::with_default_system(1, m.clone(), vec![1.0], Loss::squared(), -1.0).is_err()
        );
        let bad_w = Loss::Squared {
            weights: Some(vec![0.0]),
        };
        assert!(Problem::with_default_system(1, m.clone(), vec![1.0], bad_w, 0.1).is_err());
        let deriv = vec![Measurement::derivative_trace(0.0, Side::Plus, 1)];
        assert!(Problem::with_default_system(1, deriv, vec![1.0], Loss::squared(), 0.1).is_err());
    }

    #[test]
    fn default_system_anchor() {
        assert_eq!(two_point().system().anchor(), -1.0);
    }

    #[test]
    fn visible_columns_for_top_order() {
        let p = Problem::with_default_system(
            3,
            vec![Measurement::derivative_trace(0.0, Side::Plus, 2)],
            vec![1.0],
            Loss::squared(),
            0.1,
        )
        .unwrap();
        assert_eq!(visible_null_columns(&p), vec![2]);
        assert_eq!(visible_null_columns(&two_point()), vec![0]);
    }

    #[test]
    fn document_round_trip() {
        let text = r#"{"order":1,"measurements":[{"terms":[{"c":1,"t":0,"side":"plus","d":0}]}],"y":[1],"loss":{"kind":"squared"},"lambda":0.1}"#;
        let p: Problem = serde_json::from_str(text).unwrap();
        assert_eq!(p.system().anchor(), -1.0);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Problem>(&s).unwrap(), p);
        let interp: Loss = serde_json::from_str(r#"{"kind":"interpolation"}"#).unwrap();
        assert_eq!(interp, Loss::Interpolation);
    }
}
