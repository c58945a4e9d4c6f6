//! TV-regularized reconstruction from (generalized) trace samples.
//!
//! Problems of the form `min_f E(nu(f), y) + lambda ||D^N f||_M` are reduced
//! to a finite program over one candidate knot per activation class (see
//! [`candidate_knots`]), which is exact when every measurement term samples
//! `D^{N-1}`. Squared losses go through proximal gradient, interpolation
//! through a small linear program. [`oracle_solve`] is a brute-force grid
//! counterpart, and [`enumerate_extreme_points`] lists the sparse vertices
//! of the solution set.

mod candidates;
mod extreme;
mod lasso;
mod lp;
mod problem;
mod wellposed;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use candidates::{candidate_knots, grid_knots, CandidateKnot, MAX_GRID_KNOTS};
pub use extreme::{enumerate_extreme_points, enumerate_extreme_points_with, ExtremeOptions};
pub use problem::{Loss, Problem, ProblemDocument};
pub use wellposed::{check_wellposedness, Report, Status};

use crate::error::{GbvError, Result};
use crate::spline::PolySpline;
use lasso::Lasso;
use problem::Design;

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Stationarity tolerance of the proximal iteration; also the pruning threshold for knot weights.
    pub tol: f64,
    pub max_iter: usize,
    /// Recorded in the report. The solver itself draws no random numbers.
    pub seed: u64,
    /// Grid pitch for mixed-order problems, which have no exact reduction.
    pub grid_step: Option<f64>,
    /// Solve even when the well-posedness check fails; the report keeps the failure as a warning.
    pub allow_illposed: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 200_000,
            seed: 0,
            grid_step: None,
            allow_illposed: false,
        }
    }
}

#[derive(Deserialize)]
struct RawSolution {
    spline: PolySpline,
    cost: f64,
    knot_count: usize,
    residuals: Vec<f64>,
    report: Report,
}

impl TryFrom<RawSolution> for Solution {
    type Error = GbvError;

    fn try_from(raw: RawSolution) -> Result<Self> {
        if raw.knot_count != raw.spline.knot_count() {
            return Err(GbvError::InvalidSpline(format!(
                "knot_count {} but spline has {} knots",
                raw.knot_count,
                raw.spline.knot_count()
            )));
        }
        Ok(Solution {
            spline: raw.spline,
            cost: raw.cost,
            knot_count: raw.knot_count,
            residuals: raw.residuals,
            report: raw.report,
        })
    }
}

/// A solver output; serialized as `{spline, cost, knot_count, residuals, report}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSolution")]
pub struct Solution {
    pub spline: PolySpline,
    pub cost: f64,
    pub knot_count: usize,
    pub residuals: Vec<f64>,
    pub report: Report,
}

impl Solution {
    pub(crate) fn from_spline(p: &Problem, spline: PolySpline, report: Report) -> Result<Self> {
        let cost = p.objective(&spline)?;
        let residuals = p.residuals(&spline)?;
        Ok(Solution {
            knot_count: spline.knot_count(),
            spline,
            cost,
            residuals,
            report,
        })
    }
}

fn wellposed_or_fail(p: &Problem, opts: &SolveOptions) -> Result<Report> {
    let mut report = check_wellposedness(p);
    if !report.passed() {
        if !opts.allow_illposed {
            return Err(match report.status {
                Status::Infeasible => GbvError::Infeasible,
                _ => GbvError::IllPosed(report.errors.join("; ")),
            });
        }
        let errors = std::mem::take(&mut report.errors);
        report.contradictions.clear();
        for e in errors {
            report.warn(format!("overridden: {e}"));
        }
    }
    Ok(report)
}

/// Knot positions of the finite program: the exact class representatives,
/// or a column-deduplicated grid for mixed-order problems.
fn program_knots(p: &Problem, opts: &SolveOptions) -> Result<Vec<f64>> {
    if p.is_top_order() {
        return Ok(candidate_knots(p)?
            .into_iter()
            .map(|c| c.position)
            .collect());
    }
    let step = opts.grid_step.ok_or(GbvError::MixedOrder)?;
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let mut knots = Vec::new();
    for tau in grid_knots(p, step)? {
        let col = p.knot_column(tau);
        if !seen.contains(&col) {
            seen.push(col);
            knots.push(tau);
        }
    }
    Ok(knots)
}

fn squared_program<'a>(
    p: &Problem,
    design: &'a Design,
    y: &'a DVector<f64>,
    w: &'a DVector<f64>,
) -> Lasso<'a> {
    Lasso {
        matrix: &design.matrix,
        y,
        weights: w,
        lambda: p.lambda(),
        free: design.n_null(),
    }
}

fn solve_interpolation(design: &Design, y: &[f64]) -> Result<DVector<f64>> {
    let m = design.matrix.nrows();
    let nv = design.n_vars();
    let nn = design.n_null();
    // x = (v+, v-), cost 1 on knot weights, 0 on null coefficients
    let a: Vec<Vec<f64>> = (0..m)
        .map(|r| {
            let row = design.matrix.row(r);
            row.iter().copied().chain(row.iter().map(|v| -v)).collect()
        })
        .collect();
    let c: Vec<f64> = (0..2 * nv)
        .map(|k| if k % nv < nn { 0.0 } else { 1.0 })
        .collect();
    let lp = lp::solve_lp(&a, y, &c).map_err(|e| match e {
        lp::LpError::Infeasible => GbvError::Infeasible,
        lp::LpError::Unbounded => GbvError::IllPosed("linear program is unbounded".into()),
        lp::LpError::IterationLimit => GbvError::NoConvergence(0),
    })?;
    let x = DVector::from_fn(nv, |k, _| lp.x[k] - lp.x[k + nv]);
    Ok(polish_interpolation(design, y, x))
}

/// Re-solves `B_S x = y` on the basic support to remove simplex round-off.
fn polish_interpolation(design: &Design, y: &[f64], x: DVector<f64>) -> DVector<f64> {
    let nn = design.n_null();
    let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cols: Vec<usize> = (0..x.len())
        .filter(|&k| k < nn || x[k].abs() > 1e-12 * scale)
        .collect();
    let sub = design.matrix.select_columns(cols.iter());
    let target = DVector::from_column_slice(y);
    let Some(z) = problem::solve_support(&sub, &target) else {
        return x;
    };
    if (&sub * &z - &target).amax() > 1e-12 * scale {
        return x;
    }
    let mut out = DVector::zeros(x.len());
    for (i, &k) in cols.iter().enumerate() {
        if k >= nn && z[i].signum() != x[k].signum() {
            return x;
        }
        out[k] = z[i];
    }
    let tv = |v: &DVector<f64>| {
        v.rows(nn, v.len() - nn)
            .iter()
            .map(|a| a.abs())
            .sum::<f64>()
    };
    if tv(&out) <= tv(&x) + 1e-12 * scale {
        out
    } else {
        x
    }
}

/// Solves the problem through its exact finite knot reduction (or a grid,
/// for mixed-order measurements when `opts.grid_step` is set).
pub fn solve(p: &Problem, opts: &SolveOptions) -> Result<Solution> {
    let mut report = wellposed_or_fail(p, opts)?;
    report.seed = opts.seed;
    let knots = program_knots(p, opts)?;
    let design = Design::new(p, knots);
    let x = match p.loss() {
        Loss::Squared { .. } => {
            let y = DVector::from_column_slice(p.y());
            let w = DVector::from_vec(p.weights());
            let out = squared_program(p, &design, &y, &w).solve(opts.tol, opts.max_iter)?;
            report.method = if out.polished {
                "proximal-gradient+polish"
            } else {
                "proximal-gradient"
            }
            .into();
            report.iterations = out.iterations;
            out.x
        }
        Loss::Interpolation => {
            report.method = "simplex".into();
            solve_interpolation(&design, p.y())?
        }
    };
    report.converged = true;
    let spline = design.spline(&x, opts.tol)?;
    Solution::from_spline(p, spline, report)
}

/// Brute-force counterpart of [`solve`]: knots fixed on a uniform grid with
/// quarter-step twins, squared losses by cyclic coordinate descent.
pub fn oracle_solve(p: &Problem, grid_step: f64) -> Result<Solution> {
    let knots = grid_knots(p, grid_step)?;
    let design = Design::new(p, knots);
    let mut report = check_wellposedness(p);
    report.grid_approximate = true;
    let x = match p.loss() {
        Loss::Squared { .. } => {
            let y = DVector::from_column_slice(p.y());
            let w = DVector::from_vec(p.weights());
            let lasso = squared_program(p, &design, &y, &w);
            let (x, sweeps, converged) = lasso::coordinate_descent(&lasso, 1e-13, 200_000);
            report.method = "oracle-coordinate-descent".into();
            report.iterations = sweeps;
            report.converged = converged;
            x
        }
        Loss::Interpolation => {
            report.method = "oracle-simplex".into();
            report.converged = true;
            solve_interpolation(&design, p.y())?
        }
    };
    let spline = design.spline(&x, 0.0)?;
    Solution::from_spline(p, spline, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Side;
    use crate::sampling::Measurement;

    fn traces(ts: &[(f64, Side)], order: usize) -> Vec<Measurement> {
        ts.iter()
            .map(|&(t, s)| Measurement::derivative_trace(t, s, order - 1))
            .collect()
    }

    #[test]
    fn constant_fits_single_sample() {
        let p = Problem::with_default_system(
            1,
            traces(&[(0.0, Side::Plus)], 1),
            vec![1.0],
            Loss::squared(),
            0.1,
        )
        .unwrap();
        let s = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(s.spline, PolySpline::polynomial(vec![1.0]).unwrap());
        assert_eq!(s.cost, 0.0);
        let o = oracle_solve(&p, 1e-2).unwrap();
        assert!(o.cost.abs() < 1e-12);
    }

    #[test]
    fn closed_form_two_samples() {
        let p = Problem::with_default_system(
            1,
            traces(&[(0.0, Side::Plus), (1.0, Side::Plus)], 1),
            vec![0.0, 2.0],
            Loss::squared(),
            0.1,
        )
        .unwrap();
        let s = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(s.knot_count, 1);
        assert_eq!(s.spline.knots()[0].location, 1.0);
        assert!((s.spline.knots()[0].weight - 1.9).abs() < 1e-12);
        assert!((s.spline.null_coeffs()[0] - 0.05).abs() < 1e-12);
        assert!((s.cost - 0.195).abs() < 1e-12);
        let o = oracle_solve(&p, 1e-3).unwrap();
        assert!((o.cost - 0.195).abs() < 1e-9, "{}", o.cost);
    }

    #[test]
    fn interpolation_single_jump() {
        let p = Problem::with_default_system(
            1,
            traces(&[(0.0, Side::Plus), (1.0, Side::Plus)], 1),
            vec![0.0, 1.0],
            Loss::Interpolation,
            0.0,
        )
        .unwrap();
        let s = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(s.knot_count, 1);
        let k = s.spline.knots()[0];
        assert!(k.location > 0.0 && k.location <= 1.0);
        assert_eq!(k.weight, 1.0);
        assert_eq!(s.cost, 1.0);
        let o = oracle_solve(&p, 1e-2).unwrap();
        assert!((o.cost - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_interpolation_is_an_error() {
        let p = Problem::with_default_system(
            1,
            traces(&[(0.0, Side::Plus), (0.0, Side::Plus)], 1),
            vec![0.0, 1.0],
            Loss::Interpolation,
            0.0,
        )
        .unwrap();
        assert_eq!(
            solve(&p, &SolveOptions::default()),
            Err(GbvError::Infeasible)
        );
        let opts = SolveOptions {
            allow_illposed: true,
            ..SolveOptions::default()
        };
        assert_eq!(solve(&p, &opts), Err(GbvError::Infeasible));
    }

    #[test]
    fn mixed_order_uses_grid() {
        let ms = vec![
            Measurement::derivative_trace(0.0, Side::Plus, 0),
            Measurement::derivative_trace(1.0, Side::Plus, 1),
        ];
        let p = Problem::with_default_system(2, ms, vec![0.0, 1.0], Loss::squared(), 0.05).unwrap();
        assert_eq!(
            solve(&p, &SolveOptions::default()),
            Err(GbvError::MixedOrder)
        );
        let opts = SolveOptions {
            grid_step: Some(0.05),
            ..SolveOptions::default()
        };
        let s = solve(&p, &opts).unwrap();
        assert!(s.report.grid_approximate);
        assert!((s.cost - p.objective(&s.spline).unwrap()).abs() == 0.0);
    }

    #[test]
    fn solution_document_round_trip() {
        let p = Problem::with_default_system(
            1,
            traces(&[(0.0, Side::Plus), (1.0, Side::Minus)], 1),
            vec![0.3, 2.0],
            Loss::squared(),
            0.1,
        )
        .unwrap();
        let s = solve(&p, &SolveOptions::default()).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Solution>(&text).unwrap(), s);
        let tampered = text.replace("\"knot_count\":1", "\"knot_count\":5");
        assert!(serde_json::from_str::<Solution>(&tampered).is_err());
    }
}
