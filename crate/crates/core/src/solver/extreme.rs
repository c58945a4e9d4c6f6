use nalgebra::DVector;

use super::problem::{solve_support, Design, Loss, Problem};
use super::{candidate_knots, solve, Report, Solution, SolveOptions};
use crate::error::{GbvError, Result};

/// Largest measurement count accepted by the enumerator.
pub const MAX_MEASUREMENTS: usize = 4;
/// Largest (deduplicated) candidate count accepted by the enumerator.
pub const MAX_CANDIDATES: usize = 16;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtremeOptions {
    /// Largest knot support searched; defaults to the number of measurements.
    pub max_support: Option<usize>,
    pub solve: SolveOptions,
}

/// Extreme points of the solution set over the exact candidate knots.
pub fn enumerate_extreme_points(p: &Problem, opts: &ExtremeOptions) -> Result<Vec<Solution>> {
    let knots: Vec<f64> = candidate_knots(p)?
        .into_iter()
        .map(|c| c.position)
        .collect();
    enumerate_extreme_points_with(p, &knots, opts)
}

/// Extreme points of the solution set restricted to the given knot positions.
///
/// The solution set is `{f : nu(f) = y_hat, ||D^N f||_M = optimum}` where
/// `y_hat` is the data (interpolation) or the unique optimal measurement
/// vector (squared loss). Its vertices are the feasible points whose knot
/// columns, together with the visible null-space columns, are linearly
/// independent; they are found by exhaustive search over supports. Knots
/// with identical columns are merged first. Null directions the
/// measurements cannot see are fixed at 0.
pub fn enumerate_extreme_points_with(
    p: &Problem,
    knots: &[f64],
    opts: &ExtremeOptions,
) -> Result<Vec<Solution>> {
    let m = p.len();
    if m > MAX_MEASUREMENTS {
        return Err(GbvError::ScaleGuard(format!(
            "{m} measurements, at most {MAX_MEASUREMENTS} supported"
        )));
    }
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut unique = Vec::new();
    for &tau in knots {
        let col = p.knot_column(tau);
        if !columns.contains(&col) {
            columns.push(col);
            unique.push(tau);
        }
    }
    if unique.len() > MAX_CANDIDATES {
        return Err(GbvError::ScaleGuard(format!(
            "{} distinct candidates, at most {MAX_CANDIDATES} supported",
            unique.len()
        )));
    }

    let (target, mut report) = match p.loss() {
        Loss::Interpolation => (p.y().to_vec(), super::wellposed_or_fail(p, &opts.solve)?),
        Loss::Squared { .. } => {
            let s = solve(p, &opts.solve)?;
            let y_hat = p.y().iter().zip(&s.residuals).map(|(y, r)| y + r).collect();
            (y_hat, s.report)
        }
    };
    report.method = "extreme-point-enumeration".into();
    report.iterations = 0;

    let design = Design::new(p, unique);
    let nn = design.n_null();
    let max_support = opts.max_support.unwrap_or(m).min(m.saturating_sub(nn));
    let y = DVector::from_column_slice(&target);
    let scale = 1.0 + y.amax();

    let mut vertices: Vec<(f64, DVector<f64>)> = Vec::new();
    for size in 0..=max_support {
        for support in combinations(design.knots.len(), size) {
            let cols: Vec<usize> = (0..nn).chain(support.iter().map(|k| nn + k)).collect();
            let sub = design.matrix.select_columns(cols.iter());
            if !cols.is_empty() {
                let sv = sub.clone().svd(false, false).singular_values;
                if sv.min() <= 1e-10 * sv.max().max(1e-300) {
                    continue;
                }
            }
            let Some(z) = solve_support(&sub, &y) else {
                continue;
            };
            let fitted = if cols.is_empty() {
                DVector::zeros(m)
            } else {
                &sub * &z
            };
            if (&fitted - &y).amax() > 1e-9 * scale {
                continue;
            }
            if z.rows(nn, size).iter().any(|&a| a.abs() <= 1e-12 * scale) {
                continue;
            }
            let mut x = DVector::zeros(design.n_vars());
            for (i, &k) in cols.iter().enumerate() {
                x[k] = z[i];
            }
            let tv: f64 = z.rows(nn, size).iter().map(|a| a.abs()).sum();
            vertices.push((tv, x));
        }
    }
    let Some(best) = vertices.iter().map(|v| v.0).min_by(f64::total_cmp) else {
        return Err(GbvError::Infeasible);
    };
    let cut = best + 1e-9 * best.max(1.0);
    vertices
        .into_iter()
        .filter(|(tv, _)| *tv <= cut)
        .map(|(_, x)| {
            let spline = design.spline(&x, 0.0)?;
            Solution::from_spline(
                p,
                spline,
                Report {
                    converged: true,
                    ..report.clone()
                },
            )
        })
        .collect()
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}
