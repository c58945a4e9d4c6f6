use serde::{Deserialize, Serialize};

use super::problem::Problem;
use crate::error::{GbvError, Result};

/// A knot position together with its activation column
/// `m -> nu_m(u_N(. - position))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateKnot {
    pub position: f64,
    pub activation: Vec<f64>,
}

/// One representative knot per activation class.
///
/// With every term at derivative order `N - 1`, `nu_m(u_N(. - tau))` is a
/// step function of `tau` that only changes at measurement abscissae, so
/// the line splits into finitely many classes of equal activation. Each
/// class is represented by the leftmost measurement abscissa it contains,
/// otherwise by its leftmost gap midpoint (or `min - 1` / `max + 1` for the
/// unbounded ends). Classes with identical columns are merged.
pub fn candidate_knots(p: &Problem) -> Result<Vec<CandidateKnot>> {
    if p.is_empty() {
        return Err(GbvError::InvalidProblem("no measurements".into()));
    }
    if !p.is_top_order() {
        return Err(GbvError::MixedOrder);
    }
    let ts = p.abscissae();
    let mut pieces: Vec<(f64, bool)> = Vec::with_capacity(2 * ts.len() + 1);
    pieces.push((ts[0] - 1.0, false));
    for (i, &t) in ts.iter().enumerate() {
        pieces.push((t, true));
        match ts.get(i + 1) {
            Some(&next) => pieces.push((0.5 * (t + next), false)),
            None => pieces.push((t + 1.0, false)),
        }
    }

    // (representative, is_abscissa, column), in order of first appearance
    let mut classes: Vec<(f64, bool, Vec<f64>)> = Vec::new();
    for (position, is_abscissa) in pieces {
        let column = p.knot_column(position);
        match classes.iter_mut().find(|(_, _, c)| *c == column) {
            Some(class) => {
                if is_abscissa && !class.1 {
                    class.0 = position;
                    class.1 = true;
                }
            }
            None => classes.push((position, is_abscissa, column)),
        }
    }
    let mut out: Vec<CandidateKnot> = classes
        .into_iter()
        .map(|(position, _, activation)| CandidateKnot {
            position,
            activation,
        })
        .collect();
    out.sort_by(|a, b| a.position.total_cmp(&b.position));
    Ok(out)
}

/// Largest candidate grid accepted by the grid-based routines.
pub const MAX_GRID_KNOTS: usize = 1_000_000;

/// Uniform grid of pitch `step` over `[min abscissa - 1, max abscissa + 1]`,
/// each point followed by a twin shifted by `step / 4`.
pub fn grid_knots(p: &Problem, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(GbvError::InvalidProblem(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let ts = p.abscissae();
    let lo = ts[0] - 1.0;
    let hi = ts[ts.len() - 1] + 1.0;
    let count = ((hi - lo) / step).floor();
    if !(count.is_finite()) || 2.0 * (count + 1.0) > MAX_GRID_KNOTS as f64 {
        return Err(GbvError::GridTooLarge(2 * (count.min(1e18) as usize + 1)));
    }
    let count = count as usize;
    let eps = 0.25 * step;
    Ok((0..=count)
        .flat_map(|i| {
            let x = lo + i as f64 * step;
            [x, x + eps]
        })
        .collect())
}
