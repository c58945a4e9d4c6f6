use std::path::Path;

use anyhow::Context;
use gbv::{PolySpline, Problem, Side, TraceEval};

/// Rows of the uniform part of the trace table.
pub const GRID_ROWS: usize = 1000;

/// Shortest representation that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    // -0 carries no information in a trace table
    format!("{}", v + 0.0)
}

/// Sample abscissae: a uniform grid over `[min - 1, max + 1]` of the problem
/// abscissae plus one row per knot and abscissa, sorted and deduplicated.
pub fn sample_points(problem: &Problem, f: &PolySpline) -> Vec<f64> {
    let abscissae = problem.abscissae();
    let lo = abscissae.first().copied().unwrap_or(0.0) - 1.0;
    let hi = abscissae.last().copied().unwrap_or(0.0) + 1.0;
    let step = (hi - lo) / (GRID_ROWS - 1) as f64;
    let mut ts: Vec<f64> = (0..GRID_ROWS)
        .map(|i| {
            if i == GRID_ROWS - 1 {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect();
    ts.extend(abscissae);
    ts.extend(f.knots().iter().map(|k| k.location));
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

pub fn write_trace_table(path: &Path, problem: &Problem, f: &PolySpline) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["t", "f_minus", "f_plus", "dtop_minus", "dtop_plus"])?;
    let top = f.order() - 1;
    for t in sample_points(problem, f) {
        let row = [
            num(t),
            num(f.eval_trace(t, Side::Minus)),
            num(f.eval_trace(t, Side::Plus)),
            num(f.generalized_trace(t, Side::Minus, top)?),
            num(f.generalized_trace(t, Side::Plus, top)?),
        ];
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
