use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::problem::{Loss, Problem};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    #[default]
    Ok,
    Warning,
    Infeasible,
    IllPosed,
}

/// Diagnostics of a problem and, once solved, of the solver run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub status: Status,
    pub lambda_positive: bool,
    pub loss_convex: bool,
    /// Indices `j` of null basis functions `p_j` annihilated by every measurement.
    pub invisible_null: Vec<usize>,
    /// Rank of the measurement matrix restricted to the null space.
    pub null_rank: usize,
    /// Pairs of proportional measurements with incompatible interpolation data.
    pub contradictions: Vec<(usize, usize)>,
    pub grid_approximate: bool,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
    #[serde(default)]
    pub method: String,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub converged: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Report {
    pub fn passed(&self) -> bool {
        matches!(self.status, Status::Ok | Status::Warning)
    }

    fn finish(&mut self) {
        self.status = if !self.contradictions.is_empty() {
            Status::Infeasible
        } else if !self.errors.is_empty() {
            Status::IllPosed
        } else if !self.warnings.is_empty() {
            Status::Warning
        } else {
            Status::Ok
        };
    }

    pub(crate) fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
        self.finish();
    }
}

/// Operational checklist run before solving: positive `lambda` for
/// penalized losses, convexity of the loss, which null-space directions the
/// measurements see, and contradictory interpolation data.
pub fn check_wellposedness(p: &Problem) -> Report {
    let mut report = Report {
        loss_convex: true,
        ..Report::default()
    };
    let n = p.order();
    let sys = p.system();

    report.lambda_positive = p.lambda() > 0.0;
    if !p.loss().is_interpolation() && !report.lambda_positive {
        report
            .errors
            .push("lambda must be positive for a penalized loss".into());
    }

    let visibility = DMatrix::from_fn(p.len(), n, |m, j| {
        let basis = sys.basis(j).expect("j below order");
        p.measurements()[m].apply(&basis).expect("orders validated")
    });
    for j in 0..n {
        if visibility.column(j).iter().all(|&v| v == 0.0) {
            report.invisible_null.push(j);
            report.warnings.push(format!(
                "null direction p_{j} is invisible to every measurement; the solution set is unbounded along it"
            ));
        }
    }
    let tol = 1e-10 * visibility.amax().max(1.0);
    report.null_rank = visibility.clone().svd(false, false).rank(tol);
    if report.null_rank + report.invisible_null.len() < n {
        report.warnings.push(format!(
            "measurements see only a rank-{} slice of the {n}-dimensional null space",
            report.null_rank
        ));
    }

    if matches!(p.loss(), Loss::Interpolation) {
        let ms = p.measurements();
        let y = p.y();
        for i in 0..ms.len() {
            for k in i + 1..ms.len() {
                if let Some(alpha) = ms[i].proportionality(&ms[k]) {
                    let expected = alpha * y[k];
                    if (y[i] - expected).abs() > 1e-12 * y[i].abs().max(expected.abs()).max(1.0) {
                        report.contradictions.push((i, k));
                        report.errors.push(format!(
                            "measurements {i} and {k} sample the same functional with conflicting data: infeasible"
                        ));
                    }
                }
            }
        }
    }

    if !p.is_top_order() {
        report.grid_approximate = true;
        report
            .warnings
            .push("mixed-order measurements: only grid-approximate solving is available".into());
    }
    report.finish();
    report
}
