//! Dense two-phase simplex for `min c.x  s.t.  A x = b, x >= 0`.
//!
//! Sized for the desk-scale programs of the interpolation path (a handful of
//! rows). Bland's rule keeps it finite on the degenerate programs that
//! duplicated activation columns produce.

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpError {
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub objective: f64,
}

const PIVOT_EPS: f64 = 1e-12;

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        self.rhs[r] /= p;
        self.rows[r][c] = 1.0;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f != 0.0 {
                for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.rows[i][c] = 0.0;
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        self.basis[r] = c;
    }

    /// Runs simplex on costs `cost` over columns `< active`.
    fn optimize(&mut self, cost: &[f64], active: usize, max_iter: usize) -> Result<(), LpError> {
        let tol = 1e-11 * (1.0 + cost.iter().fold(0.0f64, |m, c| m.max(c.abs())));
        for _ in 0..max_iter {
            // reduced costs: c_j - c_B^T B^{-1} A_j
            let entering = (0..active).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .zip(&self.rows)
                        .map(|(&bi, row)| cost[bi] * row[j])
                        .sum::<f64>();
                reduced < -tol
            });
            let Some(c) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[c] > PIVOT_EPS {
                    let ratio = self.rhs[i] / row[c];
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-15
                                || (ratio <= lr + 1e-15 && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, c);
        }
        Err(LpError::IterationLimit)
    }
}

/// Solves `min c.x` subject to `A x = b`, `x >= 0`. `a` is given row-major.
pub(crate) fn solve_lp(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution, LpError> {
    let m = a.len();
    let n = c.len();
    let max_iter = 50 * (m + n + 10);
    // flip rows so that b >= 0, then append one artificial per row
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (i, (row, &bi)) in a.iter().zip(b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut r: Vec<f64> = row.iter().map(|v| sign * v).collect();
        r.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        rows.push(r);
        rhs.push(sign * bi);
    }
    let mut t = Tableau {
        rows,
        rhs,
        basis: (n..n + m).collect(),
    };

    let phase1: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    t.optimize(&phase1, n + m, max_iter)?;
    let infeasibility: f64 = t
        .basis
        .iter()
        .zip(&t.rhs)
        .filter(|(&bi, _)| bi >= n)
        .map(|(_, v)| *v)
        .sum();
    let scale = 1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if infeasibility > 1e-9 * scale {
        return Err(LpError::Infeasible);
    }

    // drive remaining artificials out of the basis; drop redundant rows
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| t.rows[i][j].abs() > 1e-9 && !t.basis.contains(&j)) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.rhs.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let mut cost2 = c.to_vec();
    cost2.extend(std::iter::repeat_n(0.0, m));
    t.optimize(&cost2, n, max_iter)?;

    let mut x = vec![0.0; n];
    for (&bi, &v) in t.basis.iter().zip(&t.rhs) {
        if bi < n {
            x[bi] = v.max(0.0);
        }
    }
    let objective = x.iter().zip(c).map(|(x, c)| x * c).sum();
    Ok(LpSolution { x, objective })
}
