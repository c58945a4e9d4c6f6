//! Randomized invariant suite, shared by `gbv check` and the test suites.
//!
//! Every check draws its cases from a ChaCha stream seeded by
//! [`CheckConfig::seed`], so a run is reproducible from `(seed, cases)`.
//! When a check fails, the smallest failing case (by number of atoms or
//! knots) is kept for display.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::measures::{
    Atom, DensityPiece, Interval, PiecewiseLinearTestFunction, Side, SignedMeasure,
};
use crate::sampling::{
    continuity_bound, tightness_witness, weakstar_counterexample, Measurement, SamplingFunctional,
    Term,
};
use crate::solver::{self, Loss, Problem, SolveOptions};
use crate::spline::{PolySpline, TraceEval};
use crate::systems::FundamentalSystem;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckConfig {
    pub seed: u64,
    pub cases: usize,
    /// Swaps the left/right convention in trace evaluations, to confirm the
    /// suite detects a broken side convention.
    #[doc(hidden)]
    pub flip_sides: bool,
}

impl CheckConfig {
    pub fn new(seed: u64, cases: usize) -> Self {
        CheckConfig {
            seed,
            cases,
            flip_sides: false,
        }
    }

    fn side(&self, side: Side) -> Side {
        if self.flip_sides {
            side.flip()
        } else {
            side
        }
    }

    fn trace(&self, f: &PolySpline, t: f64, side: Side) -> f64 {
        f.eval_trace(t, self.side(side))
    }

    fn cumulative(&self, mu: &SignedMeasure, t: f64, side: Side) -> f64 {
        mu.cumulative(t, self.side(side))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub module: &'static str,
    pub name: &'static str,
    pub cases: usize,
    /// Smallest failing case, if any.
    pub failure: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

struct Failure {
    size: usize,
    detail: String,
}

type CaseResult = Result<(), Failure>;

fn fail(size: usize, detail: impl Into<String>) -> CaseResult {
    Err(Failure {
        size,
        detail: detail.into(),
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Random generators used by the suite and by the integration tests.
pub mod gen {
    use super::*;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn weight<R: Rng>(rng: &mut R) -> f64 {
        let w: f64 = rng.random_range(0.1..2.0);
        if rng.random_bool(0.5) {
            w
        } else {
            -w
        }
    }

    /// Up to `max_atoms` atoms at distinct positions in `[lo, hi)`.
    pub fn atomic_measure<R: Rng>(
        rng: &mut R,
        lo: f64,
        hi: f64,
        max_atoms: usize,
    ) -> SignedMeasure {
        let k = rng.random_range(0..=max_atoms);
        SignedMeasure::atomic((0..k).map(|_| (rng.random_range(lo..hi), weight(rng))))
    }

    /// Atoms strictly right of `s`, within `(s, s + width]`.
    pub fn atomic_measure_right_of<R: Rng>(
        rng: &mut R,
        s: f64,
        width: f64,
        max_atoms: usize,
    ) -> SignedMeasure {
        let k = rng.random_range(1..=max_atoms.max(1));
        SignedMeasure::atomic((0..k).map(|_| {
            let off: f64 = rng.random_range(0.0..width);
            (s + (width - off), weight(rng))
        }))
    }

    /// Atoms plus up to three disjoint density pieces.
    pub fn measure<R: Rng>(rng: &mut R, lo: f64, hi: f64, max_atoms: usize) -> SignedMeasure {
        let atoms = atomic_measure(rng, lo, hi, max_atoms).atoms().to_vec();
        let pieces = rng.random_range(0..=3usize);
        let mut cuts: Vec<f64> = (0..2 * pieces).map(|_| rng.random_range(lo..hi)).collect();
        cuts.sort_by(f64::total_cmp);
        let density = cuts
            .chunks(2)
            .filter(|c| c[0] < c[1])
            .map(|c| DensityPiece::new(c[0], c[1], weight(rng)))
            .collect();
        SignedMeasure::new(atoms, density).expect("generated measure is valid")
    }

    pub fn spline<R: Rng>(
        rng: &mut R,
        order: usize,
        lo: f64,
        hi: f64,
        max_knots: usize,
    ) -> PolySpline {
        let null = (0..order).map(|_| rng.random_range(-2.0..2.0)).collect();
        let knots = atomic_measure(rng, lo, hi, max_knots).atoms().to_vec();
        PolySpline::new(order, null, knots).expect("generated spline is valid")
    }

    /// Continuous piecewise-linear test function supported in `[lo, hi]`.
    pub fn test_function<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> PiecewiseLinearTestFunction {
        let inner = rng.random_range(1..=4usize);
        let mut xs: Vec<f64> = (0..inner).map(|_| rng.random_range(lo..hi)).collect();
        xs.push(lo);
        xs.push(hi);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let n = xs.len();
        let vs = (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    0.0
                } else {
                    rng.random_range(-2.0..2.0)
                }
            })
            .collect();
        PiecewiseLinearTestFunction::new(xs, vs).expect("generated test function is valid")
    }

    /// Measurement with 1 or 2 terms of derivative order `d` at the given abscissae.
    pub fn measurement<R: Rng>(rng: &mut R, abscissae: &[f64], d: usize) -> Measurement {
        let terms = abscissae
            .iter()
            .map(|&t| Term {
                c: weight(rng),
                functional: SamplingFunctional::new(
                    t,
                    if rng.random_bool(0.5) {
                        Side::Plus
                    } else {
                        Side::Minus
                    },
                    d,
                ),
            })
            .collect();
        Measurement::new(terms).expect("nonzero coefficients")
    }

    /// `count` distinct abscissae in `[0, 3)`, pairwise at least 0.04 apart.
    pub fn abscissae<R: Rng>(rng: &mut R, count: usize) -> Vec<f64> {
        let mut slots: Vec<usize> = (0..60).collect();
        slots.shuffle(rng);
        slots.truncate(count);
        slots.sort_unstable();
        slots
            .into_iter()
            .map(|k| 0.05 * k as f64 + rng.random_range(0.0..0.01))
            .collect()
    }

    /// Problem with `1..=max_m` measurements, every term at derivative order `N - 1`.
    pub fn top_order_problem<R: Rng>(
        rng: &mut R,
        order: usize,
        max_m: usize,
        loss: Loss,
    ) -> Problem {
        let m = rng.random_range(1..=max_m);
        let two_term: Vec<bool> = (0..m).map(|_| rng.random_bool(0.2)).collect();
        let total = m + two_term.iter().filter(|&&b| b).count();
        let mut ts = abscissae(rng, total);
        ts.shuffle(rng);
        let mut it = ts.into_iter();
        let ms = two_term
            .iter()
            .map(|&two| {
                let take: Vec<f64> = it.by_ref().take(if two { 2 } else { 1 }).collect();
                measurement(rng, &take, order - 1)
            })
            .collect();
        let y = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lambda = rng.random_range(0.01..1.0);
        let loss = match loss {
            Loss::Squared { .. } => Loss::squared(),
            Loss::Interpolation => Loss::Interpolation,
        };
        Problem::with_default_system(order, ms, y, loss, lambda)
            .expect("generated problem is valid")
    }

    /// The same problem at order `order`, every term moved to derivative order `order - 1`.
    pub fn lift_to_order(p: &Problem, order: usize) -> Problem {
        let ms = p
            .measurements()
            .iter()
            .map(|m| {
                let terms = m
                    .terms()
                    .iter()
                    .map(|t| Term {
                        c: t.c,
                        functional: SamplingFunctional {
                            d: order - 1,
                            ..t.functional
                        },
                    })
                    .collect();
                Measurement::new(terms).expect("same coefficients")
            })
            .collect();
        let sys = p.system().with_order(order).expect("valid order");
        Problem::new(sys, ms, p.y().to_vec(), p.loss().clone(), p.lambda())
            .expect("lifted problem is valid")
    }
}

fn run_check(
    module: &'static str,
    name: &'static str,
    cases: usize,
    rng: &mut ChaCha8Rng,
    mut case: impl FnMut(&mut ChaCha8Rng) -> CaseResult,
) -> CheckOutcome {
    let mut worst: Option<Failure> = None;
    for _ in 0..cases {
        if let Err(f) = case(rng) {
            if worst.as_ref().is_none_or(|w| f.size < w.size) {
                worst = Some(f);
            }
        }
    }
    CheckOutcome {
        module,
        name,
        cases,
        failure: worst.map(|f| f.detail),
    }
}

fn sys(order: usize, anchor: f64) -> FundamentalSystem {
    FundamentalSystem::new(order, anchor, f64::INFINITY).expect("valid system")
}

/// Runs every module's invariants and returns one outcome per check.
pub fn run_all(cfg: &CheckConfig) -> Vec<CheckOutcome> {
    let mut rng = gen::rng(cfg.seed);
    let n = cfg.cases;
    let solver_cases = n.div_ceil(10);
    let mut out = Vec::new();

    out.push(run_check(
        "measures",
        "tv triangle inequality",
        n,
        &mut rng,
        |rng| {
            let (a, b) = (
                gen::measure(rng, -3.0, 3.0, 5),
                gen::measure(rng, -3.0, 3.0, 5),
            );
            let s = a.add(&b);
            if s.tv_norm() <= a.tv_norm() + b.tv_norm() + 1e-12 {
                Ok(())
            } else {
                fail(
                    a.atoms().len() + b.atoms().len(),
                    format!("mu = {a:?}, nu = {b:?}"),
                )
            }
        },
    ));

    out.push(run_check(
        "measures",
        "cumulative jump equals atom weight",
        n,
        &mut rng,
        |rng| {
            let mu = gen::measure(rng, -3.0, 3.0, 5);
            let mut points: Vec<f64> = mu.atoms().iter().map(|a| a.location).collect();
            points.extend((0..100).map(|_| rng.random_range(-4.0..4.0)));
            for t in points {
                let jump = cfg.cumulative(&mu, t, Side::Plus) - cfg.cumulative(&mu, t, Side::Minus);
                if !close(jump, mu.atom_weight_at(t), 1e-12) {
                    return fail(
                        mu.atoms().len(),
                        format!("mu = {mu:?}, t = {t}: jump {jump}"),
                    );
                }
            }
            Ok(())
        },
    ));

    out.push(run_check(
        "measures",
        "pairing bounded by sup |g| * tv",
        n,
        &mut rng,
        |rng| {
            let mu = gen::measure(rng, -3.0, 3.0, 5);
            let g = gen::test_function(rng, -3.0, 3.0);
            let v = g.pair(&mu);
            if v.abs() <= g.sup_abs() * mu.tv_norm() + 1e-12 {
                Ok(())
            } else {
                fail(mu.atoms().len(), format!("mu = {mu:?}, g = {g:?}: {v}"))
            }
        },
    ));

    out.push(run_check(
        "measures",
        "restriction to the line is identity",
        n,
        &mut rng,
        |rng| {
            let mu = gen::measure(rng, -3.0, 3.0, 5);
            if mu.restrict(&Interval::real_line()) == mu {
                Ok(())
            } else {
                fail(mu.atoms().len(), format!("mu = {mu:?}"))
            }
        },
    ));

    out.push(run_check(
        "spline",
        "trace jump equals knot weight",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=4);
            let f = gen::spline(rng, order, -3.0, 3.0, 5);
            let mut points: Vec<f64> = f.knots().iter().map(|k| k.location).collect();
            points.extend((0..20).map(|_| rng.random_range(-4.0..4.0)));
            for t in points {
                let jump = cfg.trace(&f, t, Side::Plus) - cfg.trace(&f, t, Side::Minus);
                let want = if order == 1 { f.knot_weight_at(t) } else { 0.0 };
                if !close(jump, want, 1e-12) {
                    return fail(
                        f.knot_count(),
                        format!("f = {f:?}, t = {t}: jump {jump}, want {want}"),
                    );
                }
            }
            Ok(())
        },
    ));

    out.push(run_check(
        "spline",
        "order-1 trace is constant plus cumulative",
        n,
        &mut rng,
        |rng| {
            let f = gen::spline(rng, 1, -3.0, 3.0, 5);
            let mu = f.derivative_measure();
            let t = match f.knots().first() {
                Some(k) if rng.random_bool(0.3) => k.location,
                _ => rng.random_range(-4.0..4.0),
            };
            let got = cfg.trace(&f, t, Side::Plus);
            let want = f.null_coeffs()[0] + mu.cumulative(t, Side::Plus);
            if close(got, want, 1e-12) {
                Ok(())
            } else {
                fail(
                    f.knot_count(),
                    format!("f = {f:?}, t = {t}: {got} vs {want}"),
                )
            }
        },
    ));

    out.push(run_check(
        "spline",
        "norm vanishes only at zero",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=4);
            let s = sys(order, -4.0);
            let f = if rng.random_bool(0.2) {
                PolySpline::zero(order).unwrap()
            } else {
                gen::spline(rng, order, -3.0, 3.0, 4)
            };
            let norm = f.gbv_norm(&s).unwrap();
            if (norm == 0.0) == f.is_zero() {
                Ok(())
            } else {
                fail(f.knot_count(), format!("f = {f:?}: norm {norm}"))
            }
        },
    ));

    out.push(run_check(
        "spline",
        "norm triangle inequality and homogeneity",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=4);
            let s = sys(order, -4.0);
            let f = gen::spline(rng, order, -3.0, 3.0, 4);
            let g = gen::spline(rng, order, -3.0, 3.0, 4);
            let alpha = rng.random_range(-3.0..3.0);
            let (nf, ng) = (f.gbv_norm(&s).unwrap(), g.gbv_norm(&s).unwrap());
            let nsum = f.add(&g).unwrap().gbv_norm(&s).unwrap();
            let nscaled = f.scale(alpha).gbv_norm(&s).unwrap();
            let tol = 1e-10 * (1.0 + nf + ng);
            if nsum <= nf + ng + tol && close(nscaled, alpha.abs() * nf, tol * (1.0 + alpha.abs()))
            {
                Ok(())
            } else {
                fail(
                    f.knot_count() + g.knot_count(),
                    format!("f = {f:?}, g = {g:?}, alpha = {alpha}"),
                )
            }
        },
    ));

    out.push(run_check(
        "spline",
        "generalized trace with d = 0 is the trace",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=4);
            let f = gen::spline(rng, order, -3.0, 3.0, 4);
            for _ in 0..20 {
                let t = rng.random_range(-4.0..4.0);
                for side in Side::BOTH {
                    if f.generalized_trace(t, side, 0).unwrap() != f.eval_trace(t, side) {
                        return fail(f.knot_count(), format!("f = {f:?}, t = {t}"));
                    }
                }
            }
            Ok(())
        },
    ));

    out.push(run_check(
        "systems",
        "right-inverse reproduces the measure",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=4);
            let s = sys(order, -1.0);
            let mu = gen::atomic_measure(rng, -1.0, 4.0, 6);
            let g = s.right_inverse(&mu).unwrap();
            let back = g.derivative_measure();
            let ok = back.atoms().len() == mu.atoms().len()
                && back
                    .atoms()
                    .iter()
                    .zip(mu.atoms())
                    .all(|(a, b)| a.location == b.location && close(a.weight, b.weight, 1e-12));
            if ok {
                Ok(())
            } else {
                fail(mu.atoms().len(), format!("N = {order}, mu = {mu:?}"))
            }
        },
    ));

    out.push(run_check(
        "systems",
        "right-inverse is annihilated by the duals",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=4);
            let s = sys(order, -1.0);
            let mu = gen::atomic_measure(rng, -1.0, 4.0, 6);
            let g = s.right_inverse(&mu).unwrap();
            match s.jet(&g).unwrap().iter().find(|c| c.abs() > 1e-12) {
                None => Ok(()),
                Some(c) => fail(
                    mu.atoms().len(),
                    format!("N = {order}, mu = {mu:?}: jet entry {c}"),
                ),
            }
        },
    ));

    out.push(run_check(
        "systems",
        "f = right-inverse(D^N f) + P f",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=3);
            let s = sys(order, -1.0);
            let f = gen::spline(rng, order, -1.0, 3.0, 5);
            let g = s
                .right_inverse(&f.derivative_measure())
                .unwrap()
                .add(&s.project_null(&f).unwrap())
                .unwrap();
            for _ in 0..100 {
                let t = rng.random_range(-1.0..4.0);
                let side = if rng.random_bool(0.5) {
                    Side::Plus
                } else {
                    Side::Minus
                };
                if !close(f.eval_trace(t, side), g.eval_trace(t, side), 1e-10) {
                    return fail(f.knot_count(), format!("f = {f:?}, t = {t} {side}"));
                }
            }
            Ok(())
        },
    ));

    out.push(run_check(
        "systems",
        "projector is idempotent",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=4);
            let s = sys(order, rng.random_range(-3.0..0.0));
            let f = gen::spline(rng, order, -1.0, 3.0, 5);
            let p1 = s.project_null(&f).unwrap();
            if s.project_null(&p1).unwrap() == p1 {
                Ok(())
            } else {
                fail(f.knot_count(), format!("f = {f:?}"))
            }
        },
    ));

    out.push(run_check(
        "systems",
        "biorthogonality matrix is the identity",
        n.min(1),
        &mut rng,
        |rng| {
            for order in 1..=6 {
                let a = rng.random_range(-5.0..5.0);
                let m = sys(order, a).biorthogonality_matrix();
                for (i, row) in m.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        if v != if i == j { 1.0 } else { 0.0 } {
                            return fail(
                                order,
                                format!("N = {order}, anchor {a}: entry ({i}, {j}) = {v}"),
                            );
                        }
                    }
                }
            }
            Ok(())
        },
    ));

    out.push(run_check("systems", "causality", n, &mut rng, |rng| {
        let order = rng.random_range(1..=4);
        let s = sys(order, -1.0);
        let start = -1.0
            + if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(0.0..2.0)
            };
        let mu = gen::atomic_measure_right_of(rng, start, 3.0, 5);
        let g = s.right_inverse(&mu).unwrap();
        for _ in 0..20 {
            let t = start - rng.random_range(1e-6..3.0);
            for side in Side::BOTH {
                let v = cfg.trace(&g, t, side);
                if v.abs() > 1e-12 {
                    return fail(
                        mu.atoms().len(),
                        format!("N = {order}, mu = {mu:?}, t = {t}: {v}"),
                    );
                }
            }
        }
        Ok(())
    }));

    out.push(run_check(
        "systems",
        "locality on nested intervals",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=4);
            let outer = sys(order, -1.0);
            let a2 = rng.random_range(-0.5..1.0);
            let b2 = a2 + rng.random_range(0.5..2.0);
            let inner = FundamentalSystem::new(order, a2, b2).unwrap();
            let mu = gen::atomic_measure(rng, -1.0, 4.0, 6);
            let global = outer.right_inverse(&mu).unwrap();
            let local = inner.right_inverse(&mu.restrict(inner.interval())).unwrap();
            let diff = global.sub(&local).unwrap();
            let poly = inner.project_null(&diff).unwrap();
            for _ in 0..20 {
                let t = rng.random_range(a2..b2);
                for side in Side::BOTH {
                    if !close(diff.eval_trace(t, side), poly.eval_trace(t, side), 1e-10) {
                        return fail(
                            mu.atoms().len(),
                            format!("N = {order}, mu = {mu:?}, K' = [{a2}, {b2}], t = {t}"),
                        );
                    }
                }
            }
            Ok(())
        },
    ));

    out.push(run_check(
        "systems",
        "local shift invariance of the kernel",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=4);
            let s = sys(order, -1.0);
            let tau = rng.random_range(-0.99..3.0);
            let h = rng.random_range(0.0..2.0);
            let t = rng.random_range(-2.0..5.0);
            for side in Side::BOTH {
                let (k0, k1) = (s.kernel(t, tau, side), s.kernel(t + h, tau + h, side));
                if !close(k0, k1, 1e-9 * (1.0 + k0.abs())) {
                    return fail(
                        order,
                        format!("N = {order}, t = {t}, tau = {tau}, h = {h}: {k0} vs {k1}"),
                    );
                }
            }
            Ok(())
        },
    ));

    out.push(run_check(
        "sampling",
        "continuity bound is sound",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=4);
            let s = sys(order, -1.0);
            let k = rng.random_range(1..=3);
            let ts: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..4.0)).collect();
            let m = gen::measurement(rng, &ts, order - 1);
            let f = gen::spline(rng, order, -3.0, 4.0, 5);
            let v = m.apply(&f).unwrap().abs();
            let bound = continuity_bound(&m, &s).unwrap() * f.gbv_norm(&s).unwrap();
            if v <= bound * (1.0 + 1e-12) + 1e-12 {
                Ok(())
            } else {
                fail(
                    f.knot_count(),
                    format!("m = {m:?}, f = {f:?}: {v} > {bound}"),
                )
            }
        },
    ));

    out.push(run_check(
        "sampling",
        "tightness witness attains the bound",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=4);
            let s = sys(order, -1.0);
            let t = if rng.random_bool(0.2) {
                -1.0
            } else {
                rng.random_range(-1.0..4.0)
            };
            let side = if rng.random_bool(0.5) {
                Side::Plus
            } else {
                Side::Minus
            };
            let func = SamplingFunctional::new(t, side, order - 1);
            let f = tightness_witness(&func, &s).unwrap();
            let c = continuity_bound(&Measurement::single(1.0, func).unwrap(), &s).unwrap();
            let ratio = func.apply(&f).unwrap().abs() / f.gbv_norm(&s).unwrap();
            if c == 1.0 && ratio >= 0.99 * c {
                Ok(())
            } else {
                fail(
                    order,
                    format!("N = {order}, t = {t} {side}: C = {c}, ratio {ratio}"),
                )
            }
        },
    ));

    out.push(run_check(
        "sampling",
        "measurements are linear",
        n,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=4);
            let ts: Vec<f64> = (0..rng.random_range(1..=3))
                .map(|_| rng.random_range(-1.0..4.0))
                .collect();
            let d = rng.random_range(0..order);
            let m = gen::measurement(rng, &ts, d);
            let f = gen::spline(rng, order, -1.0, 4.0, 4);
            let g = gen::spline(rng, order, -1.0, 4.0, 4);
            let (alpha, beta) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let combo = f.scale(alpha).add(&g.scale(beta)).unwrap();
            let lhs = m.apply(&combo).unwrap();
            let rhs = alpha * m.apply(&f).unwrap() + beta * m.apply(&g).unwrap();
            if close(lhs, rhs, 1e-12 * (1.0 + lhs.abs())) {
                Ok(())
            } else {
                fail(
                    f.knot_count() + g.knot_count(),
                    format!("m = {m:?}: {lhs} vs {rhs}"),
                )
            }
        },
    ));

    out.push(run_check(
        "sampling",
        "weak* counterexample",
        n.min(1),
        &mut rng,
        |_| {
            let g = PiecewiseLinearTestFunction::unit_hat();
            let s = sys(1, -1.0);
            let mut last = f64::INFINITY;
            for k in 1..=(n.max(1) as u64) {
                let w = weakstar_counterexample(k, &g, &s).unwrap();
                let probe = SignedMeasure::atomic([(0.0, 1.0), (1.0 / k as f64, -1.0)]);
                let trace = PolySpline::new(1, vec![0.0], probe.atoms().to_vec()).unwrap();
                let trace = cfg.trace(&trace, 0.0, Side::Plus);
                if !(w.pairing < last
                    && w.pairing == 1.0 / k as f64
                    && trace == 1.0
                    && w.jet == [0.0])
                {
                    return fail(k as usize, format!("n = {k}: {w:?}, trace {trace}"));
                }
                last = w.pairing;
            }
            Ok(())
        },
    ));

    out.push(run_check(
        "solver",
        "stored cost matches re-evaluation",
        solver_cases,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=3);
            let loss = if rng.random_bool(0.5) {
                Loss::squared()
            } else {
                Loss::Interpolation
            };
            let p = gen::top_order_problem(rng, order, 6, loss);
            let s = match solver::solve(
                &p,
                &SolveOptions {
                    allow_illposed: true,
                    ..SolveOptions::default()
                },
            ) {
                Ok(s) => s,
                Err(e) => return fail(p.len(), format!("{p:?}: {e}")),
            };
            let again = p.objective(&s.spline).unwrap();
            if close(again, s.cost, 1e-12) {
                Ok(())
            } else {
                fail(p.len(), format!("{p:?}: {} vs {again}", s.cost))
            }
        },
    ));

    out.push(run_check(
        "solver",
        "interpolation solutions have at most M knots",
        solver_cases,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=3);
            let p = gen::top_order_problem(rng, order, 6, Loss::Interpolation);
            let opts = SolveOptions {
                allow_illposed: true,
                ..SolveOptions::default()
            };
            match solver::solve(&p, &opts) {
                Ok(s) if s.knot_count <= p.len() => Ok(()),
                Ok(s) => fail(p.len(), format!("{p:?}: {} knots", s.knot_count)),
                Err(e) => fail(p.len(), format!("{p:?}: {e}")),
            }
        },
    ));

    out.push(run_check(
        "solver",
        "solves are deterministic",
        solver_cases,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=3);
            let p = gen::top_order_problem(rng, order, 6, Loss::squared());
            let opts = SolveOptions {
                seed: 7,
                allow_illposed: true,
                ..SolveOptions::default()
            };
            let (a, b) = (solver::solve(&p, &opts), solver::solve(&p, &opts));
            let same = match (&a, &b) {
                (Ok(a), Ok(b)) => {
                    serde_json::to_string(a).unwrap() == serde_json::to_string(b).unwrap()
                }
                _ => a == b,
            };
            if same {
                Ok(())
            } else {
                fail(p.len(), format!("{p:?}"))
            }
        },
    ));

    out.push(run_check(
        "solver",
        "order reduction",
        solver_cases,
        &mut rng,
        |rng| {
            let base = gen::top_order_problem(rng, 1, 5, Loss::squared());
            let order = rng.random_range(2..=3);
            let lifted = gen::lift_to_order(&base, order);
            let opts = SolveOptions {
                allow_illposed: true,
                ..SolveOptions::default()
            };
            let (a, b) = (
                solver::solve(&base, &opts).unwrap(),
                solver::solve(&lifted, &opts).unwrap(),
            );
            if knots_match(a.spline.knots(), b.spline.knots(), 1e-9) {
                Ok(())
            } else {
                fail(base.len(), format!("{base:?} at order {order}"))
            }
        },
    ));

    out.push(run_check(
        "solver",
        "exact reduction beats the grid oracle",
        solver_cases,
        &mut rng,
        |rng| {
            let order = rng.random_range(1..=3);
            let p = gen::top_order_problem(rng, order, 4, Loss::squared());
            let opts = SolveOptions {
                allow_illposed: true,
                ..SolveOptions::default()
            };
            let exact = solver::solve(&p, &opts).unwrap().cost;
            let oracle = solver::oracle_solve(&p, 1e-2).unwrap().cost;
            if exact <= oracle + 1e-9 {
                Ok(())
            } else {
                fail(p.len(), format!("{p:?}: exact {exact}, oracle {oracle}"))
            }
        },
    ));

    out
}

/// Same locations, weights within `tol`.
pub fn knots_match(a: &[Atom], b: &[Atom], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.location == y.location && close(x.weight, y.weight, tol))
}
