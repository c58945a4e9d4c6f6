//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use gbv::checks::gen;
use gbv::sampling::{continuity_bound, tightness_witness};
use gbv::solver::{self, enumerate_extreme_points, ExtremeOptions, Report, Status};
use gbv::{
    FundamentalSystem, Loss, Measurement, PolySpline, Problem, SamplingFunctional, Side,
    SignedMeasure, Solution, SolveOptions, Term,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sys(order: usize, anchor: f64) -> FundamentalSystem {
    FundamentalSystem::new(order, anchor, f64::INFINITY).unwrap()
}

fn side<R: Rng>(rng: &mut R) -> Side {
    if rng.random_bool(0.5) {
        Side::Plus
    } else {
        Side::Minus
    }
}

fn right_inverse_identity() -> Verdict {
    let start = Instant::now();
    let mut rng = gen::rng(1);
    for order in 1..=4 {
        let s = sys(order, -1.0);
        for _ in 0..1000 {
            let mu = gen::atomic_measure(&mut rng, -1.0, 5.0, 8);
            let back = s
                .right_inverse(&mu)
                .map_err(|e| e.to_string())?
                .derivative_measure();
            ensure(back.atoms().len() == mu.atoms().len(), || {
                format!("N = {order}, mu = {mu:?}: {back:?}")
            })?;
            for (a, b) in back.atoms().iter().zip(mu.atoms()) {
                ensure(
                    a.location == b.location && (a.weight - b.weight).abs() <= 1e-12,
                    || format!("N = {order}, mu = {mu:?}: {back:?}"),
                )?;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed <= Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("4000 measures in {elapsed:.2?}"))
}

fn canonical_decomposition() -> Verdict {
    let mut rng = gen::rng(2);
    let mut worst = 0.0f64;
    for order in 1..=3 {
        let s = sys(order, -1.0);
        for _ in 0..200 {
            let f = gen::spline(&mut rng, order, -1.0, 4.0, 6);
            let g = s
                .right_inverse(&f.derivative_measure())
                .unwrap()
                .add(&s.project_null(&f).unwrap())
                .unwrap();
            for _ in 0..100 {
                let t = rng.random_range(-1.0..5.0);
                let sd = side(&mut rng);
                worst = worst.max((f.eval_trace(t, sd) - g.eval_trace(t, sd)).abs());
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max error {worst:e}"))?;
    Ok(format!("600 splines, max error {worst:e}"))
}

fn biorthogonality() -> Verdict {
    for order in 1..=6 {
        for anchor in [-3.5, -1.0, 0.0, 0.25, 7.0] {
            let m = sys(order, anchor).biorthogonality_matrix();
            for (i, row) in m.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    ensure(v == want, || {
                        format!("N = {order}, anchor {anchor}: ({i}, {j}) = {v}")
                    })?;
                }
            }
        }
    }
    Ok("exact identity for N = 1..6".into())
}

fn causality_and_locality() -> Verdict {
    let mut rng = gen::rng(4);
    let anchor = -1.0;
    let (mut worst_c, mut worst_l) = (0.0f64, 0.0f64);
    for i in 0..500 {
        let order = 1 + i % 4;
        let s = sys(order, anchor);
        let start = anchor
            + if i % 5 == 0 {
                0.0
            } else {
                rng.random_range(0.0..3.0)
            };
        let mut mu = gen::atomic_measure_right_of(&mut rng, start, 3.0, 6);
        if start > anchor && rng.random_bool(0.5) {
            mu = mu.add(&SignedMeasure::atomic([(start, 1.0)]));
        }
        let g = s.right_inverse(&mu).unwrap();
        for _ in 0..20 {
            let t = start - rng.random_range(1e-9..3.0);
            for sd in Side::BOTH {
                worst_c = worst_c.max(g.eval_trace(t, sd).abs());
            }
        }

        let a2 = rng.random_range(anchor..2.0);
        let inner = FundamentalSystem::new(order, a2, a2 + rng.random_range(0.5..3.0)).unwrap();
        let wide = gen::atomic_measure(&mut rng, anchor, 5.0, 6);
        let global = s.right_inverse(&wide).unwrap();
        let local = inner
            .right_inverse(&wide.restrict(inner.interval()))
            .unwrap();
        let diff = global.sub(&local).unwrap();
        let poly = inner.project_null(&diff).unwrap();
        for _ in 0..20 {
            let t = rng.random_range(a2..inner.interval().hi());
            for sd in Side::BOTH {
                worst_l = worst_l.max((diff.eval_trace(t, sd) - poly.eval_trace(t, sd)).abs());
            }
        }
    }
    ensure(worst_c <= 1e-12, || {
        format!("causality residual {worst_c:e}")
    })?;
    ensure(worst_l <= 1e-10, || {
        format!("locality residual {worst_l:e}")
    })?;
    Ok(format!(
        "500 measures, causality {worst_c:e}, locality {worst_l:e}"
    ))
}

fn continuity_bound_criterion() -> Verdict {
    let mut rng = gen::rng(5);
    let anchor = -1.0;
    let mut tightest = 0.0f64;
    for _ in 0..10_000 {
        let order = rng.random_range(1..=4);
        let s = sys(order, anchor);
        let k = rng.random_range(1..=3);
        let ts: Vec<f64> = (0..k).map(|_| rng.random_range(anchor..4.0)).collect();
        let m = gen::measurement(&mut rng, &ts, order - 1);
        let f = gen::spline(&mut rng, order, -3.0, 5.0, 6);
        let v = m.apply(&f).unwrap().abs();
        let bound = continuity_bound(&m, &s).unwrap() * f.gbv_norm(&s).unwrap();
        ensure(v <= bound * (1.0 + 1e-12), || {
            format!("m = {m:?}, f = {f:?}: {v} > {bound}")
        })?;
        tightest = tightest.max(v / bound);

        let t = if rng.random_bool(0.1) {
            anchor
        } else {
            rng.random_range(anchor..4.0)
        };
        let func = SamplingFunctional::new(t, side(&mut rng), order - 1);
        let c = continuity_bound(&Measurement::single(1.0, func).unwrap(), &s).unwrap();
        ensure(c == 1.0, || format!("N = {order}, {func:?}: C = {c}"))?;
        let w = tightness_witness(&func, &s).unwrap();
        let ratio = func.apply(&w).unwrap().abs() / w.gbv_norm(&s).unwrap();
        ensure(ratio >= 0.99, || {
            format!("N = {order}, {func:?}: witness ratio {ratio}")
        })?;
    }
    Ok(format!(
        "10^4 pairs, largest |m(f)| / bound = {tightest:.6}"
    ))
}

fn weakstar_demo() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("weakstar.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_gbv"))
        .args(["demo-weakstar", "--n-max", "1000", "--out"])
        .arg(&out)
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.code() == Some(0), || format!("exit status {status}"))?;
    let mut reader = csv::Reader::from_path(&out).map_err(|e| e.to_string())?;
    ensure(
        reader.headers().unwrap() == vec!["n", "pairing_hat", "trace_plus_at_0", "jet0"],
        || "unexpected header".into(),
    )?;
    let mut rows = 0u64;
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        rows += 1;
        let n: u64 = rec[0].parse().unwrap();
        let [pairing, trace, jet] = [1, 2, 3].map(|i| rec[i].parse::<f64>().unwrap());
        let exact = 1.0 / n as f64;
        ensure(n == rows, || format!("row {rows} has n = {n}"))?;
        ensure((pairing - exact).abs() <= 1e-15 * exact, || {
            format!("n = {n}: pairing {pairing}")
        })?;
        ensure(trace == 1.0 && jet == 0.0, || {
            format!("n = {n}: trace {trace}, jet {jet}")
        })?;
    }
    ensure(rows == 1000, || format!("{rows} rows"))?;
    Ok("n = 1..1000: pairing 1/n, trace 1, jet 0".into())
}

fn solver_vs_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = gen::rng(7);
    let (mut worst_gap, mut worst_rel) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..50 {
        let order = rng.random_range(1..=3);
        let p = gen::top_order_problem(&mut rng, order, 6, Loss::squared());
        let opts = SolveOptions {
            allow_illposed: true,
            ..SolveOptions::default()
        };
        let exact = solver::solve(&p, &opts)
            .map_err(|e| format!("{p:?}: {e}"))?
            .cost;
        let oracle = solver::oracle_solve(&p, 1e-3)
            .map_err(|e| format!("{p:?}: {e}"))?
            .cost;
        ensure(exact <= oracle + 1e-9, || {
            format!("{p:?}: exact {exact} > oracle {oracle}")
        })?;
        ensure(oracle <= exact * (1.0 + 1e-2), || {
            format!("{p:?}: oracle {oracle} vs exact {exact}")
        })?;
        worst_gap = worst_gap.max(exact - oracle);
        worst_rel = worst_rel.max((oracle - exact) / exact);
    }
    let elapsed = start.elapsed();
    ensure(elapsed <= Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "50 problems in {elapsed:.2?}, max exact - oracle {worst_gap:e}, max relative oracle excess {worst_rel:e}"
    ))
}

fn closed_form() -> Verdict {
    let p = Problem::with_default_system(
        1,
        vec![
            Measurement::trace(0.0, Side::Plus),
            Measurement::trace(1.0, Side::Plus),
        ],
        vec![0.0, 2.0],
        Loss::squared(),
        0.1,
    )
    .unwrap();
    let s = solver::solve(&p, &SolveOptions::default()).map_err(|e| e.to_string())?;
    let knots = s.spline.knots();
    ensure(knots.len() == 1, || format!("knots {knots:?}"))?;
    let (w, c0) = (knots[0].weight, s.spline.null_coeffs()[0]);
    ensure((w - 1.9).abs() <= 1e-9, || format!("weight {w}"))?;
    ensure((c0 - 0.05).abs() <= 1e-9, || {
        format!("null coefficient {c0}")
    })?;
    ensure((s.cost - 0.195).abs() <= 1e-9, || {
        format!("cost {}", s.cost)
    })?;
    Ok(format!(
        "weight {w}, null coefficient {c0}, cost {}",
        s.cost
    ))
}

fn midpoint(a: &PolySpline, b: &PolySpline) -> PolySpline {
    a.add(b).unwrap().scale(0.5)
}

/// `f(3) - f(0) = 1`, `f(1) - f(0) - f(3) + f(2) = 0`: a single jump in
/// `(1, 2]` ties with two half jumps in `(0, 1]` and `(2, 3]`.
fn tied_problem() -> Problem {
    let diff = |pairs: &[(f64, f64)]| {
        let terms = pairs
            .iter()
            .map(|&(c, t)| Term {
                c,
                functional: SamplingFunctional::trace(t, Side::Plus),
            })
            .collect();
        Measurement::new(terms).unwrap()
    };
    let ms = vec![
        diff(&[(1.0, 3.0), (-1.0, 0.0)]),
        diff(&[(1.0, 1.0), (-1.0, 0.0), (-1.0, 3.0), (1.0, 2.0)]),
    ];
    Problem::with_default_system(1, ms, vec![1.0, 0.0], Loss::Interpolation, 0.0).unwrap()
}

fn extreme_points() -> Verdict {
    let mut rng = gen::rng(9);
    let mut problems: Vec<Problem> = (0..20)
        .map(|_| {
            let order = rng.random_range(1..=2);
            gen::top_order_problem(&mut rng, order, 3, Loss::Interpolation)
        })
        .collect();
    problems.push(tied_problem());
    let (mut total, mut pairs) = (0, 0);
    for p in &problems {
        let opts = ExtremeOptions {
            solve: SolveOptions {
                allow_illposed: true,
                ..SolveOptions::default()
            },
            ..Default::default()
        };
        let best = solver::solve(p, &opts.solve)
            .map_err(|e| format!("{p:?}: {e}"))?
            .cost;
        let pts = enumerate_extreme_points(p, &opts).map_err(|e| format!("{p:?}: {e}"))?;
        ensure(!pts.is_empty(), || format!("{p:?}: no extreme points"))?;
        total += pts.len();
        for s in &pts {
            ensure(s.knot_count <= p.len(), || {
                format!("{p:?}: {} knots", s.knot_count)
            })?;
            ensure((s.cost - best).abs() <= 1e-9, || {
                format!("{p:?}: TV {} vs {best}", s.cost)
            })?;
        }
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                pairs += 1;
                let mid = midpoint(&a.spline, &b.spline);
                let resid = p
                    .residuals(&mid)
                    .unwrap()
                    .iter()
                    .fold(0.0f64, |m, r| m.max(r.abs()));
                let tv = p.objective(&mid).unwrap();
                ensure(resid <= 1e-9 && (tv - best).abs() <= 1e-9, || {
                    format!("{p:?}: midpoint residual {resid}, TV {tv} vs {best}")
                })?;
            }
        }
    }
    ensure(pairs > 0, || "no problem had two extreme points".into())?;
    Ok(format!(
        "20 random problems and one tie, {total} extreme points, {pairs} midpoints checked"
    ))
}

fn order_reduction() -> Verdict {
    let mut rng = gen::rng(10);
    let opts = SolveOptions {
        allow_illposed: true,
        ..SolveOptions::default()
    };
    let mut worst = 0.0f64;
    for i in 0..20 {
        let base = gen::top_order_problem(&mut rng, 1, 6, Loss::squared());
        let order = 2 + i % 2;
        let lifted = gen::lift_to_order(&base, order);
        let a = solver::solve(&base, &opts).map_err(|e| e.to_string())?;
        let b = solver::solve(&lifted, &opts).map_err(|e| e.to_string())?;
        let (ka, kb) = (a.spline.knots(), b.spline.knots());
        ensure(ka.len() == kb.len(), || {
            format!("{base:?} at N = {order}: {ka:?} vs {kb:?}")
        })?;
        for (x, y) in ka.iter().zip(kb) {
            ensure(x.location == y.location, || {
                format!("{base:?} at N = {order}: {ka:?} vs {kb:?}")
            })?;
            worst = worst.max((x.weight - y.weight).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max weight difference {worst:e}"))?;
    Ok(format!("20 problems, max weight difference {worst:e}"))
}

fn random_problem(rng: &mut ChaCha8Rng) -> Problem {
    let order = rng.random_range(1..=3);
    let m = rng.random_range(1..=5);
    let ms = (0..m)
        .map(|_| {
            let terms = (0..rng.random_range(1..=3))
                .map(|_| Term {
                    c: rng.random_range(-1e3..1e3),
                    functional: SamplingFunctional::new(
                        rng.random_range(-5.0..5.0),
                        side(rng),
                        rng.random_range(0..order),
                    ),
                })
                .collect();
            Measurement::new(terms).unwrap()
        })
        .collect();
    let y = (0..m)
        .map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-5..5)))
        .collect();
    let loss = if rng.random_bool(0.5) {
        Loss::Interpolation
    } else if rng.random_bool(0.5) {
        Loss::squared()
    } else {
        Loss::Squared {
            weights: Some((0..m).map(|_| rng.random_range(0.1..3.0)).collect()),
        }
    };
    let sys = FundamentalSystem::new(order, rng.random_range(-10.0..-5.0), f64::INFINITY).unwrap();
    Problem::new(sys, ms, y, loss, rng.random_range(0.0..2.0)).unwrap()
}

fn random_solution(rng: &mut ChaCha8Rng) -> Solution {
    let order = rng.random_range(1..=4);
    let spline = gen::spline(rng, order, -1e3, 1e3, 6);
    let report = Report {
        status: [
            Status::Ok,
            Status::Warning,
            Status::Infeasible,
            Status::IllPosed,
        ][rng.random_range(0..4)],
        lambda_positive: rng.random_bool(0.5),
        loss_convex: true,
        invisible_null: (0..rng.random_range(0..order)).collect(),
        null_rank: rng.random_range(0..=order),
        warnings: vec!["w".into(); rng.random_range(0..2)],
        iterations: rng.random_range(0..1000),
        converged: rng.random_bool(0.5),
        seed: rng.random(),
        method: "proximal-gradient".into(),
        ..Report::default()
    };
    Solution {
        knot_count: spline.knot_count(),
        spline,
        cost: rng.random::<f64>() / 3.0,
        residuals: (0..rng.random_range(1..5))
            .map(|_| rng.random_range(-1.0..1.0) * 1e-7)
            .collect(),
        report,
    }
}

fn determinism_and_round_trip() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = gen::rng(11);
    let p = gen::top_order_problem(&mut rng, 2, 5, Loss::squared());
    let problem_path = dir.path().join("problem.json");
    std::fs::write(&problem_path, serde_json::to_string(&p).unwrap()).unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("solution{run}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_gbv"))
            .arg("solve")
            .arg(&problem_path)
            .args(["--seed", "42", "--out"])
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.code() == Some(0), || format!("exit status {status}"))?;
        outputs.push(std::fs::read(&out).unwrap());
    }
    ensure(outputs[0] == outputs[1], || {
        "solution documents differ between runs".into()
    })?;

    for _ in 0..1000 {
        let p = random_problem(&mut rng);
        let back: Problem =
            serde_json::from_str(&serde_json::to_string(&p).unwrap()).map_err(|e| e.to_string())?;
        ensure(back == p, || format!("problem round-trip changed {p:?}"))?;
        let s = random_solution(&mut rng);
        let text = serde_json::to_string_pretty(&s).unwrap();
        let back: Solution = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        ensure(back == s, || format!("solution round-trip changed {s:?}"))?;
        ensure(serde_json::to_string_pretty(&back).unwrap() == text, || {
            "re-serialization differs".into()
        })?;
    }
    Ok("byte-identical reruns, 1000 + 1000 exact round-trips".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("right-inverse identity", right_inverse_identity),
        ("canonical decomposition", canonical_decomposition),
        ("biorthogonality", biorthogonality),
        ("causality and locality", causality_and_locality),
        ("continuity bound", continuity_bound_criterion),
        ("weak* discontinuity demo", weakstar_demo),
        ("solver vs oracle", solver_vs_oracle),
        ("closed-form case", closed_form),
        ("extreme-point structure", extreme_points),
        ("order reduction", order_reduction),
        ("determinism and round-trip", determinism_and_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let verdict = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
