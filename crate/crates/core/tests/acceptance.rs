//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero if any criterion fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use razgd_core::batch::Parallelism;
use razgd_core::harness::{
    demo_spec, execute, resolve, summary_csv, ExperimentSpec, ProblemSpec, RunOutput, SolverKind,
    SolverSpec,
};
use razgd_core::problems::{
    gen_ls_data, stationarity_report, QuarticProblem, SphereQuadraticProblem,
};
use razgd_core::solvers::{
    params_fosp, params_rzgd, params_sosp, rzgd, tss, Multipliers, ProblemConstants, Termination,
};
use razgd_core::{zo_gradient, Error, Manifold, Objective, Point, TangentVector};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn estimator_error_bound() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_slack = f64::INFINITY;
    let mut failures = 0;
    for _ in 0..500 {
        let d = rng.random_range(1..=10);
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sym = (&g + g.transpose()) * 0.5;
        let norm = SymmetricEigen::new(sym.clone())
            .eigenvalues
            .amax()
            .max(1e-12);
        let a = sym * (rng.random_range(0.0..5.0) / norm);
        let l = SymmetricEigen::new(a.clone()).eigenvalues.amax();
        let c = gaussian(&mut rng, d);
        let x = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let mu = 10f64.powf(rng.random_range(-4.0..0.0));
        let m = Manifold::euclidean(d);
        let point = Point::new(x.clone());
        let basis = m.tangent_basis(&point).unwrap();
        let mut f = Objective::new(|z: &DVector<f64>| 0.5 * z.dot(&(&a * z)) + c.dot(z));
        let est = zo_gradient(&mut f, &m, &basis, &TangentVector::zeros(d), mu).unwrap();
        let exact = &a * &x + &c;
        let err = (est.coeffs() - exact).norm();
        // Quadratics have a zero Hessian Lipschitz constant.
        let bound = razgd_core::error_bound(l, 0.0, mu, d) + 1e-9;
        worst_slack = worst_slack.min(bound - err);
        if err > bound {
            failures += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        failures == 0 && secs < 10.0,
        format!("500 quadratics, {failures} violations, min slack {worst_slack:.3e}, {secs:.2}s"),
    )
}

fn query_accounting(outputs: &[&RunOutput]) -> Verdict {
    let bad = outputs
        .iter()
        .filter(|o| {
            o.trace.total_queries() != o.trace.expected_queries()
                || o.trace.total_queries() != o.summary.queries
        })
        .count();
    verdict(
        bad == 0,
        format!("{} runs checked, {bad} mismatches", outputs.len()),
    )
}

fn all_solvers_small() -> Vec<RunOutput> {
    let mut solvers = Vec::new();
    for kind in [
        SolverKind::RazgdI,
        SolverKind::RazgdIPerturbed,
        SolverKind::RazgdII,
        SolverKind::Rzgd,
        SolverKind::Pzgd,
    ] {
        solvers.push(SolverSpec::new(kind, 1e-3, 25.0, 6.0));
    }
    let mut out = Vec::new();
    for problem in [
        ProblemSpec::Quartic { d: 4 },
        ProblemSpec::SimplexLs {
            m: 30,
            d: 5,
            seed: 3,
            noise: 0.1,
        },
        ProblemSpec::SphereQuadratic { d: 5, seed: 3 },
    ] {
        let spec = ExperimentSpec {
            name: "accounting".into(),
            problem,
            solvers: solvers.clone(),
            runs: 3,
            seed: 5,
            budgets: razgd_core::harness::Budgets {
                query_budget: 30_000,
                max_outer: 2_000,
                wall_clock_s: None,
            },
        };
        let (manifest, problem) = resolve(&spec).unwrap();
        out.extend(execute(&manifest, &problem, Parallelism::Sequential).unwrap());
    }
    out
}

/// TSS calls where the outer loop actually invokes them: next to the quartic
/// saddle, and at the points where the accelerated runs on simplex-LS
/// stopped (small gradients).
fn trigger_invariant(ls_stops: &[(u64, Point)]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut violations = 0;
    let mut other_errors = 0;
    let mut worst = (0.0f64, 0.0f64);
    let mut triggered = 0;
    let mut inner = 0;

    let quartic = QuarticProblem::new(20).unwrap();
    let qm = quartic.manifold();
    let c = ProblemConstants {
        l: 25.0,
        rho: 6.0,
        b: 1.0,
        dim: qm.dim(),
    };
    let qcfg = params_sosp(1e-4, 0.1, &c, &Multipliers::default()).unwrap();

    let problems: Vec<_> = ls_stops
        .iter()
        .map(|(seed, x)| (gen_ls_data(200, 20, *seed, 0.1).unwrap(), x.clone()))
        .collect();
    let c = ProblemConstants {
        l: 50.0,
        rho: 1.0,
        b: 1.0,
        dim: 19,
    };
    let mut lcfg = params_fosp(1e-1, &c, &Multipliers::default()).unwrap();
    lcfg.r = 0.1 * lcfg.big_b;

    for i in 0..200 {
        let outcome = if i % 2 == 0 {
            let x = Point::new(gaussian(&mut rng, 21) * qcfg.big_b);
            let basis = qm.tangent_basis(&x).unwrap();
            let mut f = Objective::new(|z: &DVector<f64>| quartic.eval(z));
            tss(&mut f, &qm, &basis, &qcfg, &mut rng)
        } else {
            let (ls, x) = &problems[(i / 2) % problems.len()];
            let lm = ls.manifold();
            let basis = lm.tangent_basis(x).unwrap();
            let mut f = Objective::new(|z: &DVector<f64>| ls.eval(z));
            tss(&mut f, &lm, &basis, &lcfg, &mut rng)
        };
        match outcome {
            Ok(o) => {
                worst.0 = worst.0.max(o.max_s_ratio);
                worst.1 = worst.1.max(o.max_y_ratio);
                triggered += o.triggered as usize;
                inner += o.inner_iters;
            }
            Err(Error::Invariant(_)) => violations += 1,
            Err(_) => other_errors += 1,
        }
    }
    verdict(
        violations == 0 && other_errors == 0 && worst.0 <= 1.0 + 1e-9 && worst.1 <= 1.0 + 1e-9,
        format!(
            "200 calls ({triggered} triggered, {inner} inner steps), {violations} violations, {other_errors} errors, max |s-s0|/B {:.4}, max |y-s0|/2B {:.4}",
            worst.0, worst.1
        ),
    )
}

/// Brute-force Euclidean projection onto the simplex by grid search.
fn grid_projection(p: &DVector<f64>, step: f64) -> DVector<f64> {
    let n = p.len();
    let mut best = (f64::INFINITY, DVector::zeros(n));
    let coarse = if n <= 3 { step } else { 0.02 };
    let search = |lo: &DVector<f64>, hi: &DVector<f64>, h: f64, best: &mut (f64, DVector<f64>)| {
        let counts: Vec<usize> = (0..n - 1)
            .map(|i| ((hi[i] - lo[i]) / h).round() as usize)
            .collect();
        let mut idx = vec![0usize; n - 1];
        loop {
            let mut x = DVector::zeros(n);
            let mut rest = 1.0;
            for i in 0..n - 1 {
                x[i] = lo[i] + idx[i] as f64 * h;
                rest -= x[i];
            }
            if rest >= -1e-12 {
                x[n - 1] = rest.max(0.0);
                let dist = (&x - p).norm_squared();
                if dist < best.0 {
                    *best = (dist, x);
                }
            }
            let mut k = 0;
            loop {
                if k == n - 1 {
                    return;
                }
                idx[k] += 1;
                if idx[k] <= counts[k] {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    };
    search(
        &DVector::zeros(n),
        &DVector::from_element(n, 1.0),
        coarse,
        &mut best,
    );
    if coarse > step {
        let centre = best.1.clone();
        let lo = centre.map(|v| (v - coarse).max(0.0));
        let hi = centre.map(|v| (v + coarse).min(1.0));
        search(&lo, &hi, step, &mut best);
    }
    best.1
}

fn manifold_invariants() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst_sphere = 0.0f64;
    let mut worst_sum = 0.0f64;
    let mut min_coord = f64::INFINITY;
    let mut errors = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(2..=8);
        let sphere = Manifold::sphere(n);
        let g = gaussian(&mut rng, n);
        let x = Point::new(&g / g.norm());
        let basis = sphere.tangent_basis(&x).unwrap();
        let s = TangentVector::new(gaussian(&mut rng, n - 1) * rng.random_range(0.0..10.0));
        match sphere.retract(&basis, &s) {
            Ok(y) => worst_sphere = worst_sphere.max((y.coords().norm() - 1.0).abs()),
            Err(_) => errors += 1,
        }
    }
    for _ in 0..10_000 {
        let n = rng.random_range(2..=8);
        let simplex = Manifold::simplex(n);
        let w = gaussian(&mut rng, n).map(|v| v.exp());
        let x = Point::new(&w / w.sum());
        let basis = simplex.tangent_basis(&x).unwrap();
        let s = TangentVector::new(gaussian(&mut rng, n - 1) * rng.random_range(0.0..5.0));
        match simplex.retract(&basis, &s) {
            Ok(y) => {
                worst_sum = worst_sum.max((y.coords().sum() - 1.0).abs());
                min_coord = min_coord.min(y.coords().min());
            }
            Err(_) => errors += 1,
        }
    }
    let mut worst_proj = 0.0f64;
    for n in 2..=4 {
        let m = Manifold::simplex(n);
        for _ in 0..4 {
            let p = gaussian(&mut rng, n) * 0.7;
            let proj = m.project_ambient(&p).unwrap();
            let oracle = grid_projection(&p, 1e-3);
            worst_proj = worst_proj.max((proj.coords() - oracle).amax());
        }
    }
    verdict(
        errors == 0 && worst_sphere <= 1e-12 && worst_sum <= 1e-12 && min_coord > 0.0 && worst_proj <= 2e-3,
        format!(
            "2x10^4 retractions, {errors} errors, sphere |norm-1| {worst_sphere:.1e}, simplex |sum-1| {worst_sum:.1e}, min coord {min_coord:.1e}; projection vs grid {worst_proj:.1e}"
        ),
    )
}

fn saddle_escape(outputs: &[RunOutput], secs: f64) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = secs < 120.0;
    for label in ["razgd_mu0.01", "razgd_mu0.3"] {
        let runs: Vec<_> = outputs
            .iter()
            .filter(|o| o.summary.solver == label)
            .collect();
        let escaped = runs
            .iter()
            .filter(|o| o.summary.final_f < -20.0 / 8.0)
            .count();
        let mean = runs.iter().map(|o| o.summary.final_f).sum::<f64>() / runs.len() as f64;
        pass &= runs.len() == 10 && escaped >= 8;
        parts.push(format!(
            "{label}: {escaped}/{} escaped, mean f {mean:.4}",
            runs.len()
        ));
    }
    verdict(pass, format!("{}; {secs:.1}s", parts.join("; ")))
}

fn acceleration() -> (Verdict, Vec<RunOutput>) {
    let (epsilon, l, rho) = (0.1, 50.0, 1.0);
    let mut razgd_total = 0.0;
    let mut rzgd_total = 0.0;
    let mut missed = 0;
    let mut per_seed = Vec::new();
    let mut outputs = Vec::new();
    for seed in 0..5 {
        let spec = ExperimentSpec {
            name: "acceleration".into(),
            problem: ProblemSpec::SimplexLs {
                m: 200,
                d: 20,
                seed,
                noise: 0.1,
            },
            solvers: vec![
                SolverSpec::new(SolverKind::RazgdI, epsilon, l, rho),
                SolverSpec::new(SolverKind::Rzgd, epsilon, l, rho),
            ],
            runs: 1,
            seed: 0,
            budgets: Default::default(),
        };
        let (manifest, problem) = resolve(&spec).unwrap();
        let out = execute(&manifest, &problem, Parallelism::Sequential).unwrap();
        let (acc, base) = (&out[0].trace, &out[1].trace);
        let best = base.best_value();
        let target = best + 1e-2 * best.abs();
        let q_base = base
            .queries_to_reach(target)
            .expect("the baseline reaches its own best");
        let q_acc = acc.queries_to_reach(target);
        match q_acc {
            Some(q) => razgd_total += q as f64,
            None => missed += 1,
        }
        rzgd_total += q_base as f64;
        per_seed.push(format!(
            "{}/{}",
            q_acc.map_or("never".into(), |q| q.to_string()),
            q_base
        ));
        outputs.extend(out);
    }
    let ratio = razgd_total / rzgd_total;
    (
        verdict(
            missed == 0 && ratio <= 0.8,
            format!(
                "query ratio {ratio:.3} (need <= 0.8); razgd/rzgd queries per seed {}",
                per_seed.join(" ")
            ),
        ),
        outputs,
    )
}

fn rzgd_stationarity() -> Verdict {
    let epsilon = 1e-2;
    let diag = DVector::from_vec(vec![0.5, 1.0, 2.0, 3.0, 4.0]);
    let a = DMatrix::from_diagonal(&diag);
    let m = Manifold::euclidean(5);
    let c = ProblemConstants {
        l: 4.0,
        rho: 1.0,
        b: 1.0,
        dim: 5,
    };
    let cfg = params_rzgd(epsilon, &c, &Multipliers::default()).unwrap();
    let mut f = Objective::new(|z: &DVector<f64>| 0.5 * z.dot(&(&a * z)));
    let x0 = Point::new(DVector::from_element(5, 1.0));
    let trace = rzgd(&mut f, &m, &x0, &cfg).unwrap();
    let grad = (&a * trace.final_point.coords()).norm();
    let limit = 0.75 * epsilon + 1e-6;
    verdict(
        trace.termination == Termination::GradientSmallOutput && grad <= limit,
        format!(
            "|grad f| = {grad:.3e} <= {limit:.3e}, {} queries, {}",
            trace.total_queries(),
            trace.termination
        ),
    )
}

fn stationarity_diagnostics() -> Verdict {
    let quartic = QuarticProblem::new(20).unwrap();
    let qm = quartic.manifold();
    let q = stationarity_report(|z| quartic.eval(z), &qm, &quartic.saddle(), 1e-4).unwrap();
    let quartic_ok = q.grad_norm < 1e-6
        && q.hess_min_eig < -(0.01f64 * 1.0).sqrt()
        && q.is_first_order(0.01)
        && !q.is_second_order(0.01, 1.0);

    let sphere = SphereQuadraticProblem::random(10, 0).unwrap();
    let eig = SymmetricEigen::new(sphere.matrix().clone());
    let top = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(top).into_owned();
    let sm = sphere.manifold();
    let s = stationarity_report(|z| sphere.eval(z), &sm, &Point::new(v), 1e-4).unwrap();
    let sphere_ok = s.is_first_order(0.01) && !s.is_second_order(0.01, 1.0);
    verdict(
        quartic_ok && sphere_ok,
        format!(
            "quartic origin: grad {:.1e}, lambda_min {:.4}; sphere top eigenvector: grad {:.1e}, lambda_min {:.4}",
            q.grad_norm, q.hess_min_eig, s.grad_norm, s.hess_min_eig
        ),
    )
}

fn csv_bytes(outputs: &[RunOutput]) -> Vec<String> {
    let mut files: Vec<String> = outputs.iter().map(|o| o.trace.to_csv()).collect();
    files.push(summary_csv(outputs));
    files
}

fn determinism(reference: &[RunOutput]) -> Verdict {
    let spec = demo_spec("quartic").unwrap();
    let (manifest, problem) = resolve(&spec).unwrap();
    let again = execute(&manifest, &problem, Parallelism::Sequential).unwrap();
    let parallel = execute(&manifest, &problem, Parallelism::Threads(4)).unwrap();
    let base = csv_bytes(reference);
    let same = base == csv_bytes(&again) && base == csv_bytes(&parallel);
    verdict(
        same,
        format!(
            "{} CSV files compared across a rerun and a 4-thread run",
            base.len()
        ),
    )
}

fn main() {
    let mut results: Vec<(&str, Verdict)> = Vec::new();

    results.push(("estimator error bound", estimator_error_bound()));

    let started = Instant::now();
    let spec = demo_spec("quartic").unwrap();
    let (manifest, problem) = resolve(&spec).unwrap();
    let escape_runs = execute(&manifest, &problem, Parallelism::Sequential).unwrap();
    let escape_secs = started.elapsed().as_secs_f64();

    let (accel, accel_runs) = acceleration();
    let small_runs = all_solvers_small();
    let audited: Vec<&RunOutput> = escape_runs
        .iter()
        .chain(&accel_runs)
        .chain(&small_runs)
        .collect();
    results.push(("query accounting", query_accounting(&audited)));
    let ls_stops: Vec<(u64, Point)> = accel_runs
        .iter()
        .step_by(2)
        .zip(0..)
        .map(|(o, seed)| (seed, o.trace.final_point.clone()))
        .collect();
    results.push(("trigger invariant", trigger_invariant(&ls_stops)));
    results.push(("manifold invariants", manifold_invariants()));
    results.push(("saddle escape", saddle_escape(&escape_runs, escape_secs)));
    results.push(("acceleration", accel));
    results.push(("rzgd stationarity", rzgd_stationarity()));
    results.push(("stationarity diagnostics", stationarity_diagnostics()));
    results.push(("determinism", determinism(&escape_runs)));

    let mut failed = 0;
    for (name, v) in &results {
        println!(
            "{} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += !v.pass as usize;
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
