//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::time::{Duration, Instant};

use mfg_core::model::diagnostics::{random_control_measure, random_simplex};
use mfg_core::scenarios::{monotone_congestion, quadratic_two_state, random_quadratic};
use mfg_core::{
    best_response_gap, build_reference_generator, chaos_error, consistency_residual,
    deviation_gain, deviation_grid, evaluate_policy_cost, forward_flow, hjb_driver,
    kron_generator, kron_psi_identity, martingale_residual, matexp_marginal, measure_consistency,
    minimize_hamiltonian, minimize_hamiltonian_numeric, picard_solve, simulate_nplayer,
    solve_value, ConstantRates, ControlFlow, DiscreteMeasure, EquilibriumSolution, PicardOptions,
    PolicySurface, ProblemSpec, RateMatrix, SimplexFlow, SimplexPoint, TimeGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_generator<R: Rng>(m: usize, rng: &mut R) -> RateMatrix {
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 0.0 } else { rng.random_range(0.1..3.0) }).collect())
        .collect();
    RateMatrix::from_off_diagonal(&rows).unwrap()
}

fn frozen(spec: &ProblemSpec, n: usize) -> (SimplexFlow, ControlFlow) {
    let grid = TimeGrid::new(spec.horizon(), n).unwrap();
    (
        SimplexFlow::constant(grid, spec.p_init().clone()),
        ControlFlow::constant(grid, DiscreteMeasure::dirac(vec![0.1]).unwrap()),
    )
}

fn equilibrium() -> (ProblemSpec, EquilibriumSolution) {
    let spec = monotone_congestion(1.0).unwrap();
    let sol = picard_solve(&spec, TimeGrid::new(1.0, 200).unwrap(), None, PicardOptions::default()).unwrap();
    (spec, sol)
}

fn forward_flow_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let mut worst = 0.0_f64;
    for c in 0..5 {
        let m = 2 + c % 3;
        let q = random_generator(m, &mut rng);
        let p0 = SimplexPoint::normalized((0..m).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let flow = forward_flow(&ConstantRates::new(q.clone()), &p0, grid).unwrap();
        for k in 0..grid.n_nodes() {
            let exact = matexp_marginal(&q, &p0, grid.node(k));
            for (a, b) in flow.node(k).weights().iter().zip(exact.weights()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    outcome(worst <= 1e-6, format!("sup error {worst:.3e} (tol 1e-6)"))
}

fn girsanov_consistency() -> Outcome {
    let q0 = build_reference_generator(2, None, false).unwrap();
    let field = ConstantRates::new(RateMatrix::from_off_diagonal(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap());
    let p0 = SimplexPoint::vertex(2, 0).unwrap();
    let rep = measure_consistency(&field, &q0, &p0, 1.0, 100_000, 102).unwrap();
    let exact = 0.5 + 0.5 * (-4f64).exp();
    let exact_ok = (rep.exact[0] - exact).abs() < 1e-12;
    let pass = exact_ok && rep.agrees(3.0, 0.0);
    outcome(
        pass,
        format!(
            "state 1: reweighted {:.5}+-{:.5}, direct {:.5}+-{:.5}, exact {:.5}; E[W] {:.5}+-{:.5}",
            rep.reweighted[0].mean,
            rep.reweighted[0].se,
            rep.direct[0].mean,
            rep.direct[0].se,
            rep.exact[0],
            rep.mean_weight.mean,
            rep.mean_weight.se
        ),
    )
}

fn optimality_and_comparison() -> Outcome {
    let spec = quadratic_two_state().unwrap();
    let (p, nu) = frozen(&spec, 1000);
    let (v, pol) = solve_value(&spec, &p, &nu).unwrap();
    let j = evaluate_policy_cost(&spec, &pol, &p, &nu).unwrap();
    let self_gap = j.sup_distance(&v);
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = f64::INFINITY;
    let grid = *pol.grid();
    for _ in 0..50 {
        let alt = PolicySurface::from_fn(grid, 2, spec.control_box(), |_, _| vec![rng.random_range(0.1..2.0)]).unwrap();
        let ja = evaluate_policy_cost(&spec, &alt, &p, &nu).unwrap();
        for k in 0..grid.n_nodes() {
            for (a, b) in ja.node(k).iter().zip(v.node(k)) {
                worst = worst.min(a - b);
            }
        }
    }
    outcome(
        self_gap <= 1e-8 && worst >= -1e-10,
        format!("|J(a_hat) - V| {self_gap:.2e} (tol 1e-8); min over 50 policies of J - V {worst:.3e} (tol -1e-10)"),
    )
}

fn martingale_residual_check() -> Outcome {
    let spec = quadratic_two_state().unwrap();
    let (p, nu) = frozen(&spec, 1000);
    let (v, pol) = solve_value(&spec, &p, &nu).unwrap();
    let good = martingale_residual(&spec, &v, &pol, &p, &nu, 100_000, 104).unwrap();
    let bad = martingale_residual(&spec, &v.scaled(2.0), &pol, &p, &nu, 100_000, 104).unwrap();
    outcome(
        good.is_consistent(3.0) && !bad.is_consistent(3.0),
        format!(
            "residual {:.2e}+-{:.2e}; doubled value {:.3e}+-{:.2e}",
            good.estimate.mean, good.estimate.se, bad.estimate.mean, bad.estimate.se
        ),
    )
}

fn equilibrium_certification(spec: &ProblemSpec, sol: &EquilibriumSolution) -> Outcome {
    let opts = PicardOptions::default();
    let (s, c) = consistency_residual(spec, sol).unwrap();
    let gap = best_response_gap(spec, sol, 50, 105).unwrap();
    let g = *sol.p_flow.grid();
    let alt = (
        SimplexFlow::constant(g, SimplexPoint::new(vec![0.1, 0.9]).unwrap()),
        ControlFlow::constant(g, DiscreteMeasure::dirac(vec![2.0]).unwrap()),
    );
    let other = picard_solve(spec, g, Some(alt), opts).unwrap();
    let spread = other.p_flow.sup_l1_distance(&sol.p_flow);
    let pass = sol.converged && other.converged && s < opts.tol && c < opts.tol && gap.gap <= 1e-9 && spread < 1e-5;
    outcome(
        pass,
        format!(
            "converged in {} iterations; residuals {s:.2e}/{c:.2e} (tol 1e-6); gap {:.2e} over 50 (tol 1e-9); two starts {spread:.2e} apart (tol 1e-5)",
            sol.trace.len(),
            gap.gap
        ),
    )
}

fn propagation_of_chaos(spec: &ProblemSpec, sol: &EquilibriumSolution) -> Outcome {
    let rep = chaos_error(spec, sol, &[8, 16, 32, 64, 128, 256, 512], 64, 106).unwrap();
    let bound_ok = rep.within_bound(3.0);
    let slope_ok = (-1.25..=-0.75).contains(&rep.state_slope);
    let w1_ok = rep.w1_slope <= -0.4;
    let rows: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("N={} {:.2e}<= {:.2e}", r.n, r.mse_state, r.bound))
        .collect();
    outcome(
        bound_ok && slope_ok && w1_ok,
        format!(
            "state slope {:.3} (in [-1.25,-0.75]); W1^2 slope {:.3} (<= -0.4); {}",
            rep.state_slope,
            rep.w1_slope,
            rows.join(", ")
        ),
    )
}

fn epsilon_nash_trend(spec: &ProblemSpec, sol: &EquilibriumSolution) -> Outcome {
    let scalings = [-0.5, -0.25, 0.0, 0.25, 0.5];
    let offsets = [-0.5, -0.25, 0.0, 0.25, 0.5];
    let devs = deviation_grid(spec, &sol.policy, &scalings, &offsets).unwrap();
    let centre = devs
        .iter()
        .position(|d| d.sup_distance(&sol.policy) == 0.0)
        .expect("the grid contains the equilibrium policy");
    let small = deviation_gain(spec, sol, 16, &devs, 64, 107).unwrap();
    let large = deviation_gain(spec, sol, 256, &devs, 64, 107).unwrap();
    let zero_ok = [&small, &large].iter().all(|r| r.rows[centre].gain.within(0.0, 3.0));
    let trend_ok = large.max_profitable_gain <= small.max_profitable_gain;
    let best = |r: &mfg_core::DeviationReport| {
        r.rows
            .iter()
            .filter(|row| row.id != centre)
            .map(|row| row.gain.mean)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    outcome(
        zero_ok && trend_ok,
        format!(
            "{} deviations; max profitable gain N=16 {:.3e}, N=256 {:.3e}; best other mean gain {:.3e} / {:.3e}; a_hat gain {:.1e}",
            devs.len(),
            small.max_profitable_gain,
            large.max_profitable_gain,
            best(&small),
            best(&large),
            large.rows[centre].gain.mean
        ),
    )
}

fn brute_force_joint(qs: &[RateMatrix]) -> Vec<Vec<f64>> {
    let dims: Vec<usize> = qs.iter().map(|q| q.num_states()).collect();
    let total: usize = dims.iter().product();
    let decode = |mut x: usize| {
        let mut s = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            s[k] = x % dims[k];
            x /= dims[k];
        }
        s
    };
    let mut out = vec![vec![0.0; total]; total];
    for x in 0..total {
        let sx = decode(x);
        for y in 0..total {
            let sy = decode(y);
            let diff: Vec<usize> = (0..dims.len()).filter(|&k| sx[k] != sy[k]).collect();
            if diff.len() == 1 {
                out[x][y] = qs[diff[0]].rate(sx[diff[0]], sy[diff[0]]);
            }
        }
        out[x][x] = -out[x].iter().sum::<f64>();
    }
    out
}

fn product_chain_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut kron_ok = true;
    for dims in [vec![2, 2], vec![2, 3], vec![3, 4], vec![4, 4], vec![2, 2, 2], vec![2, 2, 4]] {
        let qs: Vec<RateMatrix> = dims.iter().map(|&m| random_generator(m, &mut rng)).collect();
        let j = kron_generator(&qs).unwrap();
        for (x, row) in brute_force_joint(&qs).iter().enumerate() {
            for (y, v) in row.iter().enumerate() {
                // Off-diagonal entries are copied; diagonals are sums in a different order.
                let tol = if x == y { 1e-14 * (1.0 + v.abs()) } else { 0.0 };
                kron_ok &= (j.entries()[(x, y)] - v).abs() <= tol;
            }
        }
    }
    let mut worst = 0.0_f64;
    let mut psi_ok = true;
    for m1 in 2..=4 {
        for m2 in 2..=4 {
            for _ in 0..100 {
                let s = [rng.random_range(0..m1), rng.random_range(0..m2)];
                let z: Vec<f64> = (0..m1 * m2).map(|_| rng.random_range(-2.0..2.0)).collect();
                let id = kron_psi_identity([m1, m2], s, &z).unwrap();
                psi_ok &= id.holds(1e-12);
                worst = worst.max((id.lhs - id.rhs).abs()).max(id.matrix_gap);
            }
        }
    }
    outcome(
        kron_ok && psi_ok,
        format!("Kronecker sum vs enumeration {}; worst psi identity gap {worst:.1e} (tol 1e-12)", if kron_ok { "exact" } else { "MISMATCH" }),
    )
}

fn hamiltonian_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut alpha_gap = 0.0_f64;
    let mut driver_gap = 0.0_f64;
    for _ in 0..200 {
        let m = rng.random_range(2..=4);
        let l = rng.random_range(1..=3);
        let spec = random_quadratic(m, l, &mut rng).unwrap();
        let i = rng.random_range(0..m);
        let z: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = random_simplex(m, &mut rng);
        let nu = random_control_measure(&spec, &mut rng);
        let t = rng.random_range(0.0..1.0);
        let cf = minimize_hamiltonian(&spec, t, i, &z, &p, &nu).unwrap();
        let pg = minimize_hamiltonian_numeric(&spec, t, i, &z, &p, &nu).unwrap();
        for (a, b) in cf.alpha.iter().zip(&pg.alpha) {
            alpha_gap = alpha_gap.max((a - b).abs());
        }
        let reference: f64 = (0..m).filter(|&j| j != i).map(|j| spec.ref_rate(i, j) * (z[j] - z[i])).sum();
        let driver = hjb_driver(&spec, t, i, &z, &p, &nu).unwrap();
        driver_gap = driver_gap.max((cf.h_min + reference - driver).abs() / (1.0 + driver.abs()));
    }
    outcome(
        alpha_gap <= 1e-8 && driver_gap <= 1e-12,
        format!("closed form vs PGD {alpha_gap:.1e} (tol 1e-8); driver cancellation {driver_gap:.1e} (tol 1e-12)"),
    )
}

fn pipeline_bytes(spec: &ProblemSpec) -> Vec<String> {
    let sol = picard_solve(spec, TimeGrid::new(1.0, 100).unwrap(), None, PicardOptions::default()).unwrap();
    let chaos = chaos_error(spec, &sol, &[8, 32], 4, 110).unwrap();
    let run = simulate_nplayer(spec, &sol, 50, 111).unwrap();
    let devs = deviation_grid(spec, &sol.policy, &[0.0, 0.5], &[0.0, 0.25]).unwrap();
    let gains = deviation_gain(spec, &sol, 8, &devs, 8, 112).unwrap();
    let paths: String = run.paths.iter().map(|p| p.to_csv()).collect();
    vec![
        sol.value.to_csv(),
        sol.policy.to_csv(),
        serde_json::to_string(&sol.trace).unwrap(),
        serde_json::to_string(&chaos).unwrap(),
        serde_json::to_string(&gains).unwrap(),
        paths,
    ]
}

fn determinism() -> Outcome {
    let spec = monotone_congestion(1.0).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let several = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = single.install(|| pipeline_bytes(&spec));
    let b = single.install(|| pipeline_bytes(&spec));
    let c = several.install(|| pipeline_bytes(&spec));
    let same = a == b && a == c;
    let bytes: usize = a.iter().map(|s| s.len()).sum();
    outcome(same, format!("{bytes} bytes of output identical across reruns and thread counts"))
}

fn main() {
    let started = Instant::now();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, budget: Duration, run: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let o = run();
        let elapsed = t0.elapsed();
        let in_time = elapsed <= budget;
        let pass = o.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {id:>2} {name:<28} {} {:.1}s/{}s  {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            o.detail
        );
    };
    let secs = Duration::from_secs;
    report(1, "forward flow oracle", secs(1), &mut forward_flow_oracle);
    report(2, "girsanov consistency", secs(30), &mut girsanov_consistency);
    report(3, "optimality and comparison", secs(10), &mut optimality_and_comparison);
    report(4, "martingale residual", secs(60), &mut martingale_residual_check);
    let mut solved = None;
    report(5, "equilibrium certification", secs(60), &mut || {
        let (spec, sol) = equilibrium();
        let o = equilibrium_certification(&spec, &sol);
        solved = Some((spec, sol));
        o
    });
    let (spec, sol) = solved.expect("equilibrium solved");
    report(6, "propagation of chaos", secs(600), &mut || propagation_of_chaos(&spec, &sol));
    report(7, "epsilon-Nash trend", secs(600), &mut || epsilon_nash_trend(&spec, &sol));
    report(8, "product-chain identities", secs(5), &mut product_chain_identities);
    report(9, "hamiltonian correctness", secs(5), &mut hamiltonian_correctness);
    report(10, "determinism", secs(600), &mut determinism);
    println!("{} of 10 criteria failed ({:.1}s)", failures, started.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
