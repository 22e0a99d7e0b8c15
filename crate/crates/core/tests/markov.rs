use mfg_core::{
    build_reference_generator, forward_flow, matexp_marginal, simulate_path, ConstantRates,
    FnRates, RateMatrix, SimplexPoint, TimeGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_generator<R: Rng>(m: usize, rng: &mut R) -> RateMatrix {
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 0.0 } else { rng.random_range(0.1..3.0) }).collect())
        .collect();
    RateMatrix::from_off_diagonal(&rows).unwrap()
}

fn random_point<R: Rng>(m: usize, rng: &mut R) -> SimplexPoint {
    SimplexPoint::normalized((0..m).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

#[test]
fn reference_jump_count_is_poisson() {
    let q = build_reference_generator(3, None, false).unwrap();
    let field = ConstantRates::new(q);
    let p0 = SimplexPoint::uniform(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 100_000;
    let counts: Vec<f64> = (0..n)
        .map(|_| simulate_path(&field, &p0, 2.0, &mut rng).unwrap().n_jumps() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / n as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - 4.0).abs() <= 3.0 * se, "{mean} +- {se}");
    // Poisson: variance equals the mean.
    assert!((var - 4.0).abs() < 0.1, "{var}");
}

#[test]
fn two_state_marginal_matches_matrix_exponential() {
    let q = RateMatrix::from_off_diagonal(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
    let field = ConstantRates::new(q.clone());
    let p0 = SimplexPoint::vertex(2, 0).unwrap();
    let exact = 0.5 + 0.5 * (-4.0f64).exp();
    assert!((matexp_marginal(&q, &p0, 1.0).weights()[0] - exact).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let n = 100_000;
    let hits = (0..n)
        .filter(|_| simulate_path(&field, &p0, 1.0, &mut rng).unwrap().final_state() == 0)
        .count();
    let frac = hits as f64 / n as f64;
    let se = (frac * (1.0 - frac) / n as f64).sqrt();
    assert!((frac - exact).abs() <= 3.0 * se, "{frac} vs {exact}");
}

#[test]
fn forward_flow_matches_matrix_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    for m in 2..=4 {
        for _ in 0..5 {
            let q = random_generator(m, &mut rng);
            let p0 = random_point(m, &mut rng);
            let flow = forward_flow(&ConstantRates::new(q.clone()), &p0, grid).unwrap();
            for k in (0..=1000).step_by(50) {
                let exact = matexp_marginal(&q, &p0, grid.node(k));
                assert!(flow.node(k).l1_distance(&exact) <= 1e-6);
            }
        }
    }
}

#[test]
fn forward_flow_conserves_mass_for_time_varying_rates() {
    let field = FnRates::new(3, 4.0, |t: f64, i: usize, out: &mut [f64]| {
        for (j, o) in out.iter_mut().enumerate() {
            *o = 1.0 + (3.0 * t + (i + 2 * j) as f64).sin().abs() * 3.0;
        }
    });
    let p0 = SimplexPoint::vertex(3, 2).unwrap();
    let flow = forward_flow(&field, &p0, TimeGrid::new(2.0, 400).unwrap()).unwrap();
    for p in flow.points() {
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        assert!(p.weights().iter().all(|&w| w >= 0.0));
    }
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[test]
fn simulated_marginals_approach_the_flow() {
    let field = FnRates::new(3, 3.0, |t: f64, i: usize, out: &mut [f64]| {
        for (j, o) in out.iter_mut().enumerate() {
            *o = 0.5 + (t + i as f64 * 0.7 + j as f64).cos().powi(2) * 2.5;
        }
    });
    let p0 = SimplexPoint::new(vec![0.7, 0.2, 0.1]).unwrap();
    let flow = forward_flow(&field, &p0, TimeGrid::new(1.0, 1000).unwrap()).unwrap();
    let target = flow.terminal().weights().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mut mean_tv = Vec::new();
    for n in [500usize, 8000] {
        let reps = 20;
        let mut total = 0.0;
        for _ in 0..reps {
            let mut counts = [0.0; 3];
            for _ in 0..n {
                counts[simulate_path(&field, &p0, 1.0, &mut rng).unwrap().final_state()] += 1.0;
            }
            let freq: Vec<f64> = counts.iter().map(|c| c / n as f64).collect();
            total += tv(&freq, &target);
        }
        let avg = total / reps as f64;
        // E|p_hat_i - p_i| <= sqrt(p_i (1 - p_i) / n).
        let bound: f64 = target.iter().map(|p| (p * (1.0 - p) / n as f64).sqrt()).sum::<f64>() * 0.5;
        assert!(avg <= bound * 1.25, "n={n}: {avg} vs {bound}");
        mean_tv.push(avg);
    }
    // Sixteen times the paths: the error shrinks by about four.
    let ratio = mean_tv[0] / mean_tv[1];
    assert!(ratio > 2.5 && ratio < 6.5, "{ratio}");
}

#[test]
fn zero_horizon_paths_do_not_move() {
    let field = ConstantRates::new(build_reference_generator(4, None, false).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let p0 = SimplexPoint::vertex(4, 3).unwrap();
    let path = simulate_path(&field, &p0, 0.0, &mut rng).unwrap();
    assert_eq!((path.initial_state(), path.n_jumps()), (3, 0));
}
