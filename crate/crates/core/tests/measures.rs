use mfg_core::{
    empirical_controls, empirical_states, pushforward_policy, w1, w1_exact_lp, ControlBox,
    DiscreteMeasure, SimplexPoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_measure<R: Rng>(l: usize, max_atoms: usize, rng: &mut R) -> DiscreteMeasure {
    let n = rng.random_range(1..=max_atoms);
    let atoms: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..l).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    DiscreteMeasure::new(atoms, raw.iter().map(|w| w / s).collect()).unwrap()
}

fn dirac(x: f64) -> DiscreteMeasure {
    DiscreteMeasure::dirac(vec![x]).unwrap()
}

#[test]
fn small_examples() {
    assert_eq!(w1(&dirac(0.0), &dirac(1.0)).unwrap(), 1.0);
    let half = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    assert!((w1(&half, &dirac(0.0)).unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(w1(&half, &half).unwrap(), 0.0);
}

#[test]
fn line_formula_matches_transport_problem() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let a = random_measure(1, 12, &mut rng);
        let b = random_measure(1, 12, &mut rng);
        let cdf = w1(&a, &b).unwrap();
        let lp = w1_exact_lp(&a, &b).unwrap();
        assert!((cdf - lp).abs() <= 1e-10, "{cdf} vs {lp}");
    }
}

#[test]
fn metric_axioms_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for l in [1, 2, 3] {
        for _ in 0..200 / 3 + 1 {
            let a = random_measure(l, 6, &mut rng);
            let b = random_measure(l, 6, &mut rng);
            let c = random_measure(l, 6, &mut rng);
            let ab = w1(&a, &b).unwrap();
            assert_eq!(ab, w1(&b, &a).unwrap());
            assert!(ab >= 0.0);
            assert!(w1(&a, &a).unwrap() <= 1e-12);
            assert!(ab <= w1(&a, &c).unwrap() + w1(&c, &b).unwrap() + 1e-10);
        }
    }
}

#[test]
fn plane_distance_between_diracs_is_euclidean() {
    let a = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
    let b = DiscreteMeasure::dirac(vec![3.0, 4.0]).unwrap();
    assert!((w1(&a, &b).unwrap() - 5.0).abs() < 1e-12);
}

#[test]
fn empirical_measures_count() {
    let p = empirical_states(&[0, 0, 1, 2], 3).unwrap();
    assert_eq!(p.weights(), &[0.5, 0.25, 0.25]);
    let nu = empirical_controls(&[vec![1.0], vec![1.0], vec![2.0]]).unwrap();
    assert_eq!(nu.len(), 2);
    assert!((nu.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn pushforward_moves_with_the_state_distribution() {
    let a = vec![vec![0.2], vec![1.5], vec![0.9]];
    let p = SimplexPoint::new(vec![0.3, 0.3, 0.4]).unwrap();
    let base = pushforward_policy(&a, &p).unwrap();
    assert_eq!(w1(&base, &base).unwrap(), 0.0);
    let bx = ControlBox::interval(0.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..100 {
        let q = SimplexPoint::normalized((0..3).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let d = w1(&base, &pushforward_policy(&a, &q).unwrap()).unwrap();
        assert!(d <= bx.diameter() * p.l1_distance(&q) / 2.0 + 1e-12);
    }
    // Along a segment towards a fixed point the distance grows with the l1 gap.
    let target = SimplexPoint::vertex(3, 1).unwrap();
    let mut last = 0.0;
    for s in 1..=10 {
        let q = p.mix(&target, s as f64 / 10.0);
        let d = w1(&base, &pushforward_policy(&a, &q).unwrap()).unwrap();
        assert!(d >= last - 1e-12);
        last = d;
    }
}
