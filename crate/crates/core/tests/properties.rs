use mfg_core::{
    build_reference_generator, forward_flow, psi_matrix, psi_pinv_apply, psi_quadratic_form,
    seminorm_sq, w1, ConstantRates, DiscreteMeasure, Jump, PathRecord, RateMatrix, SimplexPoint,
    TimeGrid,
};
use nalgebra::DVector;
use proptest::prelude::*;

fn vector(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, m)
}

fn measure(l: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((prop::collection::vec(-2.0..2.0f64, l), 0.05..1.0f64), 1..6).prop_map(
        |pairs| {
            let s: f64 = pairs.iter().map(|(_, w)| w).sum();
            let (atoms, weights): (Vec<_>, Vec<_>) = pairs.into_iter().map(|(a, w)| (a, w / s)).unzip();
            DiscreteMeasure::new(atoms, weights).unwrap()
        },
    )
}

fn simplex(m: usize) -> impl Strategy<Value = SimplexPoint> {
    prop::collection::vec(0.01..1.0f64, m).prop_map(|w| SimplexPoint::normalized(w).unwrap())
}

proptest! {
    #[test]
    fn seminorm_is_the_psi_quadratic_form((m, i, z) in (2usize..7).prop_flat_map(|m| (Just(m), 0..m, vector(m)))) {
        let q0 = build_reference_generator(m, None, false).unwrap();
        let a = seminorm_sq(i, &z).unwrap();
        let b = psi_quadratic_form(i, &q0, &z).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn psi_inverts_on_zero_sum_vectors((m, i, q) in (2usize..7).prop_flat_map(|m| (Just(m), 0..m, vector(m)))) {
        let q0 = build_reference_generator(m, None, false).unwrap();
        let psi = psi_matrix(i, &q0).unwrap();
        let mean = q.iter().sum::<f64>() / m as f64;
        let centred: Vec<f64> = q.iter().map(|x| x - mean).collect();
        // Build psi^+ column by column from the closed-form images of e_j - e_i.
        let mut image = DVector::<f64>::zeros(m);
        for (j, c) in centred.iter().enumerate() {
            if j != i {
                image += DVector::from_vec(psi_pinv_apply(i, j, m).unwrap()) * *c;
            }
        }
        let back = &psi * image;
        for (x, y) in back.iter().zip(&centred) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn path_csv_round_trips(x0 in 0usize..4, steps in prop::collection::vec((0.001..0.5f64, 1usize..4), 0..20)) {
        let mut t = 0.0;
        let mut state = x0;
        let mut jumps = Vec::new();
        for (dt, shift) in steps {
            t += dt;
            state = (state + shift) % 4;
            jumps.push(Jump { time: t, state });
        }
        let path = PathRecord::new(x0, jumps, t + 0.25).unwrap();
        prop_assert_eq!(PathRecord::from_csv(&path.to_csv()).unwrap(), path);
    }

    #[test]
    fn w1_is_exactly_symmetric((a, b) in (1usize..4).prop_flat_map(|l| (measure(l), measure(l)))) {
        prop_assert_eq!(w1(&a, &b).unwrap(), w1(&b, &a).unwrap());
    }

    #[test]
    fn forward_flow_stays_on_the_simplex(
        rates in prop::collection::vec(0.0..4.0f64, 9),
        p0 in simplex(3),
    ) {
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { 0.0 } else { rates[3 * i + j] }).collect())
            .collect();
        let q = RateMatrix::from_off_diagonal(&rows).unwrap();
        let flow = forward_flow(&ConstantRates::new(q), &p0, TimeGrid::new(1.0, 50).unwrap()).unwrap();
        for p in flow.points() {
            prop_assert!((p.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            prop_assert!(p.weights().iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn mixtures_stay_valid(a in measure(1), b in measure(1), theta in 0.0..=1.0f64, p in simplex(4), q in simplex(4)) {
        let mix = a.mix(&b, theta).unwrap();
        prop_assert!((mix.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(mix.weights().iter().all(|&w| w > 0.0));
        let pq = p.mix(&q, theta);
        prop_assert!((pq.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        // The mean of a mixture is the mixture of the means.
        let want = (1.0 - theta) * a.mean()[0] + theta * b.mean()[0];
        prop_assert!((mix.mean()[0] - want).abs() <= 1e-9);
    }
}
