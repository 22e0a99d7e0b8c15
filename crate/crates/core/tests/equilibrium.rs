use std::sync::Arc;

use mfg_core::scenarios::{monotone_congestion, quadratic_two_state};
use mfg_core::{
    apply_phi, best_response_gap, consistency_residual, evaluate_policy_cost, picard_solve,
    ControlFlow, DiscreteMeasure, LinearTerminalCost, PicardOptions, PolicySurface, SimplexFlow,
    SimplexPoint, TimeGrid,
};

fn grid() -> TimeGrid {
    TimeGrid::new(1.0, 200).unwrap()
}

#[test]
fn decoupled_model_converges_immediately() {
    let spec = quadratic_two_state().unwrap();
    let sol = picard_solve(&spec, grid(), None, PicardOptions { damping: 1.0, ..Default::default() }).unwrap();
    assert!(sol.converged);
    assert!(sol.trace.len() <= 3, "{:?}", sol.trace);
    let (s, c) = consistency_residual(&spec, &sol).unwrap();
    assert!(s < 1e-12 && c < 1e-12);
}

#[test]
fn monotone_congestion_certifies() {
    let spec = monotone_congestion(1.0).unwrap();
    let opts = PicardOptions::default();
    let sol = picard_solve(&spec, grid(), None, opts).unwrap();
    assert!(sol.converged, "{:?}", sol.trace.last());
    let (s, c) = consistency_residual(&spec, &sol).unwrap();
    assert!(s + c < opts.tol);
    assert_eq!(consistency_residual(&spec, &sol).unwrap(), (s, c));

    let gap = best_response_gap(&spec, &sol, 30, 8).unwrap();
    assert!(gap.gap <= 1e-9, "{gap:?}");
    assert!(gap.min_margin >= -1e-9);

    // A constant corner is strictly worse against the equilibrium flows.
    let corner = PolicySurface::constant(*sol.p_flow.grid(), 2, spec.control_box(), &[2.0]).unwrap();
    let j = evaluate_policy_cost(&spec, &corner, &sol.p_flow, &sol.nu_flow).unwrap();
    for i in 0..2 {
        assert!(j.initial()[i] > sol.value.initial()[i] + 1e-3);
    }
}

#[test]
fn two_starts_reach_the_same_equilibrium() {
    let spec = monotone_congestion(1.0).unwrap();
    let g = grid();
    let a = picard_solve(&spec, g, None, PicardOptions::default()).unwrap();
    let alt = (
        SimplexFlow::constant(g, SimplexPoint::new(vec![0.1, 0.9]).unwrap()),
        ControlFlow::constant(g, DiscreteMeasure::dirac(vec![2.0]).unwrap()),
    );
    let b = picard_solve(&spec, g, Some(alt), PicardOptions::default()).unwrap();
    assert!(a.converged && b.converged);
    assert!(a.p_flow.sup_l1_distance(&b.p_flow) < 1e-5);
}

#[test]
fn full_damping_is_plain_picard() {
    let spec = monotone_congestion(1.0).unwrap();
    let g = TimeGrid::new(1.0, 50).unwrap();
    let opts = PicardOptions { damping: 1.0, tol: 0.0, max_iter: 2 };
    let sol = picard_solve(&spec, g, None, opts).unwrap();
    assert!(!sol.converged);
    let (p0, nu0) = mfg_core::default_init(&spec, g).unwrap();
    let x1 = apply_phi(&spec, &p0, &nu0).unwrap();
    let x2 = apply_phi(&spec, &x1.p_flow, &x1.nu_flow).unwrap();
    assert_eq!(sol.p_flow, x2.p_flow);
    assert_eq!(sol.nu_flow, x2.nu_flow);
}

#[test]
fn corrupted_flow_shows_in_the_residual() {
    let spec = monotone_congestion(1.0).unwrap();
    let mut sol = picard_solve(&spec, grid(), None, PicardOptions::default()).unwrap();
    let mut points: Vec<SimplexPoint> = (0..=200).map(|k| sol.p_flow.node(k).clone()).collect();
    let w = points[100].weights().to_vec();
    let shifted = if w[0] > 0.5 { vec![w[0] - 0.1, w[1] + 0.1] } else { vec![w[0] + 0.1, w[1] - 0.1] };
    points[100] = SimplexPoint::new(shifted).unwrap();
    sol.p_flow = SimplexFlow::new(*sol.p_flow.grid(), points).unwrap();
    let (s, _) = consistency_residual(&spec, &sol).unwrap();
    assert!(s >= 0.05, "{s}");
}

#[test]
fn iterates_stay_valid() {
    let spec = monotone_congestion(2.0)
        .unwrap()
        .to_builder()
        .terminal_cost(Arc::new(LinearTerminalCost::congestion(vec![0.3, 0.0], 2.0)))
        .build()
        .unwrap();
    let sol = picard_solve(&spec, TimeGrid::new(1.0, 100).unwrap(), None, PicardOptions::default()).unwrap();
    for k in 0..=100 {
        let p = sol.p_flow.node(k);
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(sol.nu_flow.node(k).within(spec.control_box()));
    }
}
