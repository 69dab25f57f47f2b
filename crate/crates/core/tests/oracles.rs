//! End-to-end values on the bundled three-bus case, frozen from hand
//! derivations where possible and from verified runs otherwise.

use approx::assert_abs_diff_eq;
use moment_opf::lasserre::*;
use moment_opf::netmodel::{build_admittance, Network};
use moment_opf::report::Workflow;
use moment_opf::sdpcore::{Settings, SolveStatus};
use num_complex::Complex64;

fn pinned(order: usize, p1: Option<f64>, p2: Option<f64>) -> RelaxationResult {
    let net = Network::case3();
    let y = build_admittance(&net).unwrap();
    let mut problem = build_relaxation(&net, &y, order, &RelaxationOptions::default()).unwrap();
    for (bus, p) in [(1, p1), (2, p2)] {
        if let Some(p) = p {
            problem = pin_injection(&problem, bus, p).unwrap();
        }
    }
    solve_relaxation(&problem, &Settings::default(), DEFAULT_RANK_TOL)
}

#[test]
fn first_order_bound_is_the_completed_square() {
    // c1^2 = 4 c2 c0 for both generators, so each cost vanishes at -c1 / 2 c2
    let r = Workflow::default().solve(&Network::case3(), 1).unwrap();
    assert_abs_diff_eq!(r.lower_bound_usd_per_hr.unwrap(), 0.0, epsilon = 1.0);
    assert_abs_diff_eq!(r.lifted_generation[0].p_mw, 650.0, epsilon = 0.01);
    assert_abs_diff_eq!(r.lifted_generation[1].p_mw, 35.0, epsilon = 0.01);
    assert!(!r.rank.condition_met);
}

/// Least eigenvalue of the cost cone at bus 2 when `L_y{f_P2}` is zero and
/// the epigraph variable holds `omega` $/hr.
fn cone_at_zero_output(omega: f64) -> f64 {
    let net = Network::case3();
    let y = build_admittance(&net).unwrap();
    let p = build_relaxation(&net, &y, 1, &RelaxationOptions::default()).unwrap();
    let f = apply_lift(&p.active_injection(2), &p.map).unwrap();
    // scale the quadratic moments of some voltage point until f_P2 vanishes
    let v = [
        Complex64::new(1.0, 0.0),
        Complex64::from_polar(1.3, -0.6),
        Complex64::from_polar(1.0, -0.6),
    ];
    let lift = p.map.lift(&p.layout.point(&v));
    let mut ys = vec![0.0; p.conic.num_vars];
    ys[0] = 1.0;
    let base = f.evaluate(&ys);
    for k in 1..p.map.len() {
        ys[k] = lift[k];
    }
    let slope = f.evaluate(&ys) - base;
    for k in 1..p.map.len() {
        ys[k] *= -base / slope;
    }
    assert!(f.evaluate(&ys).abs() < 1e-12);
    for &(bus, k) in &p.epigraph {
        ys[k] = if bus == 2 { omega / p.cost_scale } else { 0.0 };
    }
    let (_, block) = p.blocks_of(Constraint::CostCone).find(|(o, _)| o.bus == Some(2)).unwrap();
    let m = block.evaluate(&ys);
    nalgebra::SymmetricEigen::new(m).eigenvalues.min()
}

#[test]
fn cost_cone_at_zero_output_needs_the_full_cost() {
    // 500 * 35^2
    assert!(cone_at_zero_output(612_500.0) >= -1e-9);
    assert!(cone_at_zero_output(612_499.0) < 0.0);
}

#[test]
fn cost_cone_is_tight_at_the_unconstrained_minimum() {
    let r = pinned(1, Some(650.0), Some(35.0));
    assert_eq!(r.status, SolveStatus::Optimal);
    for (_, w) in &r.epigraph {
        assert_abs_diff_eq!(*w, 0.0, epsilon = 1.0);
    }
}

#[test]
fn second_order_optimum() {
    let r = Workflow::default().solve(&Network::case3(), 2).unwrap();
    assert_abs_diff_eq!(r.lower_bound_usd_per_hr.unwrap(), 16086.395, epsilon = 0.01);
    let x = r.extracted.unwrap();
    assert_abs_diff_eq!(x.generators[0].p_mw, 537.1983, epsilon = 1e-3);
    assert_abs_diff_eq!(x.generators[1].p_mw, 32.4069, epsilon = 1e-3);
    let v: Vec<(f64, f64)> = x.voltages.iter().map(|v| (v.magnitude_pu, v.angle_deg)).collect();
    assert_abs_diff_eq!(v[0].0, 1.0, epsilon = 1e-8);
    assert_eq!(v[0].1, 0.0);
    assert_abs_diff_eq!(v[1].0, 1.3, epsilon = 1e-8);
    assert_abs_diff_eq!(v[1].1, -35.038, epsilon = 1e-3);
    assert_abs_diff_eq!(v[2].0, 1.03815, epsilon = 1e-5);
    assert_abs_diff_eq!(v[2].1, -33.545, epsilon = 1e-3);
}

#[test]
fn third_order_confirms_the_second() {
    let r = Workflow::default().solve(&Network::case3(), 3).unwrap();
    assert!(r.rank.condition_met);
    assert_abs_diff_eq!(r.lower_bound_usd_per_hr.unwrap(), 16086.399, epsilon = 0.01);
}

#[test]
fn interior_of_the_hull_is_feasible_but_not_rank_one() {
    let r = pinned(2, Some(650.0), Some(35.0));
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(!r.rank.rank_one, "{:?}", r.rank);
}

#[test]
fn far_corner_is_infeasible_at_order_two() {
    assert_eq!(pinned(2, Some(1200.0), Some(50.0)).status, SolveStatus::Infeasible);
}

#[test]
fn pin_outside_the_limits_is_infeasible() {
    assert_eq!(pinned(1, Some(0.0), None).status, SolveStatus::Infeasible);
}

#[test]
fn pin_at_the_optimum_recovers_its_cost() {
    // the curve itself has no interior; step just inside the hull
    let r = pinned(2, Some(537.1983175), Some(32.4068646 + 1e-4));
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(r.rank.rank_one);
    assert_abs_diff_eq!(r.objective, 16103.84, epsilon = 50.0);
    assert_abs_diff_eq!(r.objective, 16086.7, epsilon = 0.5);
}

#[test]
fn penalized_first_order_point() {
    let (r, pen) = Workflow::default().penalize(&Network::case3(), 33.76e3).unwrap();
    assert!(r.rank.condition_met);
    let x = r.extracted.unwrap();
    assert_abs_diff_eq!(x.generators[0].p_mw, 404.58, epsilon = 0.01);
    assert_abs_diff_eq!(x.generators[1].p_mw, 50.0, epsilon = 0.01);
    assert_abs_diff_eq!(pen.feasible_cost_usd_per_hr.unwrap(), 172_731.8, epsilon = 0.5);
    assert_abs_diff_eq!(pen.worst_case_optimality_gap_pct.unwrap(), 973.78, epsilon = 0.05);
}
