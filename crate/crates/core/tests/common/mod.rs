#![allow(dead_code)]

use moment_opf::lasserre::MomentProblem;
use moment_opf::netmodel::{build_admittance, bus_injections, Branch, Bus, Generator, Network};
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;

/// A two-bus network built around a known operating point, so `v` is
/// feasible by construction. Bus 1 is the reference with `|V_1| = 1`.
pub struct TwoBus {
    pub net: Network,
    pub v: Vec<Complex64>,
    /// Generator outputs at `v` in MW.
    pub p_gen: [f64; 2],
}

pub fn random_two_bus<R: Rng>(rng: &mut R) -> TwoBus {
    let r = rng.gen_range(0.01..0.2);
    let x = rng.gen_range(0.05..0.4);
    let mag = rng.gen_range(0.92..1.08);
    let ang = rng.gen_range(-0.3..0.05);
    let v = vec![Complex64::new(1.0, 0.0), Complex64::from_polar(mag, ang)];
    let load = rng.gen_range(20.0..150.0);

    let mut net = Network {
        s_base: 100.0,
        ref_bus: 1,
        buses: vec![
            Bus { id: 1, p_load: 0.0, q_load: 0.0, v_min: 1.0, v_max: 1.0 },
            Bus { id: 2, p_load: load, q_load: rng.gen_range(0.0..30.0), v_min: 0.9, v_max: 1.1 },
        ],
        generators: Vec::new(),
        branches: vec![Branch { from: 1, to: 2, r, x }],
        per_unit: false,
    };
    let y = build_admittance(&net).expect("valid branch");
    let s = bus_injections(&y, &v);
    let p_gen = [s[0].re * 100.0, s[1].re * 100.0 + load];
    for (k, &p) in p_gen.iter().enumerate() {
        net.generators.push(Generator {
            bus: k + 1,
            p_min: p - rng.gen_range(5.0..60.0),
            p_max: p + rng.gen_range(5.0..60.0),
            q_min: None,
            q_max: None,
            c2: rng.gen_range(0.01..1.0),
            c1: rng.gen_range(-20.0..40.0),
            c0: rng.gen_range(0.0..500.0),
        });
    }
    net.validate().expect("constructed network is valid");
    TwoBus { net, v, p_gen }
}

/// Generation cost at per-bus outputs in MW.
pub fn dispatch_cost(net: &Network, p_gen_mw: &[f64]) -> f64 {
    net.generators.iter().map(|g| g.cost(p_gen_mw[g.bus - 1])).sum()
}

pub struct LiftCheck {
    /// Least block eigenvalue relative to the block's coefficient size.
    pub min_eig: f64,
    pub equality_residual: f64,
    /// Objective at the lift in $/hr.
    pub objective: f64,
}

/// Evaluates `problem` at the lift of `v`; epigraph variables are set to the
/// exact generator costs at the active outputs `p_gen_mw`.
pub fn check_lift(problem: &MomentProblem, v: &[Complex64], p_gen_mw: &[f64]) -> LiftCheck {
    let x = problem.layout.point(v);
    let mut y = problem.map.lift(&x);
    y.resize(problem.conic.num_vars, 0.0);
    for &(bus, k) in &problem.epigraph {
        let g = problem.network.generator_at(bus).expect("generator");
        y[k] = g.cost(p_gen_mw[bus - 1] / problem.network.s_base) / problem.cost_scale;
    }
    let min_eig = problem
        .conic
        .blocks
        .iter()
        .map(|b| {
            let m = b.evaluate(&y);
            let e = SymmetricEigen::new(m).eigenvalues.min();
            e / b.max_abs().max(1.0)
        })
        .fold(f64::INFINITY, f64::min);
    LiftCheck {
        min_eig,
        equality_residual: problem.conic.equality_residual(&y),
        objective: problem.conic.objective_value(&y) * problem.cost_scale,
    }
}

/// The case3 optimum as found by the order-2 relaxation (per-bus MW).
pub const CASE3_OPTIMUM_MW: [f64; 3] = [537.1983, 32.4069, 0.0];
