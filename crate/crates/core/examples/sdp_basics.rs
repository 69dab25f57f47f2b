//! The conic solver on its own: small LMI problems with known answers and
//! the phase-1 feasibility check.

use moment_opf::sdpcore::{certify_feasibility, solve, AffineExpr, ConicProblem, LmiBlock, Settings};

/// `[[a, 1], [1, b]]` with `a`, `b` conic variables.
fn arrow(a: usize, b: usize) -> LmiBlock {
    let mut blk = LmiBlock::new(2, "arrow");
    blk.add_coeff(a, 0, 0, 1.0);
    blk.add_constant(0, 1, 1.0);
    blk.add_coeff(b, 1, 1, 1.0);
    blk
}

fn main() {
    let settings = Settings::default();

    // minimize x s.t. [[x, 1], [1, x]] >= 0
    let mut p = ConicProblem::new(1);
    p.objective[0] = 1.0;
    p.add_block(arrow(0, 0));
    let s = solve(&p, &settings);
    println!("arrow:   {:?} x = {:.9} ({} iterations)", s.status, s.y[0], s.iterations);

    // minimize y1 s.t. [[y0, 1], [1, y1]] >= 0, y0 = 2
    let mut p = ConicProblem::new(2);
    p.objective[1] = 1.0;
    p.add_block(arrow(0, 1));
    p.add_equality(&AffineExpr::var(0).plus(&AffineExpr::constant(-2.0)));
    let s = solve(&p, &settings);
    println!("pinned:  {:?} y1 = {:.9}", s.status, s.y[1]);

    // y - 5 >= 0 and y = 4 cannot both hold
    let mut p = ConicProblem::new(1);
    let mut blk = LmiBlock::new(1, "bound");
    blk.add_coeff(0, 0, 0, 1.0);
    blk.add_constant(0, 0, -5.0);
    p.add_block(blk);
    p.add_equality(&AffineExpr::var(0).plus(&AffineExpr::constant(-4.0)));
    println!("clash:   {:?}, phase-1 {:?}", solve(&p, &settings).status, certify_feasibility(&p, &settings));
}
