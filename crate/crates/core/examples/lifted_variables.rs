//! The lifting functional and moment matrices on a two-bus example.
//!
//! `h = V_d2^2 + V_q2^2 - 0.81` is a lower voltage limit at bus 2; lifting
//! replaces each monomial with its own variable `y_alpha`.

use moment_opf::lasserre::{apply_lift, localizing_matrix, moment_matrix, LiftedVariableMap, MonomialBasis};
use moment_opf::poly::{Monomial, Polynomial};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // x = (V_d1, V_d2, V_q1, V_q2)
    let n = 4;
    let mut h = Polynomial::constant(n, -0.81);
    h.add_term(Monomial::from_exponents(&[0, 2, 0, 0]), 1.0);
    h.add_term(Monomial::from_exponents(&[0, 0, 0, 2]), 1.0);

    let map = LiftedVariableMap::new(n, 1);
    let lifted = apply_lift(&h, &map)?;
    for (k, c) in &lifted.terms {
        println!("{c:+.2} * y{:?}", map.monomial(*k).exponents());
    }

    // second order: the moment matrix spans degree <= 2, the localizing
    // matrix of the quadratic h only degree <= 1
    let map2 = LiftedVariableMap::new(n, 2);
    let m2 = moment_matrix(&MonomialBasis::new(n, 2), &map2);
    let loc = localizing_matrix(&h, &MonomialBasis::new(n, 1), &map2)?;
    println!("M_2 is {0}x{0}, the localizing matrix of h is {1}x{1}", m2.size, loc.size);
    Ok(())
}
