use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::poly::{Monomial, Polynomial};
use crate::sdpcore::AffineExpr;

/// All monomials of degree at most `order`, in graded-lexicographic order.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    nvars: usize,
    order: usize,
    monomials: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

fn enumerate(nvars: usize, max_degree: usize) -> Vec<Monomial> {
    fn rec(pos: usize, left: usize, cur: &mut Vec<u16>, out: &mut Vec<Monomial>) {
        if pos == cur.len() {
            out.push(Monomial::from_exponents(cur));
            return;
        }
        for e in 0..=left {
            cur[pos] = e as u16;
            rec(pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    rec(0, max_degree, &mut vec![0; nvars], &mut out);
    out.sort();
    out
}

/// `C(n + k, k)`.
pub fn basis_size(nvars: usize, order: usize) -> usize {
    (1..=order).fold(1usize, |acc, i| acc * (nvars + i) / i)
}

impl MonomialBasis {
    pub fn new(nvars: usize, order: usize) -> Self {
        let monomials = enumerate(nvars, order);
        let index = monomials.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        MonomialBasis { nvars, order, monomials, index }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn get(&self, i: usize) -> &Monomial {
        &self.monomials[i]
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Numeric basis vector `x_order` at a point.
    pub fn evaluate(&self, point: &[f64]) -> Vec<f64> {
        self.monomials.iter().map(|m| m.evaluate(point)).collect()
    }
}

/// Index of every lifted variable `y_alpha` with `|alpha| <= 2 * order`.
#[derive(Debug, Clone)]
pub struct LiftedVariableMap {
    monomials: MonomialBasis,
}

impl LiftedVariableMap {
    pub fn new(nvars: usize, relaxation_order: usize) -> Self {
        LiftedVariableMap { monomials: MonomialBasis::new(nvars, 2 * relaxation_order) }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn nvars(&self) -> usize {
        self.monomials.nvars()
    }

    pub fn max_degree(&self) -> usize {
        self.monomials.order()
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.monomials.index_of(m)
    }

    pub fn monomial(&self, k: usize) -> &Monomial {
        self.monomials.get(k)
    }

    /// Index of `y_{a+b}`.
    pub fn product_index(&self, a: &Monomial, b: &Monomial) -> usize {
        self.index_of(&a.mul(b)).expect("product within lifted degree")
    }

    /// `y_alpha = x^alpha` at a numeric point.
    pub fn lift(&self, point: &[f64]) -> Vec<f64> {
        self.monomials.evaluate(point)
    }
}

/// `L_y{h} = sum h_alpha y_alpha` as an affine expression in the lifted variables.
pub fn apply_lift(h: &Polynomial, map: &LiftedVariableMap) -> Result<AffineExpr> {
    if h.nvars() != map.nvars() {
        return Err(Error::DimensionMismatch { expected: map.nvars(), got: h.nvars() });
    }
    if h.degree() > map.max_degree() {
        return Err(Error::OrderTooLow { order: map.max_degree() / 2, degree: h.degree() });
    }
    let terms = h
        .terms()
        .map(|(m, c)| (map.index_of(m).expect("degree checked"), c))
        .collect();
    Ok(AffineExpr { constant: 0.0, terms }.canonical())
}
