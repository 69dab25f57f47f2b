//! Sparse real multivariate polynomials over the rectangular voltage
//! components, and the OPF polynomials built from a network.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::netmodel::{AdmittanceMatrix, Network};

/// Exponent vector of a monomial.
///
/// Ordered graded-lexicographically: lower total degree first, then the
/// exponent vector in descending lexicographic order, so that `x0^2` precedes
/// `x0*x1` and `x0` precedes `x1`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Box<[u16]>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars].into_boxed_slice())
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e.into_boxed_slice())
    }

    pub fn from_exponents(exps: &[u16]) -> Self {
        Monomial(exps.to_vec().into_boxed_slice())
    }

    pub fn exponents(&self) -> &[u16] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.nvars(), other.nvars());
        Monomial(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn evaluate(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x^")?;
        for e in self.0.iter() {
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// `sum_alpha h_alpha x^alpha` with no stored zero coefficients.
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, i), 1.0);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            if m.nvars() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, got: m.nvars() });
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coefficient(&Monomial::one(self.nvars))
    }

    /// Maximum total degree; zero for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Accumulates `c * m`, dropping the entry if it cancels to zero.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = *o.get() + c;
                if sum == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    fn check_dims(&self, other: &Polynomial) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: other.nvars });
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dims(other)?;
        let mut out = Polynomial::zero(self.nvars);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (ma, &c) in &self.terms {
            out.add_term(ma.mul(m), c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, &c) in &self.terms {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn add_constant(&self, c: f64) -> Polynomial {
        let mut out = self.clone();
        out.add_term(Monomial::one(self.nvars), c);
        out
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: point.len() });
        }
        Ok(self.terms.iter().map(|(m, &c)| c * m.evaluate(point)).sum())
    }
}

/// Maps buses to polynomial variables.
///
/// Variables are ordered `V_d1 .. V_dn` followed by `V_q` of every bus,
/// except that the reference bus's `V_q` is dropped when eliminated (its
/// value is pinned to zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    n_bus: usize,
    ref_bus: usize,
    eliminate_ref: bool,
}

impl VarLayout {
    /// `ref_bus` is 0-based.
    pub fn new(n_bus: usize, ref_bus: usize, eliminate_ref: bool) -> Self {
        assert!(ref_bus < n_bus);
        VarLayout { n_bus, ref_bus, eliminate_ref }
    }

    pub fn for_network(net: &Network) -> Self {
        Self::new(net.n_bus(), net.ref_bus - 1, true)
    }

    pub fn full(n_bus: usize) -> Self {
        Self::new(n_bus, 0, false)
    }

    pub fn n_bus(&self) -> usize {
        self.n_bus
    }

    pub fn ref_bus(&self) -> usize {
        self.ref_bus
    }

    pub fn eliminates_ref(&self) -> bool {
        self.eliminate_ref
    }

    pub fn num_vars(&self) -> usize {
        if self.eliminate_ref {
            2 * self.n_bus - 1
        } else {
            2 * self.n_bus
        }
    }

    pub fn vd(&self, bus: usize) -> usize {
        bus
    }

    pub fn vq(&self, bus: usize) -> Option<usize> {
        if !self.eliminate_ref {
            return Some(self.n_bus + bus);
        }
        match bus.cmp(&self.ref_bus) {
            Ordering::Less => Some(self.n_bus + bus),
            Ordering::Equal => None,
            Ordering::Greater => Some(self.n_bus + bus - 1),
        }
    }

    /// Real point from complex voltages; the reference `V_q` is dropped when
    /// eliminated.
    pub fn point(&self, v: &[Complex64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_bus);
        let mut x = vec![0.0; self.num_vars()];
        for (i, vi) in v.iter().enumerate() {
            x[self.vd(i)] = vi.re;
            if let Some(q) = self.vq(i) {
                x[q] = vi.im;
            }
        }
        x
    }

    pub fn voltages(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.num_vars());
        (0..self.n_bus)
            .map(|i| Complex64::new(x[self.vd(i)], self.vq(i).map_or(0.0, |q| x[q])))
            .collect()
    }

    fn vd_poly(&self, bus: usize) -> Polynomial {
        Polynomial::var(self.num_vars(), self.vd(bus))
    }

    fn vq_poly(&self, bus: usize) -> Polynomial {
        match self.vq(bus) {
            Some(q) => Polynomial::var(self.num_vars(), q),
            None => Polynomial::zero(self.num_vars()),
        }
    }
}

fn load_pu(net: &Network, bus: usize) -> (f64, f64) {
    let b = &net.buses[bus];
    if net.per_unit {
        (b.p_load, b.q_load)
    } else {
        (b.p_load / net.s_base, b.q_load / net.s_base)
    }
}

/// Real and imaginary parts of `(Y V)_i` as linear polynomials.
fn injected_current(y: &AdmittanceMatrix, layout: &VarLayout, i: usize) -> (Polynomial, Polynomial) {
    let n = layout.num_vars();
    let mut re = Polynomial::zero(n);
    let mut im = Polynomial::zero(n);
    for k in 0..layout.n_bus() {
        let (g, b) = (y.g[(i, k)], y.b[(i, k)]);
        if g == 0.0 && b == 0.0 {
            continue;
        }
        let vd = layout.vd_poly(k);
        let vq = layout.vq_poly(k);
        // G V_d - B V_q  and  B V_d + G V_q
        re = re.add(&vd.scale(g)).unwrap().add(&vq.scale(-b)).unwrap();
        im = im.add(&vd.scale(b)).unwrap().add(&vq.scale(g)).unwrap();
    }
    (re, im)
}

/// Active generation at bus `i` (0-based): load plus net injection, in per unit.
pub fn active_injection(net: &Network, y: &AdmittanceMatrix, layout: &VarLayout, i: usize) -> Polynomial {
    let (re, im) = injected_current(y, layout, i);
    let vd = layout.vd_poly(i);
    let vq = layout.vq_poly(i);
    let p = vd.mul(&re).unwrap().add(&vq.mul(&im).unwrap()).unwrap();
    p.add_constant(load_pu(net, i).0)
}

/// Reactive generation at bus `i` (0-based), in per unit.
pub fn reactive_injection(net: &Network, y: &AdmittanceMatrix, layout: &VarLayout, i: usize) -> Polynomial {
    let (re, im) = injected_current(y, layout, i);
    let vd = layout.vd_poly(i);
    let vq = layout.vq_poly(i);
    let q = vq.mul(&re).unwrap().sub(&vd.mul(&im).unwrap()).unwrap();
    q.add_constant(load_pu(net, i).1)
}

/// `V_di^2 + V_qi^2`.
pub fn voltage_magnitude_sq(layout: &VarLayout, i: usize) -> Polynomial {
    let vd = layout.vd_poly(i);
    let vq = layout.vq_poly(i);
    vd.mul(&vd).unwrap().add(&vq.mul(&vq).unwrap()).unwrap()
}

/// `c2 f_P^2 + c1 f_P + c0` in $/hr for the generator at bus `i` (0-based).
pub fn generation_cost(net: &Network, y: &AdmittanceMatrix, layout: &VarLayout, i: usize) -> Result<Polynomial> {
    let pu = net.to_per_unit();
    let gen = pu.generator_at(i + 1).ok_or(Error::NoGenerator(i + 1))?;
    let fp = active_injection(net, y, layout, i);
    let quad = fp.mul(&fp)?.scale(gen.c2);
    Ok(quad.add(&fp.scale(gen.c1))?.add_constant(gen.c0))
}
