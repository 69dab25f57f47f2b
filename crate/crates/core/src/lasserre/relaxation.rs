use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::basis::{apply_lift, LiftedVariableMap, MonomialBasis};
use crate::error::{Error, Result};
use crate::netmodel::{AdmittanceMatrix, Network};
use crate::poly::{
    active_injection, generation_cost, reactive_injection, voltage_magnitude_sq, Polynomial, VarLayout,
};
use crate::sdpcore::{AffineExpr, ConicProblem, LmiBlock};

/// Which OPF constraint a PSD block encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Moment,
    PMin,
    PMax,
    QMin,
    QMax,
    VMin,
    VMax,
    /// `V_d >= 0` at the reference bus (the angle is 0, not 180 degrees).
    ReferenceSign,
    /// Rotated cone for a quadratic generator cost (first order only).
    CostCone,
    /// `omega >= c1 P + c0` when `c2 = 0`.
    LinearCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockOrigin {
    pub constraint: Constraint,
    /// 1-based bus, absent for the moment matrix.
    pub bus: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationOptions {
    /// Adds the localizing constraint `V_d,ref >= 0`.
    pub reference_half_plane: bool,
    /// At order 1, model quadratic costs through auxiliary epigraph variables
    /// and cone constraints. Without it the quartic objective needs order 2.
    pub cone_costs: bool,
    /// Restricts each PSD block to the complement of the null space forced by
    /// the equality constraints, which restores a strictly feasible interior.
    pub facial_reduction: bool,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        RelaxationOptions { reference_half_plane: true, cone_costs: true, facial_reduction: true }
    }
}

/// An assembled order-`order` moment relaxation.
///
/// Lifted variables `y_alpha` occupy conic variables `0..map.len()`; the
/// first-order epigraph variables follow.
#[derive(Debug, Clone)]
pub struct MomentProblem {
    pub order: usize,
    /// Per-unit copy of the input network.
    pub network: Network,
    pub admittance: AdmittanceMatrix,
    pub layout: VarLayout,
    pub basis: MonomialBasis,
    pub map: LiftedVariableMap,
    pub conic: ConicProblem,
    pub origins: Vec<BlockOrigin>,
    /// `(bus, conic variable)` of each epigraph variable.
    pub epigraph: Vec<(usize, usize)>,
    /// Costs enter the conic objective divided by this factor.
    pub cost_scale: f64,
    /// Reactive penalty in $/(MVAr hr) when the objective has been penalized.
    pub penalty: Option<f64>,
    /// Pinned active injections `(bus, MW)`.
    pub pins: Vec<(usize, f64)>,
}

impl MomentProblem {
    pub fn is_penalized(&self) -> bool {
        self.penalty.is_some_and(|e| e > 0.0)
    }

    pub fn count_blocks(&self, constraint: Constraint) -> usize {
        self.origins.iter().filter(|o| o.constraint == constraint).count()
    }

    pub fn blocks_of(&self, constraint: Constraint) -> impl Iterator<Item = (&BlockOrigin, &LmiBlock)> {
        self.origins
            .iter()
            .zip(&self.conic.blocks)
            .filter(move |(o, _)| o.constraint == constraint)
    }

    pub fn active_injection(&self, bus: usize) -> Polynomial {
        active_injection(&self.network, &self.admittance, &self.layout, bus - 1)
    }

    pub fn reactive_injection(&self, bus: usize) -> Polynomial {
        reactive_injection(&self.network, &self.admittance, &self.layout, bus - 1)
    }

    /// `sum f_Ci` in $/hr.
    pub fn total_cost(&self) -> Polynomial {
        let mut total = Polynomial::zero(self.layout.num_vars());
        for bus in self.network.generator_buses() {
            let c = generation_cost(&self.network, &self.admittance, &self.layout, bus - 1)
                .expect("generator bus");
            total = total.add(&c).expect("same layout");
        }
        total
    }
}

/// `M_order{y}`: entry `(i, j)` is `y_{alpha_i + alpha_j}`.
pub fn moment_matrix(basis: &MonomialBasis, map: &LiftedVariableMap) -> LmiBlock {
    let n = basis.len();
    let mut blk = LmiBlock::new(n, "moment");
    for i in 0..n {
        for j in i..n {
            let k = map.product_index(basis.get(i), basis.get(j));
            blk.add_coeff(k, i, j, 1.0);
        }
    }
    blk
}

/// Order of the localizing matrix for a constraint of the given degree.
pub fn localizing_order(order: usize, degree: usize) -> Result<usize> {
    let half = degree.div_ceil(2);
    if half > order {
        return Err(Error::OrderTooLow { order, degree });
    }
    Ok(order - half)
}

/// `L_y{h x x^T}` over `basis`.
pub fn localizing_matrix(h: &Polynomial, basis: &MonomialBasis, map: &LiftedVariableMap) -> Result<LmiBlock> {
    if h.degree() + 2 * basis.order() > map.max_degree() {
        return Err(Error::OrderTooLow { order: map.max_degree() / 2, degree: h.degree() });
    }
    let n = basis.len();
    let mut blk = LmiBlock::new(n, "localizing");
    for i in 0..n {
        for j in i..n {
            let entry = h.mul_monomial(&basis.get(i).mul(basis.get(j)));
            blk.add_affine(i, j, &apply_lift(&entry, map)?);
        }
    }
    Ok(blk)
}

struct Builder<'a> {
    order: usize,
    map: &'a LiftedVariableMap,
    conic: ConicProblem,
    origins: Vec<BlockOrigin>,
    /// Localizing basis and multiplier degree of each polynomial block.
    shapes: Vec<Option<(MonomialBasis, usize)>>,
    /// Equality polynomials `h` with the largest `|beta|` used for `L_y{h x^beta} = 0`.
    equalities: Vec<(Polynomial, usize)>,
}

impl Builder<'_> {
    fn push_block(&mut self, mut blk: LmiBlock, constraint: Constraint, bus: Option<usize>) {
        blk.label = match bus {
            Some(b) => format!("{constraint:?}@{b}"),
            None => format!("{constraint:?}"),
        };
        self.conic.add_block(blk);
        self.origins.push(BlockOrigin { constraint, bus });
        self.shapes.push(None);
    }

    fn add_inequality(&mut self, h: &Polynomial, constraint: Constraint, bus: usize) -> Result<()> {
        let k = localizing_order(self.order, h.degree())?;
        let basis = MonomialBasis::new(h.nvars(), k);
        let blk = localizing_matrix(h, &basis, self.map)?;
        self.push_block(blk, constraint, Some(bus));
        *self.shapes.last_mut().expect("just pushed") = Some((basis, h.degree()));
        Ok(())
    }

    /// `h = 0` as the entrywise equalities `L_y{h x^beta} = 0` for every
    /// `beta` with `deg h + |beta| <= 2 * order`.
    fn add_equality(&mut self, h: &Polynomial) -> Result<()> {
        localizing_order(self.order, h.degree())?;
        let reach = 2 * self.order - h.degree();
        for m in MonomialBasis::new(h.nvars(), reach).monomials() {
            self.conic.add_equality(&apply_lift(&h.mul_monomial(m), self.map)?);
        }
        self.equalities.push((h.clone(), reach));
        Ok(())
    }

    /// For a block over basis `B` with multiplier degree `deg_g`, every
    /// `h x^beta` that fits in `B` and whose products with `B` are covered by
    /// the equalities spans a null direction of the block at every feasible
    /// point. The block is replaced by its compression onto the complement.
    fn reduce_faces(&mut self) {
        let mut keep = vec![true; self.conic.blocks.len()];
        for (b, shape) in self.shapes.iter().enumerate() {
            let Some((basis, deg_g)) = shape else { continue };
            let d = basis.order();
            let mut kernel: Vec<Vec<f64>> = Vec::new();
            for (h, reach) in &self.equalities {
                let dh = h.degree();
                if dh > d {
                    continue;
                }
                for beta in MonomialBasis::new(basis.nvars(), d - dh).monomials() {
                    if deg_g + d + beta.degree() > *reach {
                        continue;
                    }
                    let mut v = vec![0.0; basis.len()];
                    for (m, c) in h.mul_monomial(beta).terms() {
                        v[basis.index_of(m).expect("degree within basis")] = c;
                    }
                    kernel.push(v);
                }
            }
            if kernel.is_empty() {
                continue;
            }
            let n = basis.len();
            let k = DMatrix::from_fn(n, kernel.len(), |i, j| kernel[j][i]);
            let eig = SymmetricEigen::new(&k * k.transpose());
            let top = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
            let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= 1e-10 * top).collect();
            if cols.is_empty() {
                keep[b] = false;
                continue;
            }
            let complement = eig.eigenvectors.select_columns(&cols);
            let blk = &mut self.conic.blocks[b];
            *blk = blk.congruence(&complement, 1e-14);
        }
        let mut it = keep.iter();
        self.conic.blocks.retain(|_| *it.next().expect("same length"));
        let mut it = keep.iter();
        self.origins.retain(|_| *it.next().expect("same length"));
    }

    fn add_bounds(
        &mut self,
        h: &Polynomial,
        lo: Option<f64>,
        hi: Option<f64>,
        kinds: (Constraint, Constraint),
        bus: usize,
    ) -> Result<()> {
        if let (Some(l), Some(u)) = (lo, hi) {
            if (u - l).abs() <= 1e-12 * l.abs().max(1.0) {
                return self.add_equality(&h.add_constant(-l));
            }
        }
        if let Some(l) = lo {
            self.add_inequality(&h.add_constant(-l), kinds.0, bus)?;
        }
        if let Some(u) = hi {
            self.add_inequality(&h.scale(-1.0).add_constant(u), kinds.1, bus)?;
        }
        Ok(())
    }
}

/// Assembles the order-`order` moment relaxation of the OPF problem.
pub fn build_relaxation(
    net: &Network,
    admittance: &AdmittanceMatrix,
    order: usize,
    options: &RelaxationOptions,
) -> Result<MomentProblem> {
    if !(1..=3).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    net.validate()?;
    let pu = net.to_per_unit();
    let layout = VarLayout::for_network(&pu);
    let nvars = layout.num_vars();
    let basis = MonomialBasis::new(nvars, order);
    let map = LiftedVariableMap::new(nvars, order);

    let mut b = Builder {
        order,
        map: &map,
        conic: ConicProblem::new(map.len()),
        origins: Vec::new(),
        shapes: Vec::new(),
        equalities: Vec::new(),
    };
    // y_0 = 1
    b.conic.add_equality(&AffineExpr { constant: -1.0, terms: vec![(0, 1.0)] });
    b.push_block(moment_matrix(&basis, &map), Constraint::Moment, None);
    b.shapes[0] = Some((basis.clone(), 0));

    for i in 0..pu.n_bus() {
        let bus = i + 1;
        let fp = active_injection(&pu, admittance, &layout, i);
        let fq = reactive_injection(&pu, admittance, &layout, i);
        let fv = voltage_magnitude_sq(&layout, i);
        let (p_lim, q_lim) = match pu.generator_at(bus) {
            Some(g) => ((Some(g.p_min), Some(g.p_max)), (g.q_min, g.q_max)),
            None => ((Some(0.0), Some(0.0)), (Some(0.0), Some(0.0))),
        };
        b.add_bounds(&fp, p_lim.0, p_lim.1, (Constraint::PMin, Constraint::PMax), bus)?;
        b.add_bounds(&fq, q_lim.0, q_lim.1, (Constraint::QMin, Constraint::QMax), bus)?;
        let rec = &pu.buses[i];
        let v_lo = (rec.v_min > 0.0).then(|| rec.v_min * rec.v_min);
        b.add_bounds(&fv, v_lo, Some(rec.v_max * rec.v_max), (Constraint::VMin, Constraint::VMax), bus)?;
    }

    if options.reference_half_plane {
        let r = layout.ref_bus();
        let vd = Polynomial::var(nvars, layout.vd(r));
        let rec = &pu.buses[r];
        if layout.eliminates_ref() && rec.v_min == rec.v_max {
            // zero angle and a fixed magnitude pin V_d outright; the half-plane
            // form would leave this as an implicit equality with no interior
            b.add_equality(&vd.add_constant(-rec.v_max))?;
        } else {
            b.add_inequality(&vd, Constraint::ReferenceSign, r + 1)?;
        }
    }

    let cost_scale = pu.generators.iter().map(|g| g.c0).sum::<f64>().abs().max(1.0);
    let mut epigraph = Vec::new();
    if order == 1 && options.cone_costs {
        for bus in pu.generator_buses() {
            let g = pu.generator_at(bus).expect("generator bus").clone();
            if g.c2 < 0.0 {
                return Err(Error::NonConvexCost { bus, c2: g.c2 });
            }
            let omega = b.conic.add_var();
            b.conic.objective[omega] = 1.0;
            epigraph.push((bus, omega));
            let lp = apply_lift(&active_injection(&pu, admittance, &layout, bus - 1), &map)?;
            // t = omega - c1 L{f_P} - c0, all divided by the cost scale
            let t = AffineExpr::var(omega)
                .plus(&lp.scale(-g.c1 / cost_scale))
                .plus(&AffineExpr::constant(-g.c0 / cost_scale));
            if g.c2 == 0.0 {
                let mut blk = LmiBlock::new(1, "");
                blk.add_affine(0, 0, &t);
                b.push_block(blk, Constraint::LinearCost, Some(bus));
            } else {
                let u = AffineExpr::constant(1.0).plus(&t);
                let v = AffineExpr::constant(1.0).plus(&t.scale(-1.0));
                let w = lp.scale(2.0 * (g.c2 / cost_scale).sqrt());
                let mut blk = LmiBlock::new(3, "");
                blk.add_affine(0, 0, &u);
                blk.add_affine(1, 1, &u);
                blk.add_affine(2, 2, &u);
                blk.add_affine(0, 1, &v);
                blk.add_affine(0, 2, &w);
                b.push_block(blk, Constraint::CostCone, Some(bus));
            }
        }
    } else {
        let mut total = Polynomial::zero(nvars);
        for bus in pu.generator_buses() {
            total = total.add(&generation_cost(&pu, admittance, &layout, bus - 1)?)?;
        }
        let obj = apply_lift(&total, &map)?;
        for (k, v) in obj.terms {
            b.conic.objective[k] += v / cost_scale;
        }
    }

    if options.facial_reduction {
        b.reduce_faces();
    }
    let Builder { conic, origins, .. } = b;
    Ok(MomentProblem {
        order,
        network: pu,
        admittance: admittance.clone(),
        layout,
        basis,
        map,
        conic,
        origins,
        epigraph,
        cost_scale,
        penalty: None,
        pins: Vec::new(),
    })
}

/// Appends `L_y{f_Pi} = p` for the generator at `bus` (1-based, `p` in MW).
pub fn pin_injection(problem: &MomentProblem, bus: usize, p_mw: f64) -> Result<MomentProblem> {
    if problem.network.generator_at(bus).is_none() {
        return Err(Error::NoGenerator(bus));
    }
    let mut out = problem.clone();
    let lp = apply_lift(&problem.active_injection(bus), &problem.map)?;
    out.conic
        .add_equality(&lp.plus(&AffineExpr::constant(-p_mw / problem.network.s_base)));
    out.pins.push((bus, p_mw));
    Ok(out)
}

/// Adds `epsilon * sum_G L_y{f_Qi}` (epsilon in $/(MVAr hr)) to a first-order
/// objective. The result is no longer a relaxation.
pub fn add_reactive_penalty(problem: &MomentProblem, epsilon: f64) -> Result<MomentProblem> {
    if !(epsilon >= 0.0) {
        return Err(Error::NegativePenalty(epsilon));
    }
    if problem.order != 1 {
        return Err(Error::PenaltyRequiresFirstOrder);
    }
    let mut out = problem.clone();
    let weight = epsilon * problem.network.s_base / problem.cost_scale;
    if weight != 0.0 {
        for bus in problem.network.generator_buses() {
            let lq = apply_lift(&problem.reactive_injection(bus), &problem.map)?;
            for (k, v) in lq.terms {
                out.conic.objective[k] += weight * v;
            }
        }
    }
    out.penalty = Some(epsilon);
    Ok(out)
}
