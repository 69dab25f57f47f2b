//! Feasible-space sweep over the outputs of two generators.
//!
//! Each grid point pins both active injections, classifies the pinned
//! relaxation with a phase-1 check and, when feasible, records its optimum.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasserre::{build_relaxation, pin_injection, MomentProblem, RelaxationOptions};
use crate::netmodel::{build_admittance, Network};
use crate::sdpcore::{certify_feasibility, solve, Settings};

pub const CSV_HEADER: [&str; 7] =
    ["pg1_mw", "pg2_mw", "order1_status", "order1_cost", "order2_status", "order2_cost", "true_cost"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Inclusive MW range of the first generator (lowest bus id).
    pub p1: (f64, f64),
    /// Inclusive MW range of the second generator.
    pub p2: (f64, f64),
    /// Grid spacing in MW.
    pub step: f64,
    /// Relaxation orders to run, each 1 or 2.
    pub orders: Vec<usize>,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl SweepSpec {
    /// Both generator ranges taken from their limits, both orders, 0.5 MW step.
    pub fn from_network(net: &Network) -> Result<Self> {
        let (g1, g2) = swept_generators(net)?;
        let range = |bus: usize| {
            let g = net.generator_at(bus).expect("generator bus");
            (g.p_min, g.p_max)
        };
        Ok(SweepSpec { p1: range(g1), p2: range(g2), step: 0.5, orders: vec![1, 2], jobs: 0 })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::argument("step", format!("must be positive, got {}", self.step)));
        }
        for (name, (lo, hi)) in [("p1", self.p1), ("p2", self.p2)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::argument(name, format!("empty range {lo}:{hi}")));
            }
        }
        if self.orders.is_empty() || self.orders.iter().any(|o| !matches!(o, 1 | 2)) {
            return Err(Error::argument("orders", format!("expected a subset of {{1, 2}}, got {:?}", self.orders)));
        }
        Ok(())
    }

    fn axis(&self, (lo, hi): (f64, f64)) -> Vec<f64> {
        let n = ((hi - lo) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| lo + k as f64 * self.step).collect()
    }

    /// Grid points in row-major order (p1 outer, p2 inner).
    pub fn grid(&self) -> Vec<(f64, f64)> {
        let p2 = self.axis(self.p2);
        self.axis(self.p1)
            .into_iter()
            .flat_map(|a| p2.iter().map(move |&b| (a, b)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Feasible,
    Infeasible,
    /// Phase-1 found the cell feasible but the solve did not converge, or
    /// the problem could not be assembled.
    Error,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Feasible => "feasible",
            CellStatus::Infeasible => "infeasible",
            CellStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderCell {
    pub status: CellStatus,
    /// Relaxed cost in $/hr, present only for feasible cells.
    pub cost: Option<f64>,
    /// Phase-1 margin (positive inside the feasible set).
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub p1: f64,
    pub p2: f64,
    pub order1: Option<OrderCell>,
    pub order2: Option<OrderCell>,
    /// Generation cost at `(p1, p2)` in $/hr.
    pub true_cost: f64,
}

impl SweepCell {
    pub fn order(&self, order: usize) -> Option<&OrderCell> {
        match order {
            1 => self.order1.as_ref(),
            2 => self.order2.as_ref(),
            _ => None,
        }
    }

    pub fn is_feasible(&self, order: usize) -> bool {
        self.order(order).is_some_and(|c| c.status == CellStatus::Feasible)
    }
}

fn swept_generators(net: &Network) -> Result<(usize, usize)> {
    match net.generator_buses()[..] {
        [a, b, ..] => Ok((a, b)),
        _ => Err(Error::network("generators", "the sweep needs at least two generators")),
    }
}

fn evaluate(base: &MomentProblem, buses: (usize, usize), p: (f64, f64), settings: &Settings) -> OrderCell {
    let pinned = pin_injection(base, buses.0, p.0).and_then(|q| pin_injection(&q, buses.1, p.1));
    let Ok(problem) = pinned else {
        return OrderCell { status: CellStatus::Error, cost: None, margin: f64::NAN };
    };
    let (feasible, margin) = certify_feasibility(&problem.conic, settings);
    if !feasible {
        return OrderCell { status: CellStatus::Infeasible, cost: None, margin };
    }
    let sol = solve(&problem.conic, settings);
    if !sol.is_optimal() {
        return OrderCell { status: CellStatus::Error, cost: None, margin };
    }
    let cost = if problem.epigraph.is_empty() {
        sol.objective * problem.cost_scale
    } else {
        problem.epigraph.iter().map(|&(_, k)| sol.y[k]).sum::<f64>() * problem.cost_scale
    };
    OrderCell { status: CellStatus::Feasible, cost: Some(cost), margin }
}

/// Evaluates every grid point of `spec`. Individual solver failures are
/// recorded in the cell; only invalid input aborts the sweep.
pub fn run_sweep(net: &Network, spec: &SweepSpec, settings: &Settings) -> Result<Vec<SweepCell>> {
    spec.validate()?;
    let buses = swept_generators(net)?;
    let y = build_admittance(net)?;
    let options = RelaxationOptions::default();
    let base1 = spec.orders.contains(&1).then(|| build_relaxation(net, &y, 1, &options)).transpose()?;
    let base2 = spec.orders.contains(&2).then(|| build_relaxation(net, &y, 2, &options)).transpose()?;
    let g1 = net.generator_at(buses.0).expect("generator bus");
    let g2 = net.generator_at(buses.1).expect("generator bus");

    let grid = spec.grid();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Pool(e.to_string()))?;
    let cells = pool.install(|| {
        grid.par_iter()
            .map(|&p| SweepCell {
                p1: p.0,
                p2: p.1,
                order1: base1.as_ref().map(|b| evaluate(b, buses, p, settings)),
                order2: base2.as_ref().map(|b| evaluate(b, buses, p, settings)),
                true_cost: g1.cost(p.0) + g2.cost(p.1),
            })
            .collect()
    });
    Ok(cells)
}

/// True iff every order-2 feasible cell is also order-1 feasible.
pub fn feasible_region_inclusion(cells: &[SweepCell]) -> bool {
    inclusion_violations(cells).is_empty()
}

/// Cells feasible at order 2 but not at order 1.
pub fn inclusion_violations(cells: &[SweepCell]) -> Vec<&SweepCell> {
    cells
        .iter()
        .filter(|c| c.is_feasible(2) && c.order1.is_some() && !c.is_feasible(1))
        .collect()
}

/// Order-2 feasible cell with the smallest relaxed cost.
pub fn order2_argmin(cells: &[SweepCell]) -> Option<&SweepCell> {
    cells
        .iter()
        .filter_map(|c| Some((c, c.order2?.cost?)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(c, _)| c)
}

/// Formats `x` with six significant digits, in fixed notation where it stays
/// readable and scientific notation otherwise.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if !(-5..6).contains(&exp) {
        return sci;
    }
    let fixed = format!("{:.*}", (5 - exp).max(0) as usize, x);
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

fn fmt_mw(x: f64) -> String {
    // grid coordinates are multiples of the step; trim float noise
    format_sig6((x * 1e9).round() / 1e9)
}

/// Writes the cells as CSV with the fixed header.
pub fn write_csv<W: Write>(cells: &[SweepCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in cells {
        let status = |o: Option<&OrderCell>| o.map_or(String::new(), |o| o.status.as_str().to_string());
        let cost = |o: Option<&OrderCell>| o.and_then(|o| o.cost).map_or(String::new(), format_sig6);
        w.write_record([
            fmt_mw(c.p1),
            fmt_mw(c.p2),
            status(c.order(1)),
            cost(c.order(1)),
            status(c.order(2)),
            cost(c.order(2)),
            format_sig6(c.true_cost),
        ])
        ?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts_match_the_ranges() {
        let spec = SweepSpec { p1: (300.0, 1200.0), p2: (0.0, 50.0), step: 0.5, orders: vec![1], jobs: 1 };
        assert_eq!(spec.grid().len(), 1801 * 101);
        let coarse = SweepSpec { step: 5.0, ..spec };
        let g = coarse.grid();
        assert_eq!(g.len(), 181 * 11);
        assert_eq!(g[0], (300.0, 0.0));
        assert_eq!(g[1], (300.0, 5.0));
        assert_eq!(*g.last().unwrap(), (1200.0, 50.0));
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig6(16086.39517), "16086.4");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1_035_000.0), "1.03500e6");
        assert_eq!(format_sig6(-3.2e-7), "-3.20000e-7");
        assert_eq!(format_sig6(99999.96), "100000");
        assert_eq!(format_sig6(12.5), "12.5");
    }

    #[test]
    fn detector_flags_a_synthetic_violation() {
        let feasible = OrderCell { status: CellStatus::Feasible, cost: Some(1.0), margin: 0.1 };
        let infeasible = OrderCell { status: CellStatus::Infeasible, cost: None, margin: -0.1 };
        let mut cells = vec![SweepCell { p1: 0.0, p2: 0.0, order1: Some(feasible), order2: Some(feasible), true_cost: 1.0 }];
        assert!(feasible_region_inclusion(&cells));
        cells[0].order1 = Some(infeasible);
        assert!(!feasible_region_inclusion(&cells));
    }

    #[test]
    fn rejects_bad_specs() {
        let ok = SweepSpec { p1: (0.0, 1.0), p2: (0.0, 1.0), step: 1.0, orders: vec![2], jobs: 1 };
        assert!(ok.validate().is_ok());
        assert!(SweepSpec { step: 0.0, ..ok.clone() }.validate().is_err());
        assert!(SweepSpec { p1: (2.0, 1.0), ..ok.clone() }.validate().is_err());
        assert!(SweepSpec { orders: vec![3], ..ok }.validate().is_err());
    }
}
