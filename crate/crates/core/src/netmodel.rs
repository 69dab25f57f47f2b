//! Power network description and nodal admittance matrix.
//!
//! Powers are stored in MW/MVAr as read from the input file; [`Network::to_per_unit`]
//! produces the per-unit copy used by every polynomial builder.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default voltage-magnitude window for buses that do not state one.
pub const DEFAULT_V_MIN: f64 = 0.8;
pub const DEFAULT_V_MAX: f64 = 1.4;

const CASE3_JSON: &str = include_str!("../data/case3.json");

fn default_s_base() -> f64 {
    100.0
}

fn default_ref_bus() -> usize {
    1
}

fn default_v_min() -> f64 {
    DEFAULT_V_MIN
}

fn default_v_max() -> f64 {
    DEFAULT_V_MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    /// 1-based bus index.
    pub id: usize,
    #[serde(default)]
    pub p_load: f64,
    #[serde(default)]
    pub q_load: f64,
    #[serde(default = "default_v_min")]
    pub v_min: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// Absent reactive limits mean the generator is unconstrained in Q.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<f64>,
    #[serde(default)]
    pub c2: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub c0: f64,
}

impl Generator {
    /// Evaluates the quadratic cost at an active output expressed in the
    /// generator's own unit system.
    pub fn cost(&self, p: f64) -> f64 {
        self.c2 * p * p + self.c1 * p + self.c0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
}

impl Branch {
    /// Series admittance `1 / (r + jx)`.
    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(1.0, 0.0) / Complex64::new(self.r, self.x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    #[serde(default = "default_s_base")]
    pub s_base: f64,
    #[serde(default = "default_ref_bus")]
    pub ref_bus: usize,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub branches: Vec<Branch>,
    /// Set once powers and cost coefficients have been converted to per unit.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub per_unit: bool,
}

/// `Y = G + jB`, dense and indexed by 0-based bus position.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl AdmittanceMatrix {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        Complex64::new(self.g[(i, k)], self.b[(i, k)])
    }
}

impl Network {
    /// The three-bus system with the quadratic costs used throughout the
    /// examples and acceptance tests.
    pub fn case3() -> Self {
        Self::from_json(CASE3_JSON).expect("bundled case3.json is valid")
    }

    pub fn case3_json() -> &'static str {
        CASE3_JSON
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let net: Network = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::network(if matches!(path.as_str(), "." | "?") { "(document)".into() } else { path }, e.into_inner().to_string())
        })?;
        net.validate()?;
        Ok(net)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    /// Checks structural invariants; errors carry the offending field path.
    pub fn validate(&self) -> Result<()> {
        if self.buses.is_empty() {
            return Err(Error::network("buses", "network has no buses"));
        }
        if !(self.s_base > 0.0) {
            return Err(Error::network("s_base", "must be positive"));
        }
        let n = self.buses.len();
        let mut seen = HashSet::new();
        for (k, bus) in self.buses.iter().enumerate() {
            let path = format!("buses[{k}]");
            if bus.id == 0 || bus.id > n {
                return Err(Error::network(
                    format!("{path}.id"),
                    format!("bus ids must lie in 1..={n}"),
                ));
            }
            if !seen.insert(bus.id) {
                return Err(Error::network(format!("{path}.id"), "duplicate bus id"));
            }
            if !(bus.v_min >= 0.0) {
                return Err(Error::network(format!("{path}.v_min"), "must be >= 0"));
            }
            if !(bus.v_min <= bus.v_max) {
                return Err(Error::network(
                    format!("{path}.v_max"),
                    "must be >= v_min",
                ));
            }
        }
        if self.ref_bus == 0 || self.ref_bus > n {
            return Err(Error::network("ref_bus", "does not reference an existing bus"));
        }
        let mut gen_buses = HashSet::new();
        for (k, gen) in self.generators.iter().enumerate() {
            let path = format!("generators[{k}]");
            if gen.bus == 0 || gen.bus > n {
                return Err(Error::network(format!("{path}.bus"), "unknown bus"));
            }
            if !gen_buses.insert(gen.bus) {
                return Err(Error::network(
                    format!("{path}.bus"),
                    "at most one generator per bus is supported",
                ));
            }
            if !(gen.p_min <= gen.p_max) {
                return Err(Error::network(format!("{path}.p_max"), "must be >= p_min"));
            }
            if let (Some(lo), Some(hi)) = (gen.q_min, gen.q_max) {
                if !(lo <= hi) {
                    return Err(Error::network(format!("{path}.q_max"), "must be >= q_min"));
                }
            }
            if !(gen.c2 >= 0.0) {
                return Err(Error::network(
                    format!("{path}.c2"),
                    "quadratic cost coefficient must be >= 0",
                ));
            }
        }
        for (k, br) in self.branches.iter().enumerate() {
            let path = format!("branches[{k}]");
            for (name, bus) in [("from", br.from), ("to", br.to)] {
                if bus == 0 || bus > n {
                    return Err(Error::network(format!("{path}.{name}"), "unknown bus"));
                }
            }
            if br.from == br.to {
                return Err(Error::network(format!("{path}.to"), "branch endpoints coincide"));
            }
            if !(br.r * br.r + br.x * br.x > 0.0) {
                return Err(Error::ZeroImpedance {
                    index: k,
                    from: br.from,
                    to: br.to,
                });
            }
        }
        Ok(())
    }

    /// Bus record by 1-based id.
    pub fn bus(&self, id: usize) -> &Bus {
        self.buses
            .iter()
            .find(|b| b.id == id)
            .unwrap_or_else(|| panic!("bus {id} not in network"))
    }

    /// Generator attached to a 1-based bus id, if any.
    pub fn generator_at(&self, bus: usize) -> Option<&Generator> {
        self.generators.iter().find(|g| g.bus == bus)
    }

    /// Generator buses in ascending order.
    pub fn generator_buses(&self) -> Vec<usize> {
        let mut buses: Vec<usize> = self.generators.iter().map(|g| g.bus).collect();
        buses.sort_unstable();
        buses
    }

    /// Divides every MW/MVAr quantity by `s_base` and rescales the cost
    /// coefficients so that costs stay in $/hr. Calling it twice is a no-op.
    pub fn to_per_unit(&self) -> Network {
        if self.per_unit {
            return self.clone();
        }
        let s = self.s_base;
        let mut net = self.clone();
        for bus in &mut net.buses {
            bus.p_load /= s;
            bus.q_load /= s;
        }
        for gen in &mut net.generators {
            gen.p_min /= s;
            gen.p_max /= s;
            gen.q_min = gen.q_min.map(|q| q / s);
            gen.q_max = gen.q_max.map(|q| q / s);
            gen.c2 *= s * s;
            gen.c1 *= s;
        }
        net.per_unit = true;
        net
    }
}

/// Assembles `Y` from the branch series impedances (no shunts, no taps).
pub fn build_admittance(net: &Network) -> Result<AdmittanceMatrix> {
    let n = net.n_bus();
    let mut g = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for (k, br) in net.branches.iter().enumerate() {
        if !(br.r * br.r + br.x * br.x > 0.0) {
            return Err(Error::ZeroImpedance {
                index: k,
                from: br.from,
                to: br.to,
            });
        }
        let y = br.series_admittance();
        let (f, t) = (br.from - 1, br.to - 1);
        g[(f, f)] += y.re;
        b[(f, f)] += y.im;
        g[(t, t)] += y.re;
        b[(t, t)] += y.im;
        g[(f, t)] -= y.re;
        b[(f, t)] -= y.im;
        g[(t, f)] -= y.re;
        b[(t, f)] -= y.im;
    }
    Ok(AdmittanceMatrix { g, b })
}

/// Complex power `V_i conj((Y V)_i)` injected at each bus, per unit.
pub fn bus_injections(y: &AdmittanceMatrix, v: &[Complex64]) -> Vec<Complex64> {
    (0..y.dim())
        .map(|i| {
            let current: Complex64 = (0..y.dim()).map(|k| y.get(i, k) * v[k]).sum();
            v[i] * current.conj()
        })
        .collect()
}

/// Residuals of an operating point against the network equations and limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    /// Largest `|S_i(V) - (S_Gi - S_Di)|` component over buses, per unit.
    pub mismatch_pu: f64,
    /// Largest violation of a generator or voltage limit, per unit.
    pub violation_pu: f64,
}

impl Network {
    /// Checks voltages and generator outputs (MW / MVAr, one entry per bus,
    /// zero where there is no generator) against power balance and limits.
    pub fn check_point(&self, y: &AdmittanceMatrix, v: &[Complex64], p_gen_mw: &[f64], q_gen_mvar: &[f64]) -> PointCheck {
        let s = self.s_base;
        let inj = bus_injections(y, v);
        let mut mismatch = 0.0f64;
        let mut violation = 0.0f64;
        for bus in &self.buses {
            let k = bus.id - 1;
            let (pg, qg) = (p_gen_mw[k] / s, q_gen_mvar[k] / s);
            mismatch = mismatch
                .max((inj[k].re - (pg - bus.p_load / s)).abs())
                .max((inj[k].im - (qg - bus.q_load / s)).abs());
            let vm = v[k].norm();
            violation = violation.max(bus.v_min - vm).max(vm - bus.v_max);
            match self.generator_at(bus.id) {
                Some(g) => {
                    violation = violation.max((g.p_min - p_gen_mw[k]) / s).max((p_gen_mw[k] - g.p_max) / s);
                    if let Some(lo) = g.q_min {
                        violation = violation.max((lo - q_gen_mvar[k]) / s);
                    }
                    if let Some(hi) = g.q_max {
                        violation = violation.max((q_gen_mvar[k] - hi) / s);
                    }
                }
                None => mismatch = mismatch.max(pg.abs()).max(qg.abs()),
            }
        }
        PointCheck { mismatch_pu: mismatch, violation_pu: violation.max(0.0) }
    }
}
