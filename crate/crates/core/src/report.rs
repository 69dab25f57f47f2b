//! Solve and penalization workflows with a serializable run report.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lasserre::{add_reactive_penalty, build_relaxation, solve_relaxation, RelaxationOptions, RelaxationResult};
use crate::netmodel::{build_admittance, Network, PointCheck};
use crate::sdpcore::{Settings, SolveStatus};

pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_RANK_UNMET: i32 = 3;
pub const EXIT_SOLVER_FAILURE: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

/// Process exit code for a solve outcome.
pub fn exit_code(status: SolveStatus, rank_one: bool) -> i32 {
    match status {
        SolveStatus::Optimal if rank_one => EXIT_OPTIMAL,
        SolveStatus::Optimal => EXIT_RANK_UNMET,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::Unbounded | SolveStatus::NumericalFailure => EXIT_SOLVER_FAILURE,
    }
}

/// Lowercase hex SHA-256 of the input bytes.
pub fn input_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusPower {
    pub bus: usize,
    pub p_mw: f64,
    pub q_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusVoltage {
    pub bus: usize,
    pub magnitude_pu: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    /// `lambda_2 / lambda_1` of the moment matrix.
    pub ratio: Option<f64>,
    pub tolerance: f64,
    pub condition_met: bool,
}

/// Operating point recovered from a rank-one moment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedPoint {
    pub generators: Vec<BusPower>,
    pub voltages: Vec<BusVoltage>,
    pub cost_usd_per_hr: f64,
    pub check: PointCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub relative_gap: Option<f64>,
    pub equality_residual: Option<f64>,
    pub min_block_eigenvalue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub order: usize,
    pub status: SolveStatus,
    pub penalized: bool,
    pub objective_usd_per_hr: Option<f64>,
    /// Absent for penalized or unsolved problems.
    pub lower_bound_usd_per_hr: Option<f64>,
    pub rank: RankReport,
    /// `L_y{f_P}` and `L_y{f_Q}` at the generator buses.
    pub lifted_generation: Vec<BusPower>,
    pub extracted: Option<ExtractedPoint>,
    pub solve_seconds: f64,
    pub stats: SolverSummary,
}

impl OrderReport {
    pub fn exit_code(&self) -> i32 {
        exit_code(self.status, self.rank.condition_met)
    }

    fn from_result(net: &Network, r: &RelaxationResult, rank_tol: f64, seconds: f64) -> Self {
        let gens = net.generator_buses();
        let optimal = r.status == SolveStatus::Optimal;
        let objective = optimal.then_some(r.objective).and_then(finite);
        let lifted_generation = gens
            .iter()
            .map(|&b| BusPower { bus: b, p_mw: r.lifted_p_mw[b - 1], q_mvar: r.lifted_q_mvar[b - 1] })
            .collect();
        let extracted = match (&r.voltages, &r.extracted_p_mw, &r.extracted_q_mvar, r.extracted_cost) {
            (Some(v), Some(p), Some(q), Some(cost)) => {
                let y = build_admittance(net).expect("validated network");
                let mut p_gen = vec![0.0; net.n_bus()];
                let mut q_gen = vec![0.0; net.n_bus()];
                for &b in &gens {
                    p_gen[b - 1] = p[b - 1];
                    q_gen[b - 1] = q[b - 1];
                }
                let voltages = v
                    .iter()
                    .enumerate()
                    .map(|(i, z)| BusVoltage {
                        bus: i + 1,
                        magnitude_pu: z.norm(),
                        angle_deg: if i + 1 == net.ref_bus { 0.0 } else { z.arg().to_degrees() },
                    })
                    .collect();
                Some(ExtractedPoint {
                    generators: gens.iter().map(|&b| BusPower { bus: b, p_mw: p[b - 1], q_mvar: q[b - 1] }).collect(),
                    voltages,
                    cost_usd_per_hr: cost,
                    check: net.check_point(&y, v, &p_gen, &q_gen),
                })
            }
            _ => None,
        };
        OrderReport {
            order: r.order,
            status: r.status,
            penalized: r.penalized,
            objective_usd_per_hr: objective,
            lower_bound_usd_per_hr: objective.filter(|_| !r.penalized),
            rank: RankReport { ratio: finite(r.rank.ratio), tolerance: rank_tol, condition_met: r.rank.rank_one },
            lifted_generation,
            extracted,
            solve_seconds: seconds,
            stats: SolverSummary {
                iterations: r.stats.iterations,
                relative_gap: finite(r.stats.relative_gap),
                equality_residual: finite(r.stats.equality_residual),
                min_block_eigenvalue: finite(r.stats.min_block_eigenvalue),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyReport {
    pub epsilon_usd_per_mvar_hr: f64,
    /// Generation cost at the extracted point of the penalized problem.
    pub feasible_cost_usd_per_hr: Option<f64>,
    pub order2_lower_bound_usd_per_hr: Option<f64>,
    /// `(feasible cost - lower bound) / lower bound`, in percent.
    pub worst_case_optimality_gap_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub input: InputInfo,
    pub result: OrderReport,
    pub penalty: Option<PenaltyReport>,
    pub total_seconds: f64,
    pub exit_code: i32,
}

/// Options shared by the workflows.
#[derive(Debug, Clone)]
pub struct Workflow {
    pub rank_tol: f64,
    pub settings: Settings,
    pub options: RelaxationOptions,
}

impl Default for Workflow {
    fn default() -> Self {
        Workflow {
            rank_tol: crate::lasserre::DEFAULT_RANK_TOL,
            settings: Settings::default(),
            options: RelaxationOptions::default(),
        }
    }
}

impl Workflow {
    /// Build, solve, rank test and (when rank one) extract.
    pub fn solve(&self, net: &Network, order: usize) -> Result<OrderReport> {
        self.run(net, order, None)
    }

    fn run(&self, net: &Network, order: usize, epsilon: Option<f64>) -> Result<OrderReport> {
        let t = Instant::now();
        let y = build_admittance(net)?;
        let mut problem = build_relaxation(net, &y, order, &self.options)?;
        if let Some(e) = epsilon {
            problem = add_reactive_penalty(&problem, e)?;
        }
        let r = solve_relaxation(&problem, &self.settings, self.rank_tol);
        Ok(OrderReport::from_result(net, &r, self.rank_tol, t.elapsed().as_secs_f64()))
    }

    /// Penalized first-order solve. When it yields a rank-one point, the
    /// second-order relaxation supplies the lower bound for the gap.
    pub fn penalize(&self, net: &Network, epsilon: f64) -> Result<(OrderReport, PenaltyReport)> {
        if !(epsilon >= 0.0) {
            return Err(Error::NegativePenalty(epsilon));
        }
        let first = self.run(net, 1, Some(epsilon))?;
        let feasible_cost = first.extracted.as_ref().map(|x| x.cost_usd_per_hr);
        let lower = match feasible_cost {
            Some(_) => self.solve(net, 2)?.lower_bound_usd_per_hr,
            None => None,
        };
        let gap = feasible_cost.zip(lower).map(|(ub, lb)| 100.0 * (ub - lb) / lb.abs().max(1.0));
        let report = PenaltyReport {
            epsilon_usd_per_mvar_hr: epsilon,
            feasible_cost_usd_per_hr: feasible_cost,
            order2_lower_bound_usd_per_hr: lower,
            worst_case_optimality_gap_pct: gap,
        };
        Ok((first, report))
    }
}

impl RunReport {
    pub fn new(command: Vec<String>, input: InputInfo, result: OrderReport, penalty: Option<PenaltyReport>, started: Instant) -> Self {
        let exit_code = result.exit_code();
        RunReport { command, input, result, penalty, total_seconds: started.elapsed().as_secs_f64(), exit_code }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable summary in MW, MVAr, $/hr and pu.
    pub fn to_text(&self) -> String {
        let r = &self.result;
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        let kind = if r.penalized { " (penalized, not a relaxation)" } else { "" };
        line(format!("order {} relaxation{kind}: {:?}", r.order, r.status));
        match (r.lower_bound_usd_per_hr, r.objective_usd_per_hr) {
            (Some(lb), _) => line(format!("lower bound      {lb:.4} $/hr")),
            (None, Some(obj)) => line(format!("objective        {obj:.4} $/hr")),
            _ => {}
        }
        let ratio = r.rank.ratio.map_or("n/a".into(), |x| format!("{x:.3e}"));
        let verdict = if r.rank.condition_met { "met" } else { "not met" };
        line(format!("rank condition   {verdict} (lambda2/lambda1 = {ratio}, tol {:.0e})", r.rank.tolerance));
        for g in &r.lifted_generation {
            line(format!("  L_y gen {}      P {:.4} MW  Q {:.4} MVAr", g.bus, g.p_mw, g.q_mvar));
        }
        if let Some(x) = &r.extracted {
            line(format!("extracted cost   {:.4} $/hr", x.cost_usd_per_hr));
            for g in &x.generators {
                line(format!("  gen {}          P {:.4} MW  Q {:.4} MVAr", g.bus, g.p_mw, g.q_mvar));
            }
            for v in &x.voltages {
                line(format!("  bus {}          |V| {:.6} pu  angle {:.4} deg", v.bus, v.magnitude_pu, v.angle_deg));
            }
            line(format!("  mismatch {:.2e} pu, limit violation {:.2e} pu", x.check.mismatch_pu, x.check.violation_pu));
        }
        if let Some(p) = &self.penalty {
            line(format!("penalty          {} $/(MVAr hr)", p.epsilon_usd_per_mvar_hr));
            if let (Some(ub), Some(lb), Some(gap)) =
                (p.feasible_cost_usd_per_hr, p.order2_lower_bound_usd_per_hr, p.worst_case_optimality_gap_pct)
            {
                line(format!("  feasible cost {ub:.4} $/hr, order-2 lower bound {lb:.4} $/hr"));
                line(format!("  worst-case optimality gap {gap:.2}%"));
            } else {
                line("  no rank-one point, gap not available".into());
            }
        }
        line(format!("iterations {}, solve {:.3} s, total {:.3} s", r.stats.iterations, r.solve_seconds, self.total_seconds));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_status() {
        assert_eq!(exit_code(SolveStatus::Optimal, true), 0);
        assert_eq!(exit_code(SolveStatus::Optimal, false), 3);
        assert_eq!(exit_code(SolveStatus::Infeasible, false), 2);
        assert_eq!(exit_code(SolveStatus::NumericalFailure, false), 4);
        assert_eq!(exit_code(SolveStatus::Unbounded, true), 4);
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(input_digest(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
