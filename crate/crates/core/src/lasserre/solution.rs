use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::basis::{LiftedVariableMap, MonomialBasis};
use super::relaxation::MomentProblem;
use crate::error::{Error, Result};
use crate::poly::{Monomial, VarLayout};
use crate::sdpcore::{self, Settings, SolveStatus};

/// Default bound on `lambda_2 / lambda_1` for a rank-one moment matrix.
pub const DEFAULT_RANK_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankVerdict {
    /// `lambda_2 / lambda_1` (0 for a 1x1 matrix).
    pub ratio: f64,
    pub rank_one: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub relative_gap: f64,
    pub equality_residual: f64,
    pub min_block_eigenvalue: f64,
}

/// Outcome of solving a [`MomentProblem`], in MW / MVAr / $/hr.
#[derive(Debug, Clone)]
pub struct RelaxationResult {
    pub order: usize,
    pub status: SolveStatus,
    /// Penalized objectives are not lower bounds.
    pub penalized: bool,
    /// Objective in $/hr: a lower bound on the OPF optimum unless penalized.
    pub objective: f64,
    /// Lifted variables `y_alpha`.
    pub y: Vec<f64>,
    /// First-order epigraph values `(bus, $/hr)`.
    pub epigraph: Vec<(usize, f64)>,
    /// Moment-matrix eigenvalues, largest first.
    pub eigenvalues: Vec<f64>,
    pub rank: RankVerdict,
    /// `[M_1]` restricted to the degree-one monomials.
    pub second_moments: DMatrix<f64>,
    pub layout: VarLayout,
    /// `L_y{f_Pi}` and `L_y{f_Qi}` per bus.
    pub lifted_p_mw: Vec<f64>,
    pub lifted_q_mvar: Vec<f64>,
    /// Present only when the rank condition holds.
    pub voltages: Option<Vec<Complex64>>,
    pub extracted_p_mw: Option<Vec<f64>>,
    pub extracted_q_mvar: Option<Vec<f64>>,
    /// Generation cost at the extracted point, $/hr.
    pub extracted_cost: Option<f64>,
    pub stats: SolverStats,
}

/// Rank test on a symmetric matrix.
pub fn check_rank(matrix: &DMatrix<f64>, tol_ratio: f64) -> RankVerdict {
    let eig = sorted_eigenvalues(matrix);
    verdict_from_eigenvalues(&eig, tol_ratio)
}

fn verdict_from_eigenvalues(eig: &[f64], tol_ratio: f64) -> RankVerdict {
    let ratio = match eig {
        [] => f64::NAN,
        [_] => 0.0,
        [l1, l2, ..] if *l1 > 0.0 => l2.max(0.0) / l1,
        _ => f64::INFINITY,
    };
    RankVerdict { ratio, rank_one: ratio <= tol_ratio }
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| b.total_cmp(a));
    e
}

/// Numeric moment matrix `M{y}` over `basis`.
pub fn moment_matrix_value(basis: &MonomialBasis, map: &LiftedVariableMap, y: &[f64]) -> DMatrix<f64> {
    let n = basis.len();
    DMatrix::from_fn(n, n, |i, j| y[map.product_index(basis.get(i), basis.get(j))])
}

/// The block of `M_1{y}` indexed by the degree-one monomials.
pub fn second_moment_block(map: &LiftedVariableMap, y: &[f64]) -> DMatrix<f64> {
    let n = map.nvars();
    DMatrix::from_fn(n, n, |i, j| {
        y[map.product_index(&Monomial::var(n, i), &Monomial::var(n, j))]
    })
}

/// Rank-one factor of the second-moment block, mapped back to phasors with
/// the reference bus on the non-negative real axis.
pub fn voltages_from_second_moments(block: &DMatrix<f64>, layout: &VarLayout) -> Vec<Complex64> {
    let eig = SymmetricEigen::new(block.clone());
    let (imax, lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let eta = eig.eigenvectors.column(imax);
    let scale = lambda.max(0.0).sqrt();
    let mut x: Vec<f64> = eta.iter().map(|v| v * scale).collect();
    if x[layout.vd(layout.ref_bus())] < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    layout.voltages(&x)
}

/// Extracted voltage phasors; refused unless the rank condition holds.
pub fn extract_voltages(result: &RelaxationResult) -> Result<Vec<Complex64>> {
    if !result.rank.rank_one {
        return Err(Error::RankConditionUnmet { ratio: result.rank.ratio });
    }
    Ok(voltages_from_second_moments(&result.second_moments, &result.layout))
}

/// Solves the conic form of `problem` and interprets the moment solution.
pub fn solve_relaxation(problem: &MomentProblem, settings: &Settings, rank_tol: f64) -> RelaxationResult {
    let sol = sdpcore::solve(&problem.conic, settings);
    interpret(problem, &sol, rank_tol)
}

pub(crate) fn interpret(problem: &MomentProblem, sol: &sdpcore::ConicSolution, rank_tol: f64) -> RelaxationResult {
    let net = &problem.network;
    let nl = problem.map.len();
    let y = sol.y[..nl].to_vec();
    let have_point = y.iter().all(|v| v.is_finite());
    let s_base = net.s_base;

    let (eigenvalues, rank, second_moments) = if have_point {
        let m = moment_matrix_value(&problem.basis, &problem.map, &y);
        let eig = sorted_eigenvalues(&m);
        let verdict = verdict_from_eigenvalues(&eig, rank_tol);
        (eig, verdict, second_moment_block(&problem.map, &y))
    } else {
        let n = problem.map.nvars();
        (Vec::new(), RankVerdict { ratio: f64::NAN, rank_one: false }, DMatrix::zeros(n, n))
    };
    let rank_one = rank.rank_one && sol.status == SolveStatus::Optimal;

    let lift = |h: &crate::poly::Polynomial| -> f64 {
        if !have_point {
            return f64::NAN;
        }
        h.terms()
            .map(|(m, c)| c * y[problem.map.index_of(m).expect("degree two")])
            .sum()
    };
    let buses = 1..=net.n_bus();
    let lifted_p_mw = buses.clone().map(|b| lift(&problem.active_injection(b)) * s_base).collect();
    let lifted_q_mvar = buses.clone().map(|b| lift(&problem.reactive_injection(b)) * s_base).collect();

    let mut voltages = None;
    let mut extracted_p_mw = None;
    let mut extracted_q_mvar = None;
    let mut extracted_cost = None;
    if rank_one {
        let v = voltages_from_second_moments(&second_moments, &problem.layout);
        let x = problem.layout.point(&v);
        let eval = |h: crate::poly::Polynomial| h.evaluate(&x).expect("layout dims");
        extracted_p_mw = Some(buses.clone().map(|b| eval(problem.active_injection(b)) * s_base).collect());
        extracted_q_mvar = Some(buses.clone().map(|b| eval(problem.reactive_injection(b)) * s_base).collect());
        extracted_cost = Some(eval(problem.total_cost()));
        voltages = Some(v);
    }

    let epigraph = problem
        .epigraph
        .iter()
        .map(|&(bus, k)| (bus, sol.y[k] * problem.cost_scale))
        .collect();

    RelaxationResult {
        order: problem.order,
        status: sol.status,
        penalized: problem.is_penalized(),
        objective: sol.objective * problem.cost_scale,
        y,
        epigraph,
        eigenvalues,
        rank: RankVerdict { rank_one, ..rank },
        second_moments,
        layout: problem.layout,
        lifted_p_mw,
        lifted_q_mvar,
        voltages,
        extracted_p_mw,
        extracted_q_mvar,
        extracted_cost,
        stats: SolverStats {
            iterations: sol.iterations,
            relative_gap: sol.gap,
            equality_residual: sol.equality_residual,
            min_block_eigenvalue: sol.block_min_eig.iter().copied().fold(f64::INFINITY, f64::min),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outer_product_is_rank_one() {
        let basis = MonomialBasis::new(3, 2);
        let map = LiftedVariableMap::new(3, 2);
        let y = map.lift(&[0.7, -1.1, 0.4]);
        let m = moment_matrix_value(&basis, &map, &y);
        let v = check_rank(&m, 1e-12);
        assert!(v.rank_one);
        assert!(v.ratio < 1e-14);
        assert!(sorted_eigenvalues(&m).iter().all(|&e| e > -1e-12));
    }

    #[test]
    fn identity_is_not_rank_one() {
        let v = check_rank(&DMatrix::identity(4, 4), DEFAULT_RANK_TOL);
        assert_eq!(v.ratio, 1.0);
        assert!(!v.rank_one);
    }

    #[test]
    fn extraction_round_trip() {
        // x = (V_d1, V_d2, V_q1, V_q2) = (1, 0.9, 0, 0.1), no elimination
        let layout = VarLayout::full(2);
        let map = LiftedVariableMap::new(4, 1);
        let x = [1.0, 0.9, 0.0, 0.1];
        let y = map.lift(&x);
        let v = voltages_from_second_moments(&second_moment_block(&map, &y), &layout);
        let back = layout.point(&v);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
        // global sign is fixed by the reference bus
        let flipped: Vec<f64> = x.iter().map(|v| -v).collect();
        let v2 = voltages_from_second_moments(&second_moment_block(&map, &map.lift(&flipped)), &layout);
        assert!((v2[0].re - 1.0).abs() < 1e-12);
    }
}
