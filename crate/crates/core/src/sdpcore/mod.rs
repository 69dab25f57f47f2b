//! Dense interior-point solver for block-diagonal LMI problems with linear
//! equalities.
//!
//! Equalities are removed by a null-space parametrisation
//! ([`reduce_equalities`]); the remaining problem is solved by an
//! infeasible-start primal-dual method. When the method does not converge
//! it is restarted from differently balanced starting points; after that a
//! phase-1 problem ([`certify_feasibility`]) decides between
//! infeasibility and numerical failure.

mod ipm;
pub mod problem;
pub mod reduce;
pub mod sdpa;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use problem::{AffineExpr, ConicProblem, LmiBlock, SymSparse};
pub use reduce::{reduce_equalities, DenseProblem, Inconsistent, Reduction};

use ipm::{interior_point, Outcome};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub max_iter: usize,
    /// Relative duality gap.
    pub gap_tol: f64,
    /// Scaled primal and dual residuals.
    pub feas_tol: f64,
    /// Fraction-to-boundary factor.
    pub step_fraction: f64,
    /// Phase-1 optimum above which a problem is declared infeasible.
    pub phase1_tol: f64,
    /// Initial multiple of the identity for the slack matrix.
    pub initial_scale: Option<f64>,
    /// Initial dual matrix as a multiple of the initial slack matrix.
    pub dual_start: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            max_iter: 200,
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            step_fraction: 0.98,
            phase1_tol: 1e-7,
            initial_scale: None,
            dual_start: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub y: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// Relative duality gap at the returned iterate.
    pub gap: f64,
    pub block_min_eig: Vec<f64>,
    pub equality_residual: f64,
    pub iterations: usize,
    /// Dual matrix per block; empty when no iterate was produced.
    pub dual: Vec<DMatrix<f64>>,
}

impl ConicSolution {
    fn rejected(p: &ConicProblem, status: SolveStatus, residual: f64) -> Self {
        ConicSolution {
            status,
            y: vec![f64::NAN; p.num_vars],
            objective: f64::NAN,
            dual_objective: f64::NAN,
            gap: f64::NAN,
            block_min_eig: vec![f64::NAN; p.blocks.len()],
            equality_residual: residual,
            iterations: 0,
            dual: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Solves `p`. Never panics on numerical trouble: failures are reported
/// through [`SolveStatus`] with the best iterate attached.
pub fn solve(p: &ConicProblem, settings: &Settings) -> ConicSolution {
    let (dense, reduction) = match reduce_equalities(p) {
        Ok(r) => r,
        Err(inc) => return ConicSolution::rejected(p, SolveStatus::Infeasible, inc.residual),
    };
    solve_reduced(p, &dense, &reduction, settings)
}

fn solve_reduced(p: &ConicProblem, dense: &DenseProblem, reduction: &Reduction, settings: &Settings) -> ConicSolution {
    if dense.num_vars() == 0 {
        // Nothing left to optimise: the equalities pin the point.
        let z = DVector::zeros(0);
        let eigs: Vec<f64> = (0..dense.f0.len()).map(|b| min_eigenvalue(&dense.f0[b])).collect();
        let feasible = eigs.iter().all(|&e| e >= -settings.feas_tol);
        let y = reduction.recover(&z);
        return ConicSolution {
            status: if feasible { SolveStatus::Optimal } else { SolveStatus::Infeasible },
            objective: dense.offset,
            dual_objective: dense.offset,
            gap: 0.0,
            equality_residual: p.equality_residual(y.as_slice()),
            y: y.as_slice().to_vec(),
            block_min_eig: eigs,
            iterations: 0,
            dual: Vec::new(),
        };
    }

    let (pruned, kept) = match split_constant_blocks(dense) {
        Ok(split) => split,
        Err(_) => {
            let y = reduction.recover(&DVector::zeros(dense.num_vars()));
            let residual = p.equality_residual(y.as_slice());
            return ConicSolution::rejected(p, SolveStatus::Infeasible, residual);
        }
    };
    let mut run = solve_with_restarts(&pruned, settings);
    let status = match run.outcome {
        Outcome::Converged => SolveStatus::Optimal,
        other => {
            let (feasible, _) = phase1(&pruned, settings);
            if !feasible {
                SolveStatus::Infeasible
            } else if other == Outcome::PrimalDiverged {
                SolveStatus::Unbounded
            } else {
                SolveStatus::NumericalFailure
            }
        }
    };
    let mut dual: Vec<DMatrix<f64>> = dense.f0.iter().map(|m| DMatrix::zeros(m.nrows(), m.ncols())).collect();
    for (w, &b) in run.w.drain(..).zip(&kept) {
        dual[b] = w;
    }
    let y = reduction.recover(&run.z);
    let block_min_eig = (0..dense.f0.len())
        .map(|b| min_eigenvalue(&dense.evaluate_block(b, &run.z)))
        .collect();
    ConicSolution {
        status,
        objective: p.objective_value(y.as_slice()),
        dual_objective: run.dobj,
        gap: run.rel_gap,
        block_min_eig,
        equality_residual: p.equality_residual(y.as_slice()),
        y: y.as_slice().to_vec(),
        iterations: run.iterations,
        dual,
    }
}

/// Splits off blocks that the equalities have reduced to constants. Such a
/// block has no interior for the barrier; it is dropped when its constant is
/// PSD and makes the problem infeasible otherwise (`Err` holds its least
/// eigenvalue).
fn split_constant_blocks(dense: &DenseProblem) -> std::result::Result<(DenseProblem, Vec<usize>), f64> {
    let scale = dense
        .f0
        .iter()
        .chain(dense.f.iter().flatten())
        .map(|m| m.amax())
        .fold(1.0, f64::max);
    let mut kept = Vec::new();
    for b in 0..dense.f0.len() {
        let varying = dense.f[b].iter().map(|m| m.amax()).fold(0.0, f64::max);
        if varying > CONSTANT_BLOCK_TOL * scale {
            kept.push(b);
            continue;
        }
        let e = min_eigenvalue(&dense.f0[b]);
        if e < -CONSTANT_BLOCK_TOL.sqrt() * scale {
            return Err(e);
        }
    }
    let pruned = DenseProblem {
        c: dense.c.clone(),
        offset: dense.offset,
        f0: kept.iter().map(|&b| dense.f0[b].clone()).collect(),
        f: kept.iter().map(|&b| dense.f[b].clone()).collect(),
    };
    Ok((pruned, kept))
}

/// Relative size below which a reduced block's coefficients count as zero.
const CONSTANT_BLOCK_TOL: f64 = 1e-11;

/// Ratios of the initial dual to slack scale tried after the configured one.
const RESTART_FACTORS: [f64; 2] = [10.0, 0.1];

fn solve_with_restarts(dense: &DenseProblem, settings: &Settings) -> ipm::Run {
    let first = interior_point(dense, settings);
    if matches!(first.outcome, Outcome::Converged | Outcome::DualDiverged | Outcome::PrimalDiverged) {
        return first;
    }
    let mut runs = vec![first];
    for k in RESTART_FACTORS {
        let retry = Settings { dual_start: settings.dual_start * k, ..settings.clone() };
        let run = interior_point(dense, &retry);
        if run.outcome == Outcome::Converged {
            return run;
        }
        runs.push(run);
    }
    runs.swap_remove(0)
}

/// Phase-1 check: minimises the uniform shift `t` such that every block
/// plus `t I` is PSD (with `t >= -1`). Returns `(t* <= phase1_tol, -t*)`.
pub fn certify_feasibility(p: &ConicProblem, settings: &Settings) -> (bool, f64) {
    match reduce_equalities(p) {
        Ok((dense, _)) => match split_constant_blocks(&dense) {
            Ok((pruned, _)) => phase1(&pruned, settings),
            Err(e) => (false, e),
        },
        Err(inc) => (false, -inc.residual),
    }
}

fn phase1(dense: &DenseProblem, settings: &Settings) -> (bool, f64) {
    let m = dense.num_vars();
    let nb = dense.f0.len();
    if nb == 0 {
        return (true, f64::INFINITY);
    }
    let mut f0 = Vec::with_capacity(nb + 1);
    let mut f = Vec::with_capacity(nb + 1);
    for b in 0..nb {
        let n = dense.f0[b].nrows();
        let mx = dense.f[b].iter().map(|m| m.amax()).fold(dense.f0[b].amax(), f64::max);
        let s = if mx > 0.0 { 1.0 / mx } else { 1.0 };
        f0.push(&dense.f0[b] * s);
        let mut coeffs: Vec<DMatrix<f64>> = dense.f[b].iter().map(|m| m * s).collect();
        coeffs.push(DMatrix::identity(n, n));
        f.push(coeffs);
    }
    // t >= -1
    f0.push(DMatrix::from_element(1, 1, 1.0));
    let mut last = vec![DMatrix::zeros(1, 1); m];
    last.push(DMatrix::from_element(1, 1, 1.0));
    f.push(last);
    let mut c = DVector::zeros(m + 1);
    c[m] = 1.0;
    let aux = DenseProblem { c, offset: 0.0, f0, f };

    let run = interior_point(&aux, settings);
    let t = run.z[m];
    let feasible = match run.outcome {
        Outcome::Converged => run.pobj <= settings.phase1_tol,
        // A converged dual bound above the threshold is a certificate.
        _ if run.dinf <= settings.feas_tol.sqrt() && run.dobj > settings.phase1_tol => false,
        _ => t <= settings.phase1_tol && run.pinf <= settings.feas_tol.sqrt(),
    };
    (feasible, -t)
}
