//! Infeasible-start primal-dual path following for dense LMI problems.
//!
//! The problem handled here is `minimize c.z` subject to
//! `S = F0 + sum_i z_i F_i >= 0` (block diagonal). Its dual is
//! `maximize -<F0, W>` subject to `<F_i, W> = c_i`, `W >= 0`.
//! Search directions are Nesterov-Todd with a Mehrotra predictor-corrector.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, LU};

use super::reduce::{add_scaled, DenseProblem};
use super::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Converged,
    /// Dual iterates blew up: evidence that the LMI has no feasible point.
    DualDiverged,
    /// Primal iterates blew up with the objective decreasing.
    PrimalDiverged,
    Stalled,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct Run {
    pub outcome: Outcome,
    pub z: DVector<f64>,
    /// Dual matrices in the caller's (unscaled) block coordinates.
    pub w: Vec<DMatrix<f64>>,
    pub pobj: f64,
    pub dobj: f64,
    pub pinf: f64,
    pub dinf: f64,
    pub rel_gap: f64,
    pub iterations: usize,
}

const DIVERGENCE: f64 = 1e12;

fn sym(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest `alpha` with `s + alpha * ds` positive semidefinite (may be infinite).
fn max_step(s: &DMatrix<f64>, ds: &DMatrix<f64>) -> f64 {
    if s.nrows() == 1 {
        let (v, d) = (s[(0, 0)], ds[(0, 0)]);
        return if d < 0.0 { -v / d } else { f64::INFINITY };
    }
    let Some(chol) = Cholesky::new(s.clone()) else {
        return 0.0;
    };
    let l = chol.l();
    let a = l.solve_lower_triangular(ds).expect("triangular solve");
    let mut m = l.solve_lower_triangular(&a.transpose()).expect("triangular solve");
    sym(&mut m);
    let lmin = SymmetricEigen::new(m).eigenvalues.min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn solve_schur(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Some(ch.solve(rhs));
    }
    let scale = m.diagonal().amax().max(1e-300);
    for k in [1e-14, 1e-12, 1e-10] {
        let mut reg = m.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += k * scale;
        }
        if let Some(ch) = Cholesky::new(reg) {
            return Some(ch.solve(rhs));
        }
    }
    LU::new(m.clone()).solve(rhs)
}

/// Removes the dual residual `rd = c - <F_i, W>` with a correction
/// `W + W D W`, `D = sum_j l_j F_j`, which stays PSD for small `D`.
/// Leaves `w` untouched if the corrected matrix is not positive definite.
fn restore_dual(p: &Scaled, w: &mut [DMatrix<f64>], rd: &DVector<f64>) {
    let m = rd.len();
    let nb = w.len();
    let mut gram = DMatrix::zeros(m, m);
    let mut wfw: Vec<Vec<Option<DMatrix<f64>>>> = Vec::with_capacity(nb);
    for b in 0..nb {
        let row: Vec<Option<DMatrix<f64>>> = (0..m)
            .map(|j| p.nonzero[b][j].then(|| &w[b] * &p.f[b][j] * &w[b]))
            .collect();
        for j in 0..m {
            let Some(g) = &row[j] else { continue };
            for i in 0..=j {
                if p.nonzero[b][i] {
                    gram[(i, j)] += p.f[b][i].dot(g);
                }
            }
        }
        wfw.push(row);
    }
    for j in 0..m {
        for i in 0..j {
            gram[(j, i)] = gram[(i, j)];
        }
    }
    let Some(lambda) = solve_schur(&gram, rd) else { return };
    if lambda.iter().any(|v| !v.is_finite()) {
        return;
    }
    let mut next: Vec<DMatrix<f64>> = w.to_vec();
    for b in 0..nb {
        for j in 0..m {
            if let Some(g) = &wfw[b][j] {
                add_scaled(&mut next[b], lambda[j], g);
            }
        }
        sym(&mut next[b]);
        let pd = if next[b].nrows() == 1 { next[b][(0, 0)] > 0.0 } else { Cholesky::new(next[b].clone()).is_some() };
        if !pd {
            return;
        }
    }
    w.clone_from_slice(&next);
}

/// Factored Schur complement `M_ij = <A_i, A_j>`, `A_i = G^T F_i G`, kept as
/// `R` from a QR of the stacked `vec(A_i)` so that its condition number is
/// never squared.
struct SchurFactor {
    r: DMatrix<f64>,
    fallback: Option<DMatrix<f64>>,
}

impl SchurFactor {
    fn new(p: &Scaled, g: &[DMatrix<f64>]) -> Self {
        let m = p.c.len();
        let rows: usize = g.iter().map(|l| l.nrows() * l.nrows()).sum();
        let mut stacked = DMatrix::zeros(rows.max(m), m);
        let mut offset = 0;
        for (b, gb) in g.iter().enumerate() {
            let n = gb.nrows();
            for i in 0..m {
                if !p.nonzero[b][i] {
                    continue;
                }
                let a = gb.transpose() * &p.f[b][i] * gb;
                stacked.view_mut((offset, i), (n * n, 1)).copy_from_slice(a.as_slice());
            }
            offset += n * n;
        }
        let r = stacked.qr().r();
        let tiny = r.diagonal().iter().any(|v| v.abs() <= 1e-15 * r.diagonal().amax());
        let fallback = tiny.then(|| r.transpose() * &r);
        SchurFactor { r, fallback }
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        if let Some(m) = &self.fallback {
            return solve_schur(m, rhs);
        }
        let z = self.r.transpose().solve_lower_triangular(rhs)?;
        self.r.solve_upper_triangular(&z)
    }
}

/// `c - <F_i, W>`.
fn dual_residual(p: &Scaled, w: &[DMatrix<f64>]) -> DVector<f64> {
    let mut rd = p.c.clone();
    for (b, wb) in w.iter().enumerate() {
        for i in 0..rd.len() {
            if p.nonzero[b][i] {
                rd[i] -= p.f[b][i].dot(wb);
            }
        }
    }
    rd
}

struct Scaled {
    c: DVector<f64>,
    f0: Vec<DMatrix<f64>>,
    f: Vec<Vec<DMatrix<f64>>>,
    nonzero: Vec<Vec<bool>>,
    block_scale: Vec<f64>,
    c_scale: f64,
}

fn scale_problem(dp: &DenseProblem) -> Scaled {
    let mut f0 = Vec::with_capacity(dp.f0.len());
    let mut f = Vec::with_capacity(dp.f0.len());
    let mut nonzero = Vec::with_capacity(dp.f0.len());
    let mut block_scale = Vec::with_capacity(dp.f0.len());
    for (b, f0b) in dp.f0.iter().enumerate() {
        let mx = dp.f[b].iter().map(|m| m.amax()).fold(f0b.amax(), f64::max);
        let s = if mx > 0.0 { 1.0 / mx } else { 1.0 };
        block_scale.push(s);
        f0.push(f0b * s);
        nonzero.push(dp.f[b].iter().map(|m| m.amax() > 0.0).collect());
        f.push(dp.f[b].iter().map(|m| m * s).collect());
    }
    let c_scale = if dp.c.amax() > 0.0 { dp.c.amax() } else { 1.0 };
    Scaled { c: &dp.c / c_scale, f0, f, nonzero, block_scale, c_scale }
}

/// NT scaling of one block: with `W = L L^T` and `L^T S L = U diag(v)^2 U^T`,
/// `G = L U diag(v)^-1/2` satisfies `G^T S G = G^-1 W G^-T = diag(v)`.
fn nt_scaling(s: &DMatrix<f64>, l_w: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mut inner = l_w.transpose() * s * l_w;
    sym(&mut inner);
    let eig = SymmetricEigen::new(inner);
    let v: DVector<f64> = eig.eigenvalues.map(|e| e.max(f64::MIN_POSITIVE).sqrt());
    let mut g = l_w * &eig.eigenvectors;
    for (k, mut col) in g.column_iter_mut().enumerate() {
        col /= v[k].sqrt();
    }
    (g, v)
}

struct Direction {
    dx: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dw: Vec<DMatrix<f64>>,
    /// `G^-1 dW G^-T` and `G^T dS G`, for the corrector term.
    dw_scaled: Vec<DMatrix<f64>>,
    ds_scaled: Vec<DMatrix<f64>>,
}

pub(crate) fn interior_point(dp: &DenseProblem, st: &Settings) -> Run {
    let p = scale_problem(dp);
    let m = p.c.len();
    let nb = p.f0.len();
    let ntot: f64 = p.f0.iter().map(|b| b.nrows() as f64).sum();
    let f0_norm = p.f0.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt();
    // the caller's `1 + |c|` in internal units, so dinf ignores c_scale
    let c_ref = 1.0 / p.c_scale + p.c.norm();

    let xi = st.initial_scale.unwrap_or_else(|| {
        let fmax = p.f.iter().flatten().map(|m| m.norm()).fold(0.0, f64::max);
        10.0f64.max(ntot.sqrt()).max(f0_norm).max(fmax)
    });
    let mut x = DVector::zeros(m);
    let mut s: Vec<DMatrix<f64>> = p.f0.iter().map(|b| DMatrix::identity(b.nrows(), b.nrows()) * xi).collect();
    let mut w: Vec<DMatrix<f64>> = s.iter().map(|b| b * st.dual_start).collect();

    let mut best: Option<(f64, Run)> = None;
    let mut small_steps = 0;
    let mut outcome = Outcome::IterationLimit;
    let mut iter = 0;

    #[allow(clippy::too_many_arguments)]
    let snapshot = |x: &DVector<f64>, w: &[DMatrix<f64>], pobj: f64, dobj: f64, pinf: f64, dinf: f64, gap: f64, iter: usize, outcome: Outcome| Run {
        outcome,
        z: x.clone(),
        w: w.iter().zip(&p.block_scale).map(|(wb, bs)| wb * (bs * p.c_scale)).collect(),
        pobj: pobj * p.c_scale + dp.offset,
        dobj: dobj * p.c_scale + dp.offset,
        pinf,
        dinf,
        rel_gap: gap,
        iterations: iter,
    };

    loop {
        let mut rp: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
        for b in 0..nb {
            let mut r = p.f0[b].clone();
            for i in 0..m {
                if p.nonzero[b][i] && x[i] != 0.0 {
                    add_scaled(&mut r, x[i], &p.f[b][i]);
                }
            }
            r -= &s[b];
            rp.push(r);
        }
        let rd = dual_residual(&p, &w);
        let pobj = p.c.dot(&x);
        let dobj = -(0..nb).map(|b| p.f0[b].dot(&w[b])).sum::<f64>();
        let compl: f64 = (0..nb).map(|b| s[b].dot(&w[b])).sum();
        let mu = compl / ntot;
        let pinf = rp.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / (1.0 + f0_norm);
        let dinf = rd.norm() / c_ref;
        // In the caller's objective units, offset included. Both the
        // objective difference and <S, W> must be small: near a degenerate
        // optimum the residual terms can make the former vanish by accident.
        let (pu, du) = (pobj * p.c_scale + dp.offset, dobj * p.c_scale + dp.offset);
        let gap = (pu - du).abs().max(compl * p.c_scale) / 1f64.max(pu.abs()).max(du.abs());

        let merit = pinf.max(dinf).max(gap);
        if best.as_ref().map_or(true, |(bm, _)| merit < *bm) {
            best = Some((merit, snapshot(&x, &w, pobj, dobj, pinf, dinf, gap, iter, Outcome::Stalled)));
        }

        if pinf <= st.feas_tol && dinf <= st.feas_tol && gap <= st.gap_tol {
            outcome = Outcome::Converged;
            return snapshot(&x, &w, pobj, dobj, pinf, dinf, gap, iter, outcome);
        }
        let w_norm = w.iter().map(|b| b.norm()).fold(0.0, f64::max);
        let s_norm = s.iter().map(|b| b.norm()).fold(0.0, f64::max).max(x.amax());
        if w_norm > DIVERGENCE {
            outcome = Outcome::DualDiverged;
            break;
        }
        if s_norm > DIVERGENCE {
            // growth with a rising objective is a poor start, not unboundedness
            outcome = if pu < -DIVERGENCE.sqrt() { Outcome::PrimalDiverged } else { Outcome::Stalled };
            break;
        }
        if iter >= st.max_iter {
            break;
        }
        iter += 1;

        let mut g = Vec::with_capacity(nb);
        let mut v = Vec::with_capacity(nb);
        for b in 0..nb {
            let (Some(_), Some(cw)) = (Cholesky::new(s[b].clone()), Cholesky::new(w[b].clone())) else {
                break;
            };
            let (gb, vb) = nt_scaling(&s[b], &cw.l());
            g.push(gb);
            v.push(vb);
        }
        if g.len() < nb {
            outcome = Outcome::Stalled;
            break;
        }
        let schur = SchurFactor::new(&p, &g);

        // In scaled space dW~ + dS~ = D with sym(diag(v) D) = target I - diag(v)^2 - corr.
        let direction = |target: f64, corr: Option<&[DMatrix<f64>]>| -> Option<Direction> {
            let mut dmat = Vec::with_capacity(nb);
            let mut rhs = -rd.clone();
            for b in 0..nb {
                let vb = &v[b];
                let n = vb.len();
                let d = DMatrix::from_fn(n, n, |i, j| {
                    let mut r = if i == j { target - vb[i] * vb[i] } else { 0.0 };
                    if let Some(c) = corr {
                        r -= c[b][(i, j)];
                    }
                    2.0 * r / (vb[i] + vb[j])
                });
                // M dx = <F_i, G (D - G^T Rp G) G^T> - rd
                let inner = &d - g[b].transpose() * &rp[b] * &g[b];
                let full = &g[b] * inner * g[b].transpose();
                for i in 0..m {
                    if p.nonzero[b][i] {
                        rhs[i] += p.f[b][i].dot(&full);
                    }
                }
                dmat.push(d);
            }
            let dx = schur.solve(&rhs)?;
            if dx.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let mut out = Direction {
                ds: Vec::with_capacity(nb),
                dw: Vec::with_capacity(nb),
                dw_scaled: Vec::with_capacity(nb),
                ds_scaled: Vec::with_capacity(nb),
                dx,
            };
            for b in 0..nb {
                let mut ds = rp[b].clone();
                for i in 0..m {
                    if p.nonzero[b][i] && out.dx[i] != 0.0 {
                        add_scaled(&mut ds, out.dx[i], &p.f[b][i]);
                    }
                }
                let mut ds_t = g[b].transpose() * &ds * &g[b];
                sym(&mut ds_t);
                let dw_t = &dmat[b] - &ds_t;
                let mut dw = &g[b] * &dw_t * g[b].transpose();
                sym(&mut dw);
                out.ds.push(ds);
                out.dw.push(dw);
                out.dw_scaled.push(dw_t);
                out.ds_scaled.push(ds_t);
            }
            Some(out)
        };

        let step_lengths = |ds: &[DMatrix<f64>], dw: &[DMatrix<f64>]| -> (f64, f64) {
            let ap = (0..nb).map(|b| max_step(&s[b], &ds[b])).fold(f64::INFINITY, f64::min);
            let ad = (0..nb).map(|b| max_step(&w[b], &dw[b])).fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        let Some(pred) = direction(0.0, None) else {
            outcome = Outcome::Stalled;
            break;
        };
        let (ap, ad) = step_lengths(&pred.ds, &pred.dw);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff: f64 = (0..nb)
            .map(|b| (&s[b] + &pred.ds[b] * ap).dot(&(&w[b] + &pred.dw[b] * ad)))
            .sum::<f64>()
            / ntot;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);
        let corr: Vec<DMatrix<f64>> = (0..nb)
            .map(|b| {
                let a = &pred.dw_scaled[b] * &pred.ds_scaled[b];
                (&a + a.transpose()) * 0.5
            })
            .collect();
        let Some(Direction { dx, ds, dw, .. }) = direction(sigma * mu, Some(&corr)) else {
            outcome = Outcome::Stalled;
            break;
        };

        let (ap, ad) = step_lengths(&ds, &dw);
        let ap = (st.step_fraction * ap).min(1.0);
        let ad = (st.step_fraction * ad).min(1.0);
        x.axpy(ap, &dx, 1.0);
        for b in 0..nb {
            add_scaled(&mut s[b], ap, &ds[b]);
            sym(&mut s[b]);
        }

        // Dual step with a guard on the dual residual: near a degenerate
        // optimum the computed dW can carry errors far above the residual it
        // is meant to remove.
        let rd_norm = rd.norm();
        let allowed = |a: f64| (2.0 * (1.0 - a) * rd_norm).max(0.1 * st.feas_tol * c_ref);
        let mut ad = ad;
        let mut accepted = None;
        for _ in 0..4 {
            if ad <= 0.0 {
                break;
            }
            let mut cand: Vec<DMatrix<f64>> = w.clone();
            for b in 0..nb {
                add_scaled(&mut cand[b], ad, &dw[b]);
                sym(&mut cand[b]);
            }
            let mut r = dual_residual(&p, &cand);
            if r.norm() > 1e-14 * c_ref {
                restore_dual(&p, &mut cand, &r);
                r = dual_residual(&p, &cand);
            }
            if r.norm() <= allowed(ad) {
                accepted = Some(cand);
                break;
            }
            ad *= 0.5;
        }
        let ad = match accepted {
            Some(cand) => {
                w = cand;
                ad
            }
            None => 0.0,
        };

        if ap < 1e-8 && ad < 1e-8 {
            small_steps += 1;
            if small_steps >= 5 {
                outcome = Outcome::Stalled;
                break;
            }
        } else {
            small_steps = 0;
        }
    }

    let (_, mut run) = best.expect("at least one iterate evaluated");
    run.outcome = outcome;
    run.iterations = iter;
    run
}
