use nalgebra::{DMatrix, DVector};

use super::problem::ConicProblem;

/// Relative singular-value cutoff used to decide the rank of the equality system.
const RANK_TOL: f64 = 1e-9;
/// Relative residual above which the equality system is declared inconsistent.
const CONSISTENCY_TOL: f64 = 1e-8;

/// Dense LMI problem `minimize c.z + offset` s.t. `F0_b + sum_i z_i F_bi >= 0`.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub c: DVector<f64>,
    pub offset: f64,
    /// Constant part per block.
    pub f0: Vec<DMatrix<f64>>,
    /// `f[b][i]` is the coefficient of variable `i` in block `b`.
    pub f: Vec<Vec<DMatrix<f64>>>,
}

impl DenseProblem {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.f0.iter().map(|m| m.nrows()).collect()
    }

    pub fn evaluate_block(&self, b: usize, z: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.f0[b].clone();
        for (i, fi) in self.f[b].iter().enumerate() {
            if z[i] != 0.0 {
                add_scaled(&mut m, z[i], fi);
            }
        }
        m
    }
}

/// `a += s * b` for matrices of equal shape.
pub(crate) fn add_scaled(a: &mut DMatrix<f64>, s: f64, b: &DMatrix<f64>) {
    a.zip_apply(b, |x, y| *x += s * y);
}

/// Affine map `y = particular + basis * z` onto the equality-feasible subspace.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub particular: DVector<f64>,
    pub basis: DMatrix<f64>,
}

impl Reduction {
    pub fn recover(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.particular + &self.basis * z
    }

    pub fn reduced_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Least-squares inverse; exact for points on the affine subspace.
    pub fn project(&self, y: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * (y - &self.particular)
    }
}

/// The equality system has no solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inconsistent {
    pub residual: f64,
}

/// Eliminates the linear equalities through a null-space parametrisation.
pub fn reduce_equalities(p: &ConicProblem) -> Result<(DenseProblem, Reduction), Inconsistent> {
    let n = p.num_vars;
    let reduction = if p.equalities.is_empty() {
        Reduction {
            particular: DVector::zeros(n),
            basis: DMatrix::identity(n, n),
        }
    } else {
        null_space_reduction(p)?
    };

    let y_p = &reduction.particular;
    let basis = &reduction.basis;
    let m = basis.ncols();
    let c_full = DVector::from_column_slice(&p.objective);
    let c = basis.transpose() * &c_full;
    let offset = p.objective_offset + c_full.dot(y_p);

    let mut f0 = Vec::with_capacity(p.blocks.len());
    let mut f = Vec::with_capacity(p.blocks.len());
    for blk in &p.blocks {
        let s = blk.size;
        let mut constant = blk.constant.to_dense(s);
        let mut coeffs = vec![DMatrix::zeros(s, s); m];
        for (&k, ck) in &blk.coeffs {
            if y_p[k] != 0.0 {
                ck.add_to_dense(&mut constant, y_p[k]);
            }
            for (i, fi) in coeffs.iter_mut().enumerate() {
                let w = basis[(k, i)];
                if w != 0.0 {
                    ck.add_to_dense(fi, w);
                }
            }
        }
        f0.push(constant);
        f.push(coeffs);
    }
    Ok((DenseProblem { c, offset, f0, f }, reduction))
}

fn null_space_reduction(p: &ConicProblem) -> Result<Reduction, Inconsistent> {
    let n = p.num_vars;
    let rows = p.equalities.len();
    let dim = rows.max(n);
    // Zero-padded to at least n rows so the SVD yields a full right basis.
    let mut a = DMatrix::zeros(dim, n);
    let mut b = DVector::zeros(dim);
    for (r, (row, rhs)) in p.equalities.iter().enumerate() {
        let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            if rhs.abs() > CONSISTENCY_TOL {
                return Err(Inconsistent { residual: rhs.abs() });
            }
            continue;
        }
        for &(k, v) in row {
            a[(r, k)] += v / norm;
        }
        b[r] = rhs / norm;
    }

    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u computed");
    let v_t = svd.v_t.as_ref().expect("v_t computed");
    let sv: &DVector<f64> = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]).then(i.cmp(&j)));
    let smax = sv[order[0]].max(1.0);
    let rank = order.iter().filter(|&&i| sv[i] > RANK_TOL * smax).count();

    let mut particular = DVector::zeros(n);
    for &k in &order[..rank] {
        let coef = u.column(k).dot(&b) / sv[k];
        particular.axpy(coef, &v_t.row(k).transpose(), 1.0);
    }
    let residual = (&a * &particular - &b).norm();
    if residual > CONSISTENCY_TOL * (1.0 + b.norm()) {
        return Err(Inconsistent { residual });
    }

    let mut basis = DMatrix::zeros(n, n - rank);
    for (c, &k) in order[rank..].iter().enumerate() {
        basis.set_column(c, &v_t.row(k).transpose());
    }
    Ok(Reduction { particular, basis })
}
