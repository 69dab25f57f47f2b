use std::collections::BTreeMap;

use nalgebra::DMatrix;

/// Symmetric matrix held as upper-triangle entries `(i, j, v)` with `i <= j`;
/// an off-diagonal entry stands for both `(i, j)` and `(j, i)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymSparse {
    entries: BTreeMap<(usize, usize), f64>,
}

impl SymSparse {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let key = if i <= j { (i, j) } else { (j, i) };
        let e = self.entries.entry(key).or_insert(0.0);
        *e += v;
        if *e == 0.0 {
            self.entries.remove(&key);
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.entries.get(&key).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Upper-triangle entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.entries.values_mut() {
            *v *= s;
        }
    }

    pub fn add_to_dense(&self, m: &mut DMatrix<f64>, s: f64) {
        for (i, j, v) in self.iter() {
            m[(i, j)] += s * v;
            if i != j {
                m[(j, i)] += s * v;
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        self.add_to_dense(&mut m, 1.0);
        m
    }
}

/// Affine symmetric-matrix-valued function `F(y) = F_0 + sum_k y_k F_k`
/// constrained to be positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub size: usize,
    pub constant: SymSparse,
    pub coeffs: BTreeMap<usize, SymSparse>,
    pub label: String,
}

impl LmiBlock {
    pub fn new(size: usize, label: impl Into<String>) -> Self {
        LmiBlock {
            size,
            constant: SymSparse::new(),
            coeffs: BTreeMap::new(),
            label: label.into(),
        }
    }

    pub fn add_constant(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.size && j < self.size);
        self.constant.add(i, j, v);
    }

    pub fn add_coeff(&mut self, var: usize, i: usize, j: usize, v: f64) {
        assert!(i < self.size && j < self.size);
        let m = self.coeffs.entry(var).or_default();
        m.add(i, j, v);
        if m.is_empty() {
            self.coeffs.remove(&var);
        }
    }

    /// Adds `(constant + sum coeff_k y_k)` to entry `(i, j)`.
    pub fn add_affine(&mut self, i: usize, j: usize, affine: &AffineExpr) {
        self.add_constant(i, j, affine.constant);
        for &(k, v) in &affine.terms {
            self.add_coeff(k, i, j, v);
        }
    }

    pub fn evaluate(&self, y: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant.to_dense(self.size);
        for (&k, c) in &self.coeffs {
            c.add_to_dense(&mut m, y[k]);
        }
        m
    }

    /// `N^T F(y) N` for an `size x r` matrix `N`. Entries below `drop_tol`
    /// relative to the largest are discarded.
    pub fn congruence(&self, n: &DMatrix<f64>, drop_tol: f64) -> LmiBlock {
        assert_eq!(n.nrows(), self.size);
        let r = n.ncols();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let transform = |m: &SymSparse| {
            let dense = n.transpose() * m.to_dense(self.size) * n;
            let mut out = SymSparse::new();
            for i in 0..r {
                for j in i..r {
                    let v = 0.5 * (dense[(i, j)] + dense[(j, i)]);
                    if v.abs() > drop_tol * scale {
                        out.add(i, j, v);
                    }
                }
            }
            out
        };
        let mut blk = LmiBlock::new(r, self.label.clone());
        blk.constant = transform(&self.constant);
        for (&k, c) in &self.coeffs {
            let t = transform(c);
            if !t.is_empty() {
                blk.coeffs.insert(k, t);
            }
        }
        blk
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .values()
            .map(SymSparse::max_abs)
            .fold(self.constant.max_abs(), f64::max)
    }
}

/// `constant + sum_k coeff_k y_k`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr { constant: c, terms: Vec::new() }
    }

    pub fn var(k: usize) -> Self {
        AffineExpr { constant: 0.0, terms: vec![(k, 1.0)] }
    }

    /// Merges duplicate indices and drops zero coefficients.
    pub fn canonical(mut self) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (k, v) in self.terms.drain(..) {
            *acc.entry(k).or_insert(0.0) += v;
        }
        self.terms = acc.into_iter().filter(|&(_, v)| v != 0.0).collect();
        self
    }

    pub fn scale(&self, s: f64) -> Self {
        AffineExpr {
            constant: self.constant * s,
            terms: self.terms.iter().map(|&(k, v)| (k, v * s)).collect(),
        }
    }

    pub fn plus(&self, other: &AffineExpr) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        AffineExpr { constant: self.constant + other.constant, terms }.canonical()
    }

    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(k, v)| v * y[k]).sum::<f64>()
    }
}

/// `minimize c.y + offset` subject to PSD blocks and `A y = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub blocks: Vec<LmiBlock>,
    /// Sparse equality rows `sum coeff_k y_k = rhs`.
    pub equalities: Vec<(Vec<(usize, f64)>, f64)>,
}

impl ConicProblem {
    pub fn new(num_vars: usize) -> Self {
        ConicProblem {
            num_vars,
            objective: vec![0.0; num_vars],
            objective_offset: 0.0,
            blocks: Vec::new(),
            equalities: Vec::new(),
        }
    }

    /// Appends a fresh variable and returns its index.
    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.objective.push(0.0);
        self.num_vars - 1
    }

    pub fn add_block(&mut self, block: LmiBlock) {
        debug_assert!(block.coeffs.keys().all(|&k| k < self.num_vars));
        self.blocks.push(block);
    }

    /// Appends `affine(y) = 0`.
    pub fn add_equality(&mut self, affine: &AffineExpr) {
        let a = affine.clone().canonical();
        self.equalities.push((a.terms, -a.constant));
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().zip(y).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn equality_residual(&self, y: &[f64]) -> f64 {
        self.equalities
            .iter()
            .map(|(row, rhs)| {
                let lhs: f64 = row.iter().map(|&(k, v)| v * y[k]).sum();
                (lhs - rhs).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.size).collect()
    }
}
