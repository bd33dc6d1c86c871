//! Sparse linear algebra: CSR storage, constrained systems and a direct solver.
//!
//! Factorization is delegated to `faer`'s sparse LU with partial pivoting, which
//! tolerates the indefinite saddle-point systems produced by the mixed fluid
//! elements. Every solve measures its own residual.

use std::collections::BTreeMap;
use std::io::{self, Write};

use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::linalg::solvers::Solve;
use faer::Mat;
use thiserror::Error;

/// Relative residual every accepted solve must meet.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Pivot threshold, relative to the row scale, below which a matrix is singular.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("matrix is singular (relative residual {residual:.3e})")]
    Singular { residual: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols, "({i},{j}) out of range");
        self.entries.push((i, j, v));
    }

    /// Add every entry of `m` shifted by the given offsets and scaled.
    pub fn add_matrix(&mut self, m: &SparseMatrix, row_off: usize, col_off: usize, scale: f64) {
        for i in 0..m.nrows {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                self.add(i + row_off, m.col_idx[k] + col_off, scale * m.values[k]);
            }
        }
    }

    /// Add the transpose of `m`, shifted and scaled.
    pub fn add_transpose(&mut self, m: &SparseMatrix, row_off: usize, col_off: usize, scale: f64) {
        for i in 0..m.nrows {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                self.add(m.col_idx[k] + row_off, i + col_off, scale * m.values[k]);
            }
        }
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries
            .sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut b = TripletBuilder::new(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    b.add(i, j, v);
                }
            }
        }
        b.build()
    }

    /// Wrap raw CSR arrays. Column indices must be sorted and unique per row.
    pub fn from_csr_parts(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        assert_eq!(row_ptr.len(), nrows + 1);
        assert_eq!(col_idx.len(), values.len());
        debug_assert!((0..nrows).all(|i| col_idx[row_ptr[i]..row_ptr[i + 1]].windows(2).all(|w| w[0] < w[1])));
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn spmv(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "spmv dimension mismatch");
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `y += scale * A x`
    pub fn spmv_add(&self, x: &[f64], scale: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let s: f64 = self.row(i).map(|(j, v)| v * x[j]).sum();
            *yi += scale * s;
        }
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.spmv(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        b.add_transpose(self, 0, 0, 1.0);
        b.build()
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `a*self + b*other`, patterns merged.
    pub fn linear_combination(&self, a: f64, other: &SparseMatrix, b: f64) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        t.add_matrix(self, 0, 0, a);
        t.add_matrix(other, 0, 0, b);
        t.build()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// MatrixMarket coordinate (real general) export.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }

    fn to_csc_parts(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut col_ptr = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            col_ptr[j + 1] += 1;
        }
        for j in 0..self.ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut next = col_ptr.clone();
        let mut row_idx = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let dst = next[j];
                row_idx[dst] = i;
                vals[dst] = self.values[k];
                next[j] += 1;
            }
        }
        (col_ptr, row_idx, vals)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `y += a x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Sparse LU factorization of a square matrix.
pub struct Factorization {
    matrix: SparseMatrix,
    lu: Lu<usize, f64>,
    symbolic: SymbolicLu<usize>,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.matrix.nrows)
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

fn csc_ref<'a>(
    n: usize,
    col_ptr: &'a [usize],
    row_idx: &'a [usize],
    vals: &'a [f64],
) -> SparseColMatRef<'a, usize, f64> {
    let sym = SymbolicSparseColMatRef::new_checked(n, n, col_ptr, None, row_idx);
    SparseColMatRef::new(sym, vals)
}

impl Factorization {
    pub fn new(matrix: SparseMatrix) -> Result<Self, SolveError> {
        Self::build(matrix, None)
    }

    /// Refactor a matrix with the same sparsity pattern as `self`, reusing the
    /// symbolic analysis.
    pub fn refactor(&self, matrix: SparseMatrix) -> Result<Self, SolveError> {
        if matrix.row_ptr == self.matrix.row_ptr && matrix.col_idx == self.matrix.col_idx {
            Self::build(matrix, Some(self.symbolic.clone()))
        } else {
            Self::build(matrix, None)
        }
    }

    fn build(matrix: SparseMatrix, symbolic: Option<SymbolicLu<usize>>) -> Result<Self, SolveError> {
        if matrix.nrows != matrix.ncols {
            return Err(SolveError::DimensionMismatch(format!(
                "matrix is {}x{}",
                matrix.nrows, matrix.ncols
            )));
        }
        let n = matrix.nrows;
        check_row_scales(&matrix)?;
        let (col_ptr, row_idx, vals) = matrix.to_csc_parts();
        let a = csc_ref(n, &col_ptr, &row_idx, &vals);
        let symbolic = match symbolic {
            Some(s) => s,
            None => SymbolicLu::try_new(a.symbolic())
                .map_err(|_| SolveError::Singular { residual: f64::INFINITY })?,
        };
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), a)
            .map_err(|_| SolveError::Singular { residual: f64::INFINITY })?;
        Ok(Self {
            matrix,
            lu,
            symbolic,
        })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solve `A x = b`, refining once if needed, and enforce the residual bound.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SolveError> {
        if b.len() != self.dim() {
            return Err(SolveError::DimensionMismatch(format!(
                "rhs has {} entries, matrix has {} rows",
                b.len(),
                self.dim()
            )));
        }
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = self.raw_solve(b);
        let mut res = self.residual_norm(&x, b) / bnorm;
        for _ in 0..2 {
            if res <= 0.1 * RESIDUAL_TOLERANCE || !res.is_finite() {
                break;
            }
            let mut r = b.to_vec();
            self.matrix.spmv_add(&x, -1.0, &mut r);
            let dx = self.raw_solve(&r);
            axpy(1.0, &dx, &mut x);
            res = self.residual_norm(&x, b) / bnorm;
        }
        if !(res <= RESIDUAL_TOLERANCE) {
            return Err(SolveError::Singular { residual: res });
        }
        Ok(x)
    }

    fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut r = b.to_vec();
        self.matrix.spmv_add(x, -1.0, &mut r);
        norm2(&r)
    }
}

fn check_row_scales(m: &SparseMatrix) -> Result<(), SolveError> {
    for i in 0..m.nrows {
        let scale = m.row(i).fold(0.0_f64, |a, (_, v)| a.max(v.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return Err(SolveError::Singular { residual: f64::INFINITY });
        }
    }
    Ok(())
}

/// Solve `A x = b` with a fresh factorization.
pub fn solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, SolveError> {
    if a.nrows() != b.len() {
        return Err(SolveError::DimensionMismatch(format!(
            "matrix has {} rows, rhs has {}",
            a.nrows(),
            b.len()
        )));
    }
    Factorization::new(a.clone())?.solve(b)
}

/// Prescribed values for a subset of unknowns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    values: BTreeMap<usize, f64>,
}

impl Constraints {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, dof: usize, value: f64) {
        self.values.insert(dof, value);
    }

    pub fn contains(&self, dof: usize) -> bool {
        self.values.contains_key(&dof)
    }

    pub fn get(&self, dof: usize) -> Option<f64> {
        self.values.get(&dof).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    pub fn dofs(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.keys().copied()
    }

    /// Same dofs with every value replaced by `f(dof)`.
    pub fn with_values(&self, f: impl Fn(usize) -> f64) -> Self {
        Self {
            values: self.values.keys().map(|&k| (k, f(k))).collect(),
        }
    }

    /// Shift every dof index by `offset`.
    pub fn shifted(&self, offset: usize) -> Self {
        Self {
            values: self.values.iter().map(|(&k, &v)| (k + offset, v)).collect(),
        }
    }

    pub fn extend(&mut self, other: &Constraints) {
        for (k, v) in other.iter() {
            self.set(k, v);
        }
    }
}

/// A linear system with Dirichlet rows and columns eliminated symmetrically.
///
/// The eliminated matrix keeps a unit diagonal on constrained rows; the removed
/// column entries are kept to correct right-hand sides for inhomogeneous values.
#[derive(Debug)]
pub struct ConstrainedSystem {
    factorization: Factorization,
    lifting: Vec<(usize, Vec<(usize, f64)>)>,
    constrained: Vec<bool>,
}

impl ConstrainedSystem {
    pub fn new(matrix: &SparseMatrix, constrained_dofs: impl IntoIterator<Item = usize>) -> Result<Self, SolveError> {
        let (reduced, lifting, constrained) = eliminate(matrix, constrained_dofs);
        Ok(Self {
            factorization: Factorization::new(reduced)?,
            lifting,
            constrained,
        })
    }

    /// Same as `new`, reusing the symbolic analysis of `previous` when the pattern matches.
    pub fn refactor(
        previous: &ConstrainedSystem,
        matrix: &SparseMatrix,
        constrained_dofs: impl IntoIterator<Item = usize>,
    ) -> Result<Self, SolveError> {
        let (reduced, lifting, constrained) = eliminate(matrix, constrained_dofs);
        Ok(Self {
            factorization: previous.factorization.refactor(reduced)?,
            lifting,
            constrained,
        })
    }

    pub fn dim(&self) -> usize {
        self.constrained.len()
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    /// Solve with the prescribed values in `bc` (dofs missing from `bc` are set to 0).
    pub fn solve(&self, rhs: &[f64], bc: &Constraints) -> Result<Vec<f64>, SolveError> {
        if rhs.len() != self.dim() {
            return Err(SolveError::DimensionMismatch(format!(
                "rhs has {} entries, system has {}",
                rhs.len(),
                self.dim()
            )));
        }
        let mut b = rhs.to_vec();
        for (c, col) in &self.lifting {
            let g = bc.get(*c).unwrap_or(0.0);
            if g != 0.0 {
                for &(i, a) in col {
                    b[i] -= a * g;
                }
            }
        }
        for (i, &is_c) in self.constrained.iter().enumerate() {
            if is_c {
                b[i] = bc.get(i).unwrap_or(0.0);
            }
        }
        self.factorization.solve(&b)
    }
}

#[allow(clippy::type_complexity)]
fn eliminate(
    matrix: &SparseMatrix,
    constrained_dofs: impl IntoIterator<Item = usize>,
) -> (SparseMatrix, Vec<(usize, Vec<(usize, f64)>)>, Vec<bool>) {
    let n = matrix.nrows();
    let mut constrained = vec![false; n];
    for d in constrained_dofs {
        constrained[d] = true;
    }
    let mut lifting: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    // filtering sorted CSR rows keeps them sorted, so no triplet sort is needed
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(matrix.nnz());
    let mut values = Vec::with_capacity(matrix.nnz());
    row_ptr.push(0);
    for i in 0..n {
        if constrained[i] {
            col_idx.push(i);
            values.push(1.0);
        } else {
            for (j, v) in matrix.row(i) {
                if constrained[j] {
                    lifting.entry(j).or_default().push((i, v));
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
        }
        row_ptr.push(col_idx.len());
    }
    let reduced = SparseMatrix::from_csr_parts(n, n, row_ptr, col_idx, values);
    (reduced, lifting.into_iter().collect(), constrained)
}

/// Dense LU with partial pivoting; the reference oracle for the sparse path.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn new(a: &[Vec<f64>]) -> Result<Self, SolveError> {
        let n = a.len();
        let mut lu: Vec<Vec<f64>> = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i][k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            let scale = a[perm[p]].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if pmax <= PIVOT_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
                return Err(SolveError::Singular { residual: f64::INFINITY });
            }
            lu.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..n {
                let f = lu[i][k] / lu[k][k];
                lu[i][k] = f;
                for j in k + 1..n {
                    lu[i][j] -= f * lu[k][j];
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[i][j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu[i][j] * y[j];
            }
            y[i] /= self.lu[i][i];
        }
        y
    }

    /// Product of the pivots (sign included).
    pub fn determinant_sign_and_min_pivot(&self) -> (f64, f64) {
        let n = self.lu.len();
        let mut sign = if permutation_parity(&self.perm) { -1.0 } else { 1.0 };
        let mut min_pivot = f64::INFINITY;
        for i in 0..n {
            sign *= self.lu[i][i].signum();
            min_pivot = min_pivot.min(self.lu[i][i].abs());
        }
        (sign, min_pivot)
    }
}

fn permutation_parity(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    let mut odd = false;
    for i in 0..perm.len() {
        if seen[i] {
            continue;
        }
        let mut len = 0;
        let mut j = i;
        while !seen[j] {
            seen[j] = true;
            j = perm[j];
            len += 1;
        }
        if len % 2 == 0 {
            odd = !odd;
        }
    }
    odd
}

/// Dense symmetric eigenvalue check via Cholesky: `true` if positive definite.
pub fn dense_is_positive_definite(a: &[Vec<f64>]) -> bool {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return false;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| dot(r, x)).collect()
    }

    #[test]
    fn identity_solve() {
        let b = vec![1.0, -2.0, 3.5];
        let x = solve(&SparseMatrix::identity(3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn saddle_permutation() {
        let a = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let x = solve(&a, &[1.0, 2.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_spd_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20;
        let g: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| g[i][k] * g[j][k]).sum::<f64>();
            }
            a[i][i] += n as f64;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = solve(&SparseMatrix::from_dense(&a), &b).unwrap();
        let y = DenseLu::new(&a).unwrap().solve(&b);
        let err: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(err / norm2(&y) < 1e-10);
        let r: Vec<f64> = dense_mul(&a, &x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) / norm2(&b) <= RESIDUAL_TOLERANCE);
    }

    #[test]
    fn singular_and_dimension_errors() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(solve(&a, &[1.0, 0.0]), Err(SolveError::Singular { .. })));
        let z = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(solve(&z, &[1.0, 1.0]), Err(SolveError::Singular { .. })));
        assert!(matches!(
            solve(&SparseMatrix::identity(2), &[1.0]),
            Err(SolveError::DimensionMismatch(_))
        ));
        assert!(DenseLu::new(&[vec![1.0, 2.0], vec![2.0, 4.0]]).is_err());
    }

    #[test]
    fn spmv_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let mut a = vec![vec![0.0; n]; n];
        for row in a.iter_mut() {
            for v in row.iter_mut() {
                if rng.random_bool(0.1) {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = SparseMatrix::from_dense(&a);
        let y = s.spmv(&x);
        let z = dense_mul(&a, &x);
        for (p, q) in y.iter().zip(&z) {
            assert!((p - q).abs() < 1e-13);
        }
        assert_eq!(SparseMatrix::zeros(3, 3).spmv(&[1.0, 2.0, 3.0]), vec![0.0; 3]);
        assert_eq!(SparseMatrix::identity(3).spmv(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn triplets_sum_duplicates() {
        let mut b = TripletBuilder::new(2, 2);
        b.add(1, 0, 1.0);
        b.add(0, 1, 2.0);
        b.add(1, 0, 3.0);
        let m = b.build();
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.transpose().get(0, 1), 4.0);
    }

    #[test]
    fn constrained_elimination_matches_dense() {
        // 1D Laplacian with u(0)=1, u(n-1)=2
        let n = 8;
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = 2.0;
            if i > 0 {
                a[i][i - 1] = -1.0;
            }
            if i + 1 < n {
                a[i][i + 1] = -1.0;
            }
        }
        let sys = ConstrainedSystem::new(&SparseMatrix::from_dense(&a), [0, n - 1]).unwrap();
        let mut bc = Constraints::new();
        bc.set(0, 1.0);
        bc.set(n - 1, 2.0);
        let x = sys.solve(&vec![0.0; n], &bc).unwrap();
        for (i, xi) in x.iter().enumerate() {
            let exact = 1.0 + i as f64 / (n - 1) as f64;
            assert!((xi - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn refactor_reuses_pattern() {
        let a = SparseMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let f = Factorization::new(a.clone()).unwrap();
        let g = f.refactor(a.scaled(2.0)).unwrap();
        let x = g.solve(&[2.0, 2.0]).unwrap();
        let y = f.solve(&[1.0, 1.0]).unwrap();
        assert!((x[0] - y[0]).abs() < 1e-14 && (x[1] - y[1]).abs() < 1e-14);
    }

    #[test]
    fn matrix_market_header() {
        let mut buf = Vec::new();
        SparseMatrix::identity(2).write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 "));
    }
}
