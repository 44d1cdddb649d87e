//! Compressed sparse row matrices, a preconditioned conjugate gradient
//! solver and a sparse Cholesky factorization for the symmetric positive
//! definite systems of the gradient flow.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Conj, Mat, Side};

use crate::error::{Error, Result};

/// Square or rectangular matrix in CSR layout.
///
/// Column indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(row, col, _) in triplets {
            if row >= n_rows || col >= n_cols {
                return Err(Error::IndexOutOfRange {
                    row,
                    col,
                    n_rows,
                    n_cols,
                });
            }
        }
        let mut counts = vec![0usize; n_rows + 1];
        for &(row, _, _) in triplets {
            counts[row + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, then sort and merge each row
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(row, col, value) in triplets {
            let k = next[row];
            cols[k] = col;
            vals[k] = value;
            next[row] += 1;
        }

        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for row in 0..n_rows {
            scratch.clear();
            scratch.extend(
                cols[counts[row]..counts[row + 1]]
                    .iter()
                    .copied()
                    .zip(vals[counts[row]..counts[row + 1]].iter().copied()),
            );
            scratch.sort_unstable_by_key(|&(c, _)| c);
            for &(col, value) in &scratch {
                if col_indices.len() > row_offsets[row] && *col_indices.last().unwrap() == col {
                    *values.last_mut().unwrap() += value;
                } else {
                    col_indices.push(col);
                    values.push(value);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::identity(diag.len());
        m.values.copy_from_slice(diag);
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the stored values; the sparsity pattern is fixed.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Position of entry `(row, col)` in the value array, if stored.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let start = self.row_offsets[row];
        let end = self.row_offsets[row + 1];
        self.col_indices[start..end]
            .binary_search(&col)
            .ok()
            .map(|k| start + k)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Returns `true` when every off-diagonal entry is zero.
    pub fn is_diagonal(&self) -> bool {
        (0..self.n_rows).all(|row| {
            (self.row_offsets[row]..self.row_offsets[row + 1])
                .all(|k| self.col_indices[k] == row || self.values[k] == 0.0)
        })
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                actual: x.len(),
            });
        }
        if y.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                actual: y.len(),
            });
        }
        for (row, yi) in y.iter_mut().enumerate() {
            let range = self.row_offsets[row]..self.row_offsets[row + 1];
            *yi = self.col_indices[range.clone()]
                .iter()
                .zip(&self.values[range])
                .map(|(&c, &v)| v * x[c])
                .sum();
        }
        Ok(())
    }

    /// Quadratic form `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        let ax = self.spmv(x)?;
        Ok(dot(x, &ax))
    }

    /// Dense row-major copy, for tests and tiny systems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (row, dense_row) in dense.iter_mut().enumerate() {
            for k in self.row_offsets[row]..self.row_offsets[row + 1] {
                dense_row[self.col_indices[k]] += self.values[k];
            }
        }
        dense
    }

    /// Restriction to the rows and columns listed in `keep` (in that order).
    pub fn submatrix(&self, keep: &[usize]) -> SparseMatrix {
        let mut map = vec![usize::MAX; self.n_cols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut row_offsets = Vec::with_capacity(keep.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for &old_row in keep {
            for k in self.row_offsets[old_row]..self.row_offsets[old_row + 1] {
                let new_col = map[self.col_indices[k]];
                if new_col != usize::MAX {
                    col_indices.push(new_col);
                    values.push(self.values[k]);
                }
            }
            // column order is preserved only when `keep` is increasing
            let start = *row_offsets.last().unwrap();
            let mut pairs: Vec<(usize, f64)> = col_indices[start..]
                .iter()
                .copied()
                .zip(values[start..].iter().copied())
                .collect();
            pairs.sort_unstable_by_key(|p| p.0);
            for (i, (c, v)) in pairs.into_iter().enumerate() {
                col_indices[start + i] = c;
                values[start + i] = v;
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix {
            n_rows: keep.len(),
            n_cols: keep.len(),
            row_offsets,
            col_indices,
            values,
        }
    }
}

/// Sparse `LLᵀ` factorization of a symmetric positive definite matrix.
///
/// The symbolic analysis (fill-reducing ordering and elimination tree) is
/// done once; [`SparseCholesky::refactor`] reuses it for any matrix with
/// the same sparsity pattern.
pub struct SparseCholesky {
    pattern: SymbolicSparseColMat<usize>,
    symbolic: SymbolicLlt<usize>,
    numeric: Llt<usize, f64>,
}

impl std::fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseCholesky").field("n", &self.pattern.nrows()).finish()
    }
}

impl SparseCholesky {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.n_rows != a.n_cols {
            return Err(Error::DimensionMismatch { expected: a.n_rows, actual: a.n_cols });
        }
        // a symmetric CSR matrix is its own CSC transpose
        let pattern = SymbolicSparseColMat::new_checked(
            a.n_rows,
            a.n_cols,
            a.row_offsets.clone(),
            None,
            a.col_indices.clone(),
        );
        let symbolic = SymbolicLlt::try_new(pattern.as_ref(), Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let numeric = Self::factor(&pattern, &symbolic, a)?;
        Ok(Self { pattern, symbolic, numeric })
    }

    fn factor(
        pattern: &SymbolicSparseColMat<usize>,
        symbolic: &SymbolicLlt<usize>,
        a: &SparseMatrix,
    ) -> Result<Llt<usize, f64>> {
        let mat = SparseColMatRef::new(pattern.as_ref(), &a.values);
        Llt::try_new_with_symbolic(symbolic.clone(), mat, Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))
    }

    /// Recomputes the numeric factor for `a`, which must have the pattern
    /// of the matrix passed to [`SparseCholesky::new`].
    pub fn refactor(&mut self, a: &SparseMatrix) -> Result<()> {
        if a.row_offsets != self.pattern.col_ptr() || a.col_indices != self.pattern.row_idx() {
            return Err(Error::Factorization("sparsity pattern changed".into()));
        }
        self.numeric = Self::factor(&self.pattern, &self.symbolic, a)?;
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.pattern.nrows();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: b.len() });
        }
        let mut x = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
        self.numeric.solve_in_place_with_conj(Conj::No, x.as_mut());
        Ok((0..n).map(|i| x[(i, 0)]).collect())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig {
    pub rel_tolerance: f64,
    /// `None` means `10 * n`.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-12,
            max_iterations: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖b − A x‖ / ‖b‖`.
    pub residual: f64,
}

/// Solves `A x = b` for SPD `A` starting from `x = 0`.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], cfg: &CgConfig) -> Result<CgSolution> {
    cg_solve_from(a, b, vec![0.0; b.len()], cfg)
}

/// Solves `A x = b` for SPD `A` starting from the initial guess `x0`.
pub fn cg_solve_from(
    a: &SparseMatrix,
    b: &[f64],
    x0: Vec<f64>,
    cfg: &CgConfig,
) -> Result<CgSolution> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: a.n_cols(),
        });
    }
    if b.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: if b.len() != n { b.len() } else { x0.len() },
        });
    }
    if !(cfg.rel_tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "CG tolerance must be positive, got {}",
            cfg.rel_tolerance
        )));
    }
    let max_iterations = cfg.max_iterations.unwrap_or(10 * n.max(1));
    if max_iterations == 0 {
        return Err(Error::InvalidParameter(
            "CG max_iterations must be at least 1".into(),
        ));
    }

    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = match cfg.preconditioner {
        Preconditioner::None => vec![1.0; n],
        Preconditioner::Jacobi => a
            .diagonal()
            .into_iter()
            .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
            .collect(),
    };

    let mut x = x0;
    let mut r = a.spmv(&x)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let target = cfg.rel_tolerance * b_norm;
    let mut r_norm = norm2(&r);
    if r_norm <= target {
        return Ok(CgSolution {
            x,
            iterations: 0,
            residual: r_norm / b_norm,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for iteration in 1..=max_iterations {
        a.spmv_into(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            // A is not positive definite along p (or p vanished numerically)
            return Err(Error::CgNotConverged {
                iterations: iteration,
                residual: r_norm / b_norm,
            });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        r_norm = norm2(&r);
        if r_norm <= target {
            return Ok(CgSolution {
                x,
                iterations: iteration,
                residual: r_norm / b_norm,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::CgNotConverged {
        iterations: max_iterations,
        residual: r_norm / b_norm,
    })
}
