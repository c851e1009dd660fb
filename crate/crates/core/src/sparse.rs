//! Compressed sparse row matrices and a preconditioned conjugate gradient
//! solver for the symmetric positive definite systems produced by assembly.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows above this count use a parallel mat-vec. Each row is still summed in
/// a fixed order, so results do not depend on the thread count.
const PAR_ROWS: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square `n × n` matrix from `(row, col, value)` triplets; duplicates are
    /// summed in input order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = fill[r];
            cols[k] = c;
            vals[k] = v;
            fill[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for r in 0..n {
            entries.clear();
            entries.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            // stable sort keeps input order among duplicates
            entries.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < entries.len() {
                let c = entries[i].0;
                let mut s = 0.0;
                while i < entries.len() && entries[i].0 == c {
                    s += entries[i].1;
                    i += 1;
                }
                col_idx.push(c);
                values.push(s);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            s += self.values[k] * x[self.col_idx[k]];
        }
        s
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        if self.n >= PAR_ROWS {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Product with a vector of a different length: rows of `self` restricted
    /// to `rows`, columns to `cols` (index maps into the full matrix).
    pub fn block_mul(&self, rows: &[usize], col_pos: &[Option<usize>], x: &[f64]) -> Vec<f64> {
        rows.iter()
            .map(|&i| {
                self.row(i)
                    .filter_map(|(j, v)| col_pos[j].map(|p| v * x[p]))
                    .sum()
            })
            .collect()
    }

    /// Principal submatrix on the rows/columns flagged in `keep`, renumbered
    /// in increasing order.
    pub fn principal_submatrix(&self, keep: &[bool]) -> CsrMatrix {
        let mut new_index = vec![usize::MAX; self.n];
        let mut m = 0;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                new_index[i] = m;
                m += 1;
            }
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.n {
            if !keep[i] {
                continue;
            }
            for (j, v) in self.row(i) {
                if keep[j] {
                    col_idx.push(new_index[j]);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n: m,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `self + s * other` for matrices with identical sparsity patterns.
    pub fn add_scaled(&self, s: f64, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.row_ptr, other.row_ptr);
        assert_eq!(self.col_idx, other.col_idx);
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v += s * w;
        }
        out
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

#[derive(Debug, Clone)]
enum Precond {
    Jacobi(Vec<f64>),
    /// Lower factor, diagonal stored last in each row.
    Ic0 {
        lower: CsrMatrix,
    },
}

/// Incomplete Cholesky with zero fill; falls back to Jacobi when the
/// factorization breaks down even after diagonal shifting.
#[derive(Debug, Clone)]
pub struct Preconditioner(Precond);

impl Preconditioner {
    pub fn new(a: &CsrMatrix) -> Self {
        for shift in [0.0, 1e-3, 1e-2, 1e-1] {
            if let Some(lower) = ic0(a, shift) {
                return Preconditioner(Precond::Ic0 { lower });
            }
        }
        Self::jacobi(a)
    }

    pub fn jacobi(a: &CsrMatrix) -> Self {
        Preconditioner(Precond::Jacobi(
            a.diagonal().iter().map(|d| 1.0 / d).collect(),
        ))
    }

    pub fn is_incomplete_cholesky(&self) -> bool {
        matches!(self.0, Precond::Ic0 { .. })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match &self.0 {
            Precond::Jacobi(inv) => {
                for ((zi, ri), d) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * d;
                }
            }
            Precond::Ic0 { lower } => {
                let n = lower.n;
                // L y = r
                for i in 0..n {
                    let (lo, hi) = (lower.row_ptr[i], lower.row_ptr[i + 1]);
                    let mut s = r[i];
                    for k in lo..hi - 1 {
                        s -= lower.values[k] * z[lower.col_idx[k]];
                    }
                    z[i] = s / lower.values[hi - 1];
                }
                // L^T x = y, column-oriented sweep over the rows of L
                for i in (0..n).rev() {
                    let (lo, hi) = (lower.row_ptr[i], lower.row_ptr[i + 1]);
                    z[i] /= lower.values[hi - 1];
                    let zi = z[i];
                    for k in lo..hi - 1 {
                        z[lower.col_idx[k]] -= lower.values[k] * zi;
                    }
                }
            }
        }
    }
}

fn ic0(a: &CsrMatrix, shift: f64) -> Option<CsrMatrix> {
    let n = a.n;
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for i in 0..n {
        for (j, v) in a.row(i) {
            if j <= i {
                col_idx.push(j);
                values.push(if j == i { v * (1.0 + shift) } else { v });
            }
        }
        if col_idx.last() != Some(&i) {
            return None;
        }
        row_ptr.push(col_idx.len());
    }
    // row-wise left-looking factorization restricted to the pattern
    let mut pos = vec![usize::MAX; n];
    for i in 0..n {
        let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
        for k in lo..hi {
            pos[col_idx[k]] = k;
        }
        for k in lo..hi - 1 {
            let j = col_idx[k];
            // l_ij = (a_ij - sum_{m<j} l_im l_jm) / l_jj
            let (jlo, jhi) = (row_ptr[j], row_ptr[j + 1]);
            let mut s = values[k];
            for m in jlo..jhi - 1 {
                let p = pos[col_idx[m]];
                if p != usize::MAX && p < k {
                    s -= values[p] * values[m];
                }
            }
            values[k] = s / values[jhi - 1];
        }
        let mut d = values[hi - 1];
        for k in lo..hi - 1 {
            d -= values[k] * values[k];
        }
        for k in lo..hi {
            pos[col_idx[k]] = usize::MAX;
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        values[hi - 1] = d.sqrt();
    }
    Some(CsrMatrix {
        n,
        row_ptr,
        col_idx,
        values,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Default relative residual target of the linear solves.
pub const CG_TOL: f64 = 1e-12;

/// Conjugate gradients on the SPD system `a x = b` starting from zero.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    precond: &Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.n;
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for it in 0..max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverDiverged {
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: it + 1,
                    relative_residual: rel,
                },
            ));
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::SolverDiverged {
        iterations: max_iter,
        residual: rel,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverBackend {
    /// Sparse Cholesky factorization (fill-reducing ordering), then
    /// triangular solves; one step of iterative refinement when needed.
    #[default]
    Cholesky,
    /// Conjugate gradients with incomplete Cholesky preconditioning.
    Cg,
}

/// Relative residual accepted from a direct solve once iterative refinement
/// stops improving it.
const STAGNATION_FLOOR: f64 = 1e-10;

enum Factor {
    Cholesky(faer::sparse::linalg::solvers::Llt<usize, f64>),
    Cg(Preconditioner),
}

impl std::fmt::Debug for Factor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Factor::Cholesky(_) => write!(f, "Cholesky"),
            Factor::Cg(p) => write!(f, "Cg({p:?})"),
        }
    }
}

/// An SPD matrix prepared for repeated solves to relative residual `tol`.
#[derive(Debug)]
pub struct SpdSolver {
    pub matrix: CsrMatrix,
    factor: Factor,
    pub tol: f64,
}

impl SpdSolver {
    pub fn new(matrix: CsrMatrix) -> Self {
        Self::with_backend(matrix, SolverBackend::default())
    }

    pub fn with_backend(matrix: CsrMatrix, backend: SolverBackend) -> Self {
        let factor = match backend {
            SolverBackend::Cholesky => match cholesky(&matrix) {
                Some(llt) => Factor::Cholesky(llt),
                None => Factor::Cg(Preconditioner::new(&matrix)),
            },
            SolverBackend::Cg => Factor::Cg(Preconditioner::new(&matrix)),
        };
        Self {
            matrix,
            factor,
            tol: CG_TOL,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_with_stats(b).map(|(x, _)| x)
    }

    pub fn solve_with_stats(&self, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        match &self.factor {
            Factor::Cg(p) => {
                let max_iter = 10 * self.matrix.n + 100;
                pcg(&self.matrix, b, p, self.tol, max_iter)
            }
            Factor::Cholesky(llt) => {
                let bnorm = norm(b);
                let mut x = llt_solve(llt, b);
                let mut rel = f64::INFINITY;
                for refinement in 0..4 {
                    let previous = rel;
                    let r: Vec<f64> = b
                        .iter()
                        .zip(self.matrix.mul_vec(&x))
                        .map(|(bi, ai)| bi - ai)
                        .collect();
                    rel = if bnorm > 0.0 { norm(&r) / bnorm } else { 0.0 };
                    // a stagnating refinement has reached the rounding floor
                    // of the factorization
                    let stalled = rel > 0.5 * previous && rel <= STAGNATION_FLOOR;
                    if rel <= self.tol || stalled {
                        return Ok((
                            x,
                            SolveStats {
                                iterations: refinement,
                                relative_residual: rel,
                            },
                        ));
                    }
                    let dx = llt_solve(llt, &r);
                    for (xi, di) in x.iter_mut().zip(dx) {
                        *xi += di;
                    }
                }
                Err(Error::SolverDiverged {
                    iterations: 4,
                    residual: rel,
                })
            }
        }
    }
}

fn cholesky(a: &CsrMatrix) -> Option<faer::sparse::linalg::solvers::Llt<usize, f64>> {
    use faer::sparse::{SparseColMat, Triplet};
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..a.n {
        for (j, v) in a.row(i) {
            t.push(Triplet::new(i, j, v));
        }
    }
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &t).ok()?;
    m.sp_cholesky(faer::Side::Lower).ok()
}

fn llt_solve(llt: &faer::sparse::linalg::solvers::Llt<usize, f64>, b: &[f64]) -> Vec<f64> {
    use faer::linalg::solvers::Solve;
    let col = faer::Col::<f64>::from_fn(b.len(), |i| b[i]);
    let x = llt.solve(&col);
    (0..b.len()).map(|i| x[i]).collect()
}
