use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sparse::{dot, CsrMatrix, SpdSolver};

/// Relative change of the eigenvalue estimate between iterations at which the
/// iteration stops.
pub const EIGEN_TOL: f64 = 1e-10;
pub const EIGEN_MAX_ITERS: usize = 500;
/// Relative Ritz residual of the returned vector.
const RITZ_RESIDUAL_TOL: f64 = 1e-10;

/// Smallest eigenpair of `K x = λ M x` by inverse iteration accelerated with a
/// Lanczos recurrence on `K⁻¹M` in the `M` inner product (full
/// reorthogonalization). Every iteration applies `K⁻¹M` once, exactly as plain
/// inverse iteration does, but the estimate is the best one in the whole
/// Krylov space, which matters when `λ₂/λ₁` is close to one.
///
/// Stops once the estimate changes by less than `tol` (relative) and the Ritz
/// vector's residual is below `RITZ_RESIDUAL_TOL`.
///
/// Returns `(λ, x, iterations)` with `x` not normalized.
pub fn lanczos_smallest(
    stiffness: &SpdSolver,
    mass: &CsrMatrix,
    start: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(f64, Vec<f64>, usize)> {
    let n = start.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    let mq = mass.mul_vec(start);
    let nrm = dot(start, &mq).sqrt();
    if !(nrm > 0.0) {
        return Err(Error::InvalidParameter("zero start vector".into()));
    }
    let mut q: Vec<f64> = start.iter().map(|v| v / nrm).collect();
    let mut mq: Vec<f64> = mq.iter().map(|v| v / nrm).collect();
    let mut prev_theta = f64::NAN;
    let mut change = f64::INFINITY;
    let max_steps = max_iters.min(n);
    for step in 0..max_steps {
        let mut w = stiffness.solve(&mq)?;
        let a = dot(&w, &mq);
        alpha.push(a);
        basis.push(q.clone());
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            let mw = mass.mul_vec(&w);
            let coeffs: Vec<f64> = basis.iter().map(|b| dot(b, &mw)).collect();
            for (b, c) in basis.iter().zip(&coeffs) {
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let mw = mass.mul_vec(&w);
        let b = dot(&w, &mw).max(0.0).sqrt();

        let theta = largest_tridiagonal_eigenvalue(&alpha, &beta);
        if step > 0 {
            change = ((1.0 / theta - 1.0 / prev_theta) / (1.0 / theta)).abs();
        }
        prev_theta = theta;
        let invariant = b <= 1e-14 * a.abs();
        if (step >= 2 && change < tol) || invariant || step + 1 == n {
            let (s, theta_ritz) = tridiagonal_top_eigenvector(&alpha, &beta);
            // the eigenvalue settles quadratically faster than the vector;
            // the Ritz residual of K⁻¹M is b·|last component of s|
            let vector_residual = b * s[s.len() - 1].abs() / theta_ritz;
            if vector_residual <= RITZ_RESIDUAL_TOL || invariant || step + 1 == n {
                let x = combine(&basis, &s);
                let lambda = 1.0 / theta;
                return Ok((lambda, x, step + 1));
            }
        }
        beta.push(b);
        q = w.iter().map(|v| v / b).collect();
        mq = mw.iter().map(|v| v / b).collect();
    }
    Err(Error::EigenDiverged {
        iterations: max_steps,
        lambda: 1.0 / prev_theta,
        change,
    })
}

/// Largest eigenvalue of the symmetric tridiagonal matrix by Sturm bisection.
fn largest_tridiagonal_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let off = |i: usize| if i < beta.len() { beta[i].abs() } else { 0.0 };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = off(i) + if i > 0 { off(i - 1) } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    // number of eigenvalues below x
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..k {
            let b2 = if i > 0 {
                beta[i - 1] * beta[i - 1]
            } else {
                0.0
            };
            d = alpha[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvector of the largest eigenvalue of the tridiagonal matrix, with that
/// eigenvalue.
fn tridiagonal_top_eigenvector(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, f64) {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut best = 0;
    for i in 1..k {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    (
        eig.eigenvectors.column(best).iter().copied().collect(),
        eig.eigenvalues[best],
    )
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; basis[0].len()];
    for (b, c) in basis.iter().zip(coeffs) {
        for (xi, bi) in x.iter_mut().zip(b) {
            *xi += c * bi;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sturm_bisection_matches_dense() {
        let alpha = [2.0, -1.0, 0.5, 3.0];
        let beta = [1.0, 0.3, -0.7];
        let mut t = DMatrix::zeros(4, 4);
        for i in 0..4 {
            t[(i, i)] = alpha[i];
            if i < 3 {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let max = SymmetricEigen::new(t).eigenvalues.max();
        assert_relative_eq!(
            largest_tridiagonal_eigenvalue(&alpha, &beta),
            max,
            epsilon = 1e-13
        );
    }

    #[test]
    fn one_dimensional_dirichlet_eigenvalue() {
        // finite differences on (0, 1): λ_h = 4 sin²(πh/2)/h²
        let n = 199;
        let h = 1.0 / (n as f64 + 1.0);
        let mut kt = Vec::new();
        let mut mt = Vec::new();
        for i in 0..n {
            kt.push((i, i, 2.0 / (h * h)));
            mt.push((i, i, 1.0));
            if i + 1 < n {
                kt.push((i, i + 1, -1.0 / (h * h)));
                kt.push((i + 1, i, -1.0 / (h * h)));
            }
        }
        let k = SpdSolver::new(CsrMatrix::from_triplets(n, &kt));
        let m = CsrMatrix::from_triplets(n, &mt);
        let (lambda, x, _) = lanczos_smallest(&k, &m, &vec![1.0; n], 1e-12, 500).unwrap();
        let exact = 4.0 * (std::f64::consts::PI * h / 2.0).sin().powi(2) / (h * h);
        assert_relative_eq!(lambda, exact, max_relative = 1e-10);
        let rq = k.matrix.quadratic_form(&x) / m.quadratic_form(&x);
        assert_relative_eq!(rq, exact, max_relative = 1e-10);
    }

    #[test]
    fn clustered_spectrum_converges() {
        // diagonal pencil with λ₂/λ₁ = 1.0003
        let n = 400;
        let mut kt = Vec::new();
        let mut mt = Vec::new();
        for i in 0..n {
            let lam = if i == 0 { 1.0 } else { 1.0003 + i as f64 };
            kt.push((i, i, lam));
            mt.push((i, i, 1.0));
        }
        let k = SpdSolver::new(CsrMatrix::from_triplets(n, &kt));
        let m = CsrMatrix::from_triplets(n, &mt);
        let (lambda, _, _) = lanczos_smallest(&k, &m, &vec![1.0; n], 1e-10, 500).unwrap();
        assert_relative_eq!(lambda, 1.0, max_relative = 1e-9);
    }
}
