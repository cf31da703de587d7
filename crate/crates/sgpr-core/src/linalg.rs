//! Small dense linear-algebra kernels used across the crate.
//!
//! Sized for this toolkit's problems (hundreds of rows/columns), where an
//! external LAPACK build is not worth the friction.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

/// Euclidean norm of a vector view.
pub fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Compact SVD via one-sided Jacobi rotations.
///
/// Returns `(u, sigma, v)` with `a ≈ u · diag(sigma) · vᵀ`, singular values
/// sorted descending, `u` of shape `m×r` and `v` of shape `n×r` where
/// `r = min(m, n)`. Columns of `u` belonging to zero singular values are zero.
pub fn svd(a: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let (m, n) = a.dim();
    if m < n {
        let (u, s, v) = svd(a.t());
        return (v, s, u);
    }
    let mut w = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let tol = 1e-14;
    for _sweep in 0..64 {
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let (app, aqq, apq) = {
                    let cp = w.column(p);
                    let cq = w.column(q);
                    (cp.dot(&cp), cq.dot(&cq), cp.dot(&cq))
                };
                if app == 0.0 || aqq == 0.0 {
                    continue;
                }
                let rel = apq.abs() / (app * aqq).sqrt();
                if rel <= tol {
                    continue;
                }
                worst = worst.max(rel);
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if worst <= tol {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| norm(w.column(j))).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let mut u = Array2::<f64>::zeros((m, n));
    let mut sigma = Array1::<f64>::zeros(n);
    let mut vs = Array2::<f64>::zeros((n, n));
    for (k, &j) in order.iter().enumerate() {
        sigma[k] = norms[j];
        if norms[j] > 0.0 {
            let col = w.column(j).mapv(|x| x / norms[j]);
            u.column_mut(k).assign(&col);
        }
        vs.column_mut(k).assign(&v.column(j));
    }
    (u, sigma, vs)
}

/// Leading singular triplet `(u, sigma, v)` of `a` by alternating power
/// iteration, optionally warm-started from an estimate of `u`.
pub fn leading_singular_pair(
    a: ArrayView2<f64>,
    warm: Option<ArrayView1<f64>>,
) -> (Array1<f64>, f64, Array1<f64>) {
    let (m, n) = a.dim();
    let mut u = match warm {
        Some(w) if norm(w) > 0.0 => {
            let nw = norm(w);
            w.mapv(|x| x / nw)
        }
        _ => {
            // start from the largest column, which is deterministic
            let mut best = 0;
            let mut best_norm = -1.0;
            for j in 0..n {
                let cn = norm(a.column(j));
                if cn > best_norm {
                    best_norm = cn;
                    best = j;
                }
            }
            if best_norm <= 0.0 {
                return (Array1::zeros(m), 0.0, Array1::zeros(n));
            }
            a.column(best).mapv(|x| x / best_norm)
        }
    };
    let mut sigma = 0.0;
    let mut v = Array1::<f64>::zeros(n);
    for _ in 0..200 {
        let w = a.t().dot(&u);
        let wn = norm(w.view());
        if wn == 0.0 {
            return (u, 0.0, Array1::zeros(n));
        }
        v = w.mapv(|x| x / wn);
        let z = a.dot(&v);
        let zn = norm(z.view());
        if zn == 0.0 {
            return (u, 0.0, v);
        }
        let next = z.mapv(|x| x / zn);
        let delta = (&next - &u).mapv(f64::abs).sum();
        u = next;
        sigma = zn;
        if delta < 1e-13 {
            break;
        }
    }
    (u, sigma, v)
}

/// Cholesky factorization of a symmetric positive-definite matrix.
/// Returns the lower factor, or `None` when a pivot collapses.
pub fn cholesky(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let (head, mut tail) = l.view_mut().split_at(ndarray::Axis(0), i);
        let mut row_i = tail.row_mut(0);
        for j in 0..i {
            let row_j = head.row(j);
            let sum = a[(i, j)] - row_i.slice(s![..j]).dot(&row_j.slice(s![..j]));
            row_i[j] = sum / row_j[j];
        }
        let sum = a[(i, i)] - row_i.slice(s![..i]).dot(&row_i.slice(s![..i]));
        if sum <= 0.0 || !sum.is_finite() {
            return None;
        }
        row_i[i] = sum.sqrt();
    }
    Some(l)
}

/// Solve `L y = b` then `Lᵀ x = y` for a lower Cholesky factor.
pub fn cholesky_solve(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[(i, k)] * y[k];
        }
        y[i] = sum / l[(i, i)];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[(k, i)] * x[k];
        }
        x[i] = sum / l[(i, i)];
    }
    x
}

/// Solve `L Y = B` then `Lᵀ X = Y` for many right-hand sides at once;
/// `b` has one system per column and is overwritten with the solutions.
pub fn cholesky_solve_multi(l: &Array2<f64>, b: &mut Array2<f64>) {
    let n = l.nrows();
    debug_assert_eq!(b.nrows(), n);
    // forward substitution, row-axpy form so the inner loops stream over
    // contiguous rows
    for i in 0..n {
        let pivot = l[(i, i)];
        {
            let mut row = b.row_mut(i);
            row.mapv_inplace(|v| v / pivot);
        }
        let (head, mut tail) = b.view_mut().split_at(ndarray::Axis(0), i + 1);
        let src = head.row(i);
        for k in (i + 1)..n {
            let factor = l[(k, i)];
            if factor != 0.0 {
                let mut dst = tail.row_mut(k - i - 1);
                dst.scaled_add(-factor, &src);
            }
        }
    }
    // back substitution
    for i in (0..n).rev() {
        let pivot = l[(i, i)];
        {
            let mut row = b.row_mut(i);
            row.mapv_inplace(|v| v / pivot);
        }
        if i > 0 {
            let (mut head, tail) = b.view_mut().split_at(ndarray::Axis(0), i);
            let src = tail.row(0);
            for k in 0..i {
                let factor = l[(i, k)];
                if factor != 0.0 {
                    let mut dst = head.row_mut(k);
                    dst.scaled_add(-factor, &src);
                }
            }
        }
    }
}

/// Solve the SPD system `a x = b`, retrying with a small ridge when the
/// plain factorization fails.
pub fn solve_spd(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Option<Array1<f64>> {
    if let Some(l) = cholesky(a) {
        return Some(cholesky_solve(&l, b));
    }
    let n = a.nrows();
    let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
    let ridge = 1e-12 * (trace / n as f64).abs().max(1e-300);
    let mut ar = a.to_owned();
    for i in 0..n {
        ar[(i, i)] += ridge;
    }
    cholesky(ar.view()).map(|l| cholesky_solve(&l, b))
}

/// Least-squares coefficients of `y` on the columns of `a` via normal
/// equations, with an SVD pseudo-inverse fallback for rank-deficient systems.
pub fn lstsq(a: ArrayView2<f64>, y: ArrayView1<f64>) -> Array1<f64> {
    let g = a.t().dot(&a);
    let rhs = a.t().dot(&y);
    if let Some(x) = solve_spd(g.view(), rhs.view()) {
        if x.iter().all(|v| v.is_finite()) {
            return x;
        }
    }
    // pseudo-inverse fallback
    let (u, s, v) = svd(a);
    let smax = s.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = smax * 1e-12;
    let mut x = Array1::<f64>::zeros(a.ncols());
    for k in 0..s.len() {
        if s[k] > cutoff {
            let c = u.column(k).dot(&y) / s[k];
            x.scaled_add(c, &v.column(k));
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(m: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((m, n), |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn svd_reconstructs_random_matrices() {
        for &(m, n, seed) in &[(8usize, 5usize, 1u64), (5, 8, 2), (6, 6, 3)] {
            let a = random_matrix(m, n, seed);
            let (u, s, v) = svd(a.view());
            let mut rec = Array2::<f64>::zeros((m, n));
            for k in 0..s.len() {
                for i in 0..m {
                    for j in 0..n {
                        rec[(i, j)] += u[(i, k)] * s[k] * v[(j, k)];
                    }
                }
            }
            let err = (&a - &rec).mapv(|x| x * x).sum().sqrt();
            assert!(err < 1e-10, "reconstruction error {err}");
            // descending singular values
            for k in 1..s.len() {
                assert!(s[k - 1] >= s[k] - 1e-15);
            }
        }
    }

    #[test]
    fn svd_orthonormal_factors() {
        let a = random_matrix(7, 4, 11);
        let (u, s, v) = svd(a.view());
        for i in 0..s.len() {
            for j in 0..s.len() {
                let ue = u.column(i).dot(&u.column(j));
                let ve = v.column(i).dot(&v.column(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                if s[i] > 0.0 && s[j] > 0.0 {
                    assert!((ue - expect).abs() < 1e-10);
                }
                assert!((ve - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn leading_pair_matches_full_svd() {
        let a = random_matrix(9, 6, 21);
        let (_, s, _) = svd(a.view());
        let (u1, s1, v1) = leading_singular_pair(a.view(), None);
        assert!((s1 - s[0]).abs() < 1e-9);
        let z = a.dot(&v1);
        let err = (&z - &u1.mapv(|x| x * s1)).mapv(f64::abs).sum();
        assert!(err < 1e-8);
    }

    #[test]
    fn spd_solve_known_system() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let b = array![8.0, 7.0];
        let x = solve_spd(a.view(), b.view()).unwrap();
        assert!((a.dot(&x) - &b).mapv(f64::abs).sum() < 1e-12);
    }

    #[test]
    fn lstsq_overdetermined() {
        let a = random_matrix(10, 3, 5);
        let x0 = array![1.5, -2.0, 0.25];
        let y = a.dot(&x0);
        let x = lstsq(a.view(), y.view());
        assert!((&x - &x0).mapv(f64::abs).sum() < 1e-10);
    }
}
