//! Eigenvalues of dense symmetric matrices: Householder reduction to
//! tridiagonal form followed by implicit-shift QL iterations.

use ndarray::Array2;

use crate::scalar::Scalar;

/// All eigenvalues of the symmetric matrix `a`, sorted descending.
/// Only the lower triangle is read.
pub fn symmetric_eigenvalues<T: Scalar>(a: &Array2<T>) -> Vec<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    if n == 0 {
        return Vec::new();
    }
    let mut m = a.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            m[[i, j]] = m[[j, i]];
        }
    }
    let (mut d, mut e) = tridiagonalize(m);
    ql_implicit(&mut d, &mut e);
    d.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    d
}

/// Returns (diagonal, subdiagonal) with `e[i]` coupling rows `i` and `i + 1`.
fn tridiagonalize<T: Scalar>(mut a: Array2<T>) -> (Vec<T>, Vec<T>) {
    let n = a.nrows();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    let two = T::of(2.0);
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];

    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).map(|i| a[[i, k]] * a[[i, k]]).sum::<T>().sqrt();
        d[k] = a[[k, k]];
        if norm == T::zero() {
            e[k] = T::zero();
            continue;
        }
        let x0 = a[[k + 1, k]];
        let alpha = if x0 > T::zero() { -norm } else { norm };
        for i in k + 1..n {
            v[i] = a[[i, k]];
        }
        v[k + 1] -= alpha;
        let vnorm = (k + 1..n).map(|i| v[i] * v[i]).sum::<T>().sqrt();
        e[k] = alpha;
        if vnorm == T::zero() {
            continue;
        }
        for i in k + 1..n {
            v[i] /= vnorm;
        }
        // p = A22 v, K = v'p, q = p - K v, A22 -= 2 (v q' + q v')
        for i in k + 1..n {
            let mut s = T::zero();
            for j in k + 1..n {
                s += a[[i, j]] * v[j];
            }
            p[i] = s;
        }
        let kk: T = (k + 1..n).map(|i| v[i] * p[i]).sum();
        for i in k + 1..n {
            p[i] -= kk * v[i];
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[[i, j]] -= two * (v[i] * p[j] + p[i] * v[j]);
            }
        }
    }
    if n >= 2 {
        d[n - 2] = a[[n - 2, n - 2]];
        e[n - 2] = a[[n - 1, n - 2]];
    }
    d[n - 1] = a[[n - 1, n - 1]];
    e[n - 1] = T::zero();
    (d, e)
}

fn ql_implicit<T: Scalar>(d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let two = T::of(2.0);
    let eps = T::epsilon();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 200 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
}
