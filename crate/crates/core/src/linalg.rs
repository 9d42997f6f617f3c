//! Vector kernels with a reduction order fixed independently of the rayon
//! worker count, plus small symmetric tridiagonal solvers.

use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Dot product summed chunk by chunk in index order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(ys, xs)| {
        for (u, v) in ys.iter_mut().zip(xs) {
            *u += alpha * v;
        }
    });
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.par_chunks_mut(CHUNK).for_each(|xs| xs.iter_mut().for_each(|v| *v *= alpha));
}

/// Number of eigenvalues of the symmetric tridiagonal matrix `(diag, off)`
/// strictly below `x` (Sturm sequence count).
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by bisection.
pub fn tridiagonal_smallest(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - shift I) x = rhs` with the Thomas algorithm. Stable when the
/// shifted matrix is definite.
pub fn tridiagonal_solve(diag: &[f64], off: &[f64], shift: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0] - shift;
    c[0] = if n > 1 { off[0] / denom } else { 0.0 };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - shift - off[i - 1] * c[i - 1];
        if denom == 0.0 {
            denom = f64::EPSILON;
        }
        c[i] = if i + 1 < n { off[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Smallest eigenpair of a symmetric tridiagonal matrix: bisection for the
/// eigenvalue, then inverse iteration from a shift just below it.
pub fn tridiagonal_ground(diag: &[f64], off: &[f64]) -> (f64, Vec<f64>) {
    let n = diag.len();
    let lambda = tridiagonal_smallest(diag, off);
    let scale = diag.iter().map(|d| d.abs()).fold(0.0, f64::max) + off.iter().map(|o| o.abs()).fold(0.0, f64::max);
    let shift = lambda - 1e-10 * (scale + lambda.abs() + 1e-300);
    let mut x = vec![1.0; n];
    for _ in 0..4 {
        x = tridiagonal_solve(diag, off, shift, &x);
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    (lambda, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_matches_second_difference_spectrum() {
        // tridiag(-1, 2, -1) of size n has eigenvalues 2 - 2cos(kπ/(n+1))
        let n = 50;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let (l, v) = tridiagonal_ground(&diag, &off);
        assert!((l - exact).abs() < 1e-13);
        assert!(v.iter().all(|x| *x > 0.0));
        assert_eq!(sturm_count(&diag, &off, 4.0), n);
    }

    #[test]
    fn dot_is_order_stable() {
        let a: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let one = pool.install(|| dot(&a, &a));
        assert_eq!(one.to_bits(), dot(&a, &a).to_bits());
    }
}
