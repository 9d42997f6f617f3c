//! Lowest eigenpair of the lattice Hamiltonian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::operator::Hamiltonian;
use crate::error::{PamError, Result};
use crate::linalg::{axpy, dot, norm2, scale, tridiagonal_ground};

/// Krylov vectors kept per restart cycle.
const CYCLE: usize = 80;

/// Smallest eigenvalue and eigenvector of `op`.
///
/// One-dimensional operators are tridiagonal and use Sturm bisection with
/// inverse iteration; two-dimensional ones use restarted Lanczos with full
/// reorthogonalization started from a seeded positive random vector.
/// `max_iter` counts operator applications. The returned vector satisfies
/// `‖v‖₂ h^{d/2} = 1` and its first non-negligible component is positive.
pub fn ground_energy(op: &Hamiltonian, tol: f64, max_iter: usize, seed: u64) -> Result<(f64, Vec<f64>)> {
    let (lambda, mut v) = match op.tridiagonal() {
        Some((diag, off)) => {
            let (lambda, v) = tridiagonal_ground(&diag, &off);
            let res = residual(op, lambda, &v);
            if res > tol {
                return Err(PamError::NoConvergence { iterations: 1, residual: res });
            }
            (lambda, v)
        }
        None => lanczos(op, tol, max_iter, seed)?,
    };
    let nrm = norm2(&v) * op.cell().sqrt();
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let first = v.iter().find(|x| x.abs() > 1e-8 * peak).copied().unwrap_or(1.0);
    scale(first.signum() / nrm, &mut v);
    Ok((lambda, v))
}

/// `‖H v - λ v‖₂ / ‖v‖₂`.
pub fn residual(op: &Hamiltonian, lambda: f64, v: &[f64]) -> f64 {
    let mut w = vec![0.0; v.len()];
    op.apply(v, &mut w);
    axpy(-lambda, v, &mut w);
    norm2(&w) / norm2(v)
}

fn lanczos(op: &Hamiltonian, tol: f64, max_iter: usize, seed: u64) -> Result<(f64, Vec<f64>)> {
    let n = op.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.0)).collect();
    let nx = norm2(&x);
    scale(1.0 / nx, &mut x);
    let cycle = CYCLE.min(n);
    let mut applied = 0usize;
    let mut best = f64::INFINITY;
    loop {
        let mut basis: Vec<Vec<f64>> = vec![x.clone()];
        let mut alpha = Vec::with_capacity(cycle);
        let mut beta: Vec<f64> = Vec::with_capacity(cycle);
        for j in 0..cycle {
            let mut w = vec![0.0; n];
            op.apply(&basis[j], &mut w);
            applied += 1;
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                let coeffs: Vec<f64> = basis.iter().map(|b| dot(&w, b)).collect();
                for (c, b) in coeffs.iter().zip(&basis) {
                    axpy(-c, b, &mut w);
                }
            }
            let b = norm2(&w);
            if j + 1 == cycle || b < 1e-14 * a.abs().max(1.0) {
                break;
            }
            beta.push(b);
            scale(1.0 / b, &mut w);
            basis.push(w);
        }
        let m = alpha.len();
        let (theta, y) = tridiagonal_ground(&alpha, &beta[..m - 1]);
        let mut next = vec![0.0; n];
        for (c, b) in y.iter().zip(&basis) {
            axpy(*c, b, &mut next);
        }
        let nn = norm2(&next);
        scale(1.0 / nn, &mut next);
        let res = residual(op, theta, &next);
        applied += 1;
        best = best.min(res);
        if res <= tol {
            return Ok((theta, next));
        }
        if applied >= max_iter {
            return Err(PamError::NoConvergence { iterations: applied, residual: best });
        }
        x = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variational::operator::GridSpec;
    use std::f64::consts::PI;

    #[test]
    fn particle_in_a_box() {
        let grid = GridSpec::new(5.0, 801).unwrap();
        let op = Hamiltonian::from_potential(1, grid, vec![0.0; grid.interior()]).unwrap();
        let (l, v) = ground_energy(&op, 1e-8, 100, 1).unwrap();
        let exact = PI * PI / (8.0 * 25.0);
        assert!((l - exact).abs() < 0.01 * exact);
        assert!(v.iter().all(|x| *x >= 0.0));
        let nrm: f64 = v.iter().map(|x| x * x).sum::<f64>() * grid.spacing();
        assert!((nrm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn box_in_two_dimensions() {
        let grid = GridSpec::new(2.0, 41).unwrap();
        let op = Hamiltonian::from_potential(2, grid, vec![0.0; 39 * 39]).unwrap();
        let (l, _) = ground_energy(&op, 1e-8, 5000, 3).unwrap();
        // discrete spectrum: sum over axes of (1 - cos(π h / 2L)) / h²
        let h = grid.spacing();
        let exact = 2.0 * (1.0 - (PI * h / 4.0).cos()) / (h * h);
        assert!((l - exact).abs() < 1e-10, "{l} {exact}");
    }

    #[test]
    fn diagonal_operator_gives_min_entry() {
        // large grid spacing makes the kinetic coupling negligible next to the potential
        let grid = GridSpec::new(1e4, 21).unwrap();
        let pot: Vec<f64> = (0..19).map(|i| ((i * 7) % 19) as f64).collect();
        let op = Hamiltonian::from_potential(1, grid, pot).unwrap();
        let (l, _) = ground_energy(&op, 1e-8, 10, 0).unwrap();
        let min_diag = (0..19).map(|i| op.diagonal(i)).fold(f64::INFINITY, f64::min);
        assert!((l - min_diag).abs() < 1e-6);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let grid = GridSpec::new(3.0, 31).unwrap();
        let pot: Vec<f64> = (0..29 * 29).map(|i| (-((i % 29) as f64 - 14.0).powi(2) / 20.0).exp()).collect();
        let op = Hamiltonian::from_potential(2, grid, pot).unwrap();
        let a = ground_energy(&op, 1e-9, 5000, 42).unwrap();
        let b = ground_energy(&op, 1e-9, 5000, 42).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }
}
