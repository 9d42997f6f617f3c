//! The single-function problem
//! `E_H(λγ) = sup_{‖g‖=1} { λ∫∫γ_ε(x-y) g²(x) g²(y) dx dy - ∫|∇g|² }`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::operator::GridSpec;
use crate::error::{PamError, Result};
use crate::linalg::{dot, tridiagonal_solve};
use crate::spectral::{regularized_covariance_value, SpectralMeasure};

/// Settings for the imaginary-time iteration.
#[derive(Debug, Clone, Copy)]
pub struct HartreeOptions {
    pub step: f64,
    pub max_step: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for HartreeOptions {
    fn default() -> Self {
        Self { step: 0.5, max_step: 1e3, tol: 1e-8, max_iter: 20_000 }
    }
}

struct Convolver {
    side: usize,
    cell: f64,
    /// transform of the kernel samples; `None` means the identity (delta)
    kernel: Option<Vec<Complex64>>,
    size: usize,
}

impl Convolver {
    fn new(m: &SpectralMeasure, eps: f64, grid: &GridSpec) -> Result<Self> {
        let side = grid.interior();
        let h = grid.spacing();
        if eps == 0.0 {
            return Ok(Self { side, cell: h, kernel: None, size: 0 });
        }
        // circular convolution of length 2·side-1 holds all lags exactly
        let size = 2 * side - 1;
        let mut k: Vec<Complex64> = (0..size)
            .map(|i| {
                let lag = if i < side { i as f64 } else { i as f64 - size as f64 };
                regularized_covariance_value(m, eps, &[lag * h]).map(|v| Complex64::new(v, 0.0))
            })
            .collect::<Result<_>>()?;
        FftPlanner::new().plan_fft_forward(size).process(&mut k);
        Ok(Self { side, cell: h, kernel: Some(k), size })
    }

    /// `(γ_ε * u)` sampled at the nodes.
    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let Some(k) = &self.kernel else { return u.to_vec() };
        let mut planner = FftPlanner::new();
        let mut buf: Vec<Complex64> =
            (0..self.size).map(|i| Complex64::new(if i < self.side { u[i] } else { 0.0 }, 0.0)).collect();
        planner.plan_fft_forward(self.size).process(&mut buf);
        buf.iter_mut().zip(k).for_each(|(b, kk)| *b *= kk);
        planner.plan_fft_inverse(self.size).process(&mut buf);
        let w = self.cell / self.size as f64;
        buf[..self.side].iter().map(|v| v.re * w).collect()
    }
}

fn objective(g: &[f64], conv: &Convolver, lambda: f64, h: f64) -> f64 {
    let g2: Vec<f64> = g.iter().map(|x| x * x).collect();
    let c = conv.apply(&g2);
    let inter = lambda * dot(&g2, &c) * h;
    let mut kin = g[0] * g[0];
    for i in 0..g.len() {
        let next = if i + 1 < g.len() { g[i + 1] } else { 0.0 };
        kin += (next - g[i]).powi(2);
    }
    inter - kin / h
}

/// `E_H(λγ_ε)` for a one-dimensional measure on a Dirichlet grid; white
/// noise accepts `ε = 0` (the interaction becomes `λ∫g⁴`).
///
/// Normalized gradient flow with the mean-field potential frozen per step:
/// `(I - τΔ_h - 2τλ(γ_ε * g²)) g⁺ = g`, then renormalize. Iterates are kept even about the
/// origin, where a symmetric decreasing maximizer exists for the catalog
/// kernels.
pub fn solve_eh(m: &SpectralMeasure, eps: f64, lambda: f64, grid: &GridSpec, opts: &HartreeOptions) -> Result<f64> {
    if m.dim() != 1 {
        return Err(PamError::DimensionMismatch(format!(
            "single-function problem solved in dimension 1, measure has dimension {}",
            m.dim()
        )));
    }
    if eps < 0.0 || (eps == 0.0 && !m.is_white_noise()) {
        return Err(PamError::InvalidRegularization(eps));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let conv = Convolver::new(m, eps, grid)?;
    let h = grid.spacing();
    let axis = grid.interior_axis();
    let width = (grid.half_width / 4.0).max(h);
    let mut g: Vec<f64> = axis.iter().map(|x| (-x * x / (2.0 * width * width)).exp()).collect();
    normalize(&mut g, h);
    let mut value = objective(&g, &conv, lambda, h);
    let n = g.len();
    for _ in 0..opts.max_iter {
        let g2: Vec<f64> = g.iter().map(|x| x * x).collect();
        let pot = conv.apply(&g2);
        // keep 1/τ above the top of the spectrum of Δ_h + 2λV so the system stays definite
        let vmax = pot.iter().cloned().fold(0.0, f64::max);
        let tau = (opts.step / (2.0 * lambda.abs() * vmax).max(1e-300)).min(opts.max_step);
        let diag: Vec<f64> = pot.iter().map(|v| 1.0 + 2.0 * tau / (h * h) - 2.0 * tau * lambda * v).collect();
        let off = vec![-tau / (h * h); n - 1];
        let mut next = tridiagonal_solve(&diag, &off, 0.0, &g);
        symmetrize(&mut next);
        normalize(&mut next, h);
        g = next;
        value = objective(&g, &conv, lambda, h);
        if stationarity_residual(&g, &conv, lambda, h) <= opts.tol {
            return Ok(value);
        }
    }
    Err(PamError::NoConvergence { iterations: opts.max_iter, residual: value })
}

/// `‖Lg - <g, Lg> g‖` for the Euler-Lagrange operator `L = -Δ_h - 2λ(γ_ε * g²)`.
fn stationarity_residual(g: &[f64], conv: &Convolver, lambda: f64, h: f64) -> f64 {
    let g2: Vec<f64> = g.iter().map(|x| x * x).collect();
    let pot = conv.apply(&g2);
    let n = g.len();
    let lg: Vec<f64> = (0..n)
        .map(|i| {
            let left = if i > 0 { g[i - 1] } else { 0.0 };
            let right = if i + 1 < n { g[i + 1] } else { 0.0 };
            (2.0 * g[i] - left - right) / (h * h) - 2.0 * lambda * pot[i] * g[i]
        })
        .collect();
    let mu = dot(g, &lg) * h;
    (lg.iter().zip(g).map(|(l, x)| (l - mu * x).powi(2)).sum::<f64>() * h).sqrt()
}

/// Even part about the box centre. The problem is translation invariant, and
/// without this the maximizer drifts slowly under rounding.
fn symmetrize(g: &mut [f64]) {
    let n = g.len();
    for i in 0..n / 2 {
        let m = 0.5 * (g[i] + g[n - 1 - i]);
        g[i] = m;
        g[n - 1 - i] = m;
    }
}

fn normalize(g: &mut [f64], h: f64) {
    let n = (g.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
    g.iter_mut().for_each(|x| *x /= n);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_soliton_value() {
        // sup{λ∫g⁴ - ∫g'²} = λ²/12 (attained by a sech profile)
        let grid = GridSpec::new(20.0, 2001).unwrap();
        for &lambda in &[1.0, 2.0] {
            let v = solve_eh(&SpectralMeasure::white_noise(), 0.0, lambda, &grid, &HartreeOptions::default()).unwrap();
            let exact = lambda * lambda / 12.0;
            assert!((v - exact).abs() < 2e-3 * exact, "{v} {exact}");
        }
    }

    #[test]
    fn vanishes_with_noise_scale() {
        let grid = GridSpec::new(200.0, 4001).unwrap();
        let m = SpectralMeasure::white_noise();
        assert_eq!(solve_eh(&m, 0.1, 0.0, &grid, &HartreeOptions::default()).unwrap(), 0.0);
        let small = solve_eh(&m, 0.1, 0.05, &grid, &HartreeOptions::default()).unwrap();
        assert!(small.abs() < 1e-3, "{small}");
    }

    #[test]
    fn smoothing_lowers_the_value() {
        let grid = GridSpec::new(15.0, 1501).unwrap();
        let m = SpectralMeasure::white_noise();
        let opts = HartreeOptions::default();
        let sharp = solve_eh(&m, 0.0, 1.0, &grid, &opts).unwrap();
        let smooth = solve_eh(&m, 0.1, 1.0, &grid, &opts).unwrap();
        assert!(smooth < sharp);
        assert!(smooth > 0.0);
    }
}
