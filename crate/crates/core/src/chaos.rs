//! Second moment `E[u(t,x)²]` for `u₀ = 1` from the Wiener chaos series
//! `Σ_d I_d(t)`, with
//! `I_d = λ^d (2π)^{-ℓd} ∫_{0<s_1<…<s_d<t} ∫ exp{-Σ_j |η_j|² (s_j - s_{j-1})} ∏ μ_ε(dξ_j) ds`
//! and `η_j = ξ_j + … + ξ_d`. Equivalently `I_d = E[(λ∫_0^t γ_ε(B¹-B²))^d] / d!`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PamError, Result};
use crate::fk::sample_rng;
use crate::quadrature::GaussLegendre;
use crate::spectral::{regularized_covariance_value, SpectralMeasure, TiltedSampler};

/// Highest order evaluated by nested quadrature.
pub const MAX_QUADRATURE_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ChaosMode {
    /// Nested Gauss–Legendre over the simplex; `nodes` per axis.
    Quadrature { nodes: usize },
    /// Ordered uniform times and frequencies from the tilted spectral law.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosTerm {
    pub value: f64,
    /// Zero in quadrature mode.
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosSeriesResult {
    pub t: f64,
    pub eps: f64,
    pub lambda: f64,
    pub terms: Vec<f64>,
    pub term_errors: Vec<f64>,
    pub partial_sum: f64,
    /// Geometric extrapolation from the last term ratio; a heuristic, not a
    /// certified bound.
    pub tail_bound: f64,
    pub converged: bool,
}

/// `λ ∫_0^t γ_{ε+s}(0) ds`.
fn first_term(m: &SpectralMeasure, t: f64, eps: f64, lambda: f64) -> Result<f64> {
    if m.is_white_noise() {
        return Ok(lambda * ((eps + t).sqrt() - eps.sqrt()) / PI.sqrt());
    }
    let origin = vec![0.0; m.dim()];
    let rule = GaussLegendre::new(24);
    // γ_{ε+s}(0) varies on the scale ε + s, so grade panels geometrically down to ε
    let mut breaks = vec![t];
    while *breaks.last().unwrap() > eps.max(t * 1e-12) {
        let b = breaks.last().unwrap() / 4.0;
        breaks.push(b);
    }
    breaks.push(0.0);
    breaks.reverse();
    let mut acc = 0.0;
    for w in breaks.windows(2) {
        for (s, wt) in rule.mapped(w[0], w[1]) {
            acc += wt * regularized_covariance_value(m, eps + s, &origin)?;
        }
    }
    Ok(lambda * acc)
}

/// Nested Gauss–Legendre over ordered times for white noise, with the
/// frequency integral done in closed form:
/// `∫ e^{-ηᵀ(diag Δ + εT)η} dη = π^{d/2} / sqrt(det(diag Δ + εT))`.
/// Stick-breaking `Δ_j = R_j sin²θ_j`, `R_{j+1} = R_j cos²θ_j` removes the
/// `Δ^{-1/2}` singularities at both ends of each stick.
fn white_noise_quadrature(d: usize, t: f64, eps: f64, nodes: usize) -> f64 {
    let rule = GaussLegendre::new(nodes);
    // (sin²θ, dΔ/R weight 2 sinθ cosθ dθ, cos²θ) on θ ∈ (0, π/2)
    let pts: Vec<(f64, f64, f64)> = rule
        .mapped(0.0, 0.5 * PI)
        .map(|(th, w)| (th.sin().powi(2), w * 2.0 * th.sin() * th.cos(), th.cos().powi(2)))
        .collect();
    fn det(delta: &[f64], eps: f64) -> f64 {
        // continuant of diag(Δ) + εT, T = tridiag(-1; 1, 2, …, 2; -1)
        let mut f_prev = 1.0;
        let mut f = delta[0] + eps;
        for dj in delta.iter().skip(1) {
            let a = dj + 2.0 * eps;
            let next = a * f - eps * eps * f_prev;
            f_prev = f;
            f = next;
        }
        f
    }
    fn recurse(
        level: usize,
        d: usize,
        remaining: f64,
        weight: f64,
        delta: &mut Vec<f64>,
        pts: &[(f64, f64, f64)],
        eps: f64,
    ) -> f64 {
        if level == d {
            return weight / det(delta, eps).sqrt();
        }
        let mut acc = 0.0;
        for &(s2, w, c2) in pts {
            delta.push(remaining * s2);
            acc += recurse(level + 1, d, remaining * c2, weight * w * remaining, delta, pts, eps);
            delta.pop();
        }
        acc
    }
    let total: f64 = pts
        .par_iter()
        .map(|&(s2, w, c2)| {
            let mut delta = Vec::with_capacity(d);
            delta.push(t * s2);
            recurse(1, d, t * c2, w * t, &mut delta, &pts, eps)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    (2.0 * PI).powi(-(d as i32)) * PI.powf(d as f64 / 2.0) * total
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

/// `I_d = (λγ_ε(0)t)^d / d! · E[exp(-Σ_j Δ_j |η_j|²)]`.
fn monte_carlo_term(
    d: usize,
    t: f64,
    m: &SpectralMeasure,
    eps: f64,
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<ChaosTerm> {
    let sampler = TiltedSampler::new(m, eps)?;
    let gamma0 = regularized_covariance_value(m, eps, &vec![0.0; m.dim()])?;
    let pref = (lambda * gamma0 * t).powi(d as i32) / factorial(d);
    let ell = m.dim();
    let chunk = 1024;
    let sums: Vec<(f64, f64)> = (0..samples.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            let mut xi = vec![vec![0.0; ell]; d];
            for i in c * chunk..((c + 1) * chunk).min(samples) {
                let mut rng = sample_rng(seed, i as u64);
                let mut times: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * t).collect();
                times.sort_by(|a, b| a.partial_cmp(b).unwrap());
                for x in xi.iter_mut() {
                    sampler.sample(&mut rng, x);
                }
                let mut eta = vec![0.0; ell];
                let mut expo = 0.0;
                for j in (0..d).rev() {
                    for c in 0..ell {
                        eta[c] += xi[j][c];
                    }
                    let dt = times[j] - if j == 0 { 0.0 } else { times[j - 1] };
                    expo += dt * eta.iter().map(|v| v * v).sum::<f64>();
                }
                let v = (-expo).exp();
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(ChaosTerm { value: pref * mean, std_err: pref * (var / n).sqrt() })
}

/// The `d`-th chaos term of the second moment (two particles, `u₀ = 1`).
///
/// Quadrature mode: closed form for `d = 1`; white noise up to
/// [`MAX_QUADRATURE_ORDER`]. Other measures need Monte Carlo mode for
/// `d ≥ 2`.
pub fn chaos_term(d: usize, t: f64, m: &SpectralMeasure, eps: f64, lambda: f64, mode: ChaosMode) -> Result<ChaosTerm> {
    if !(t > 0.0) {
        return Err(PamError::ParameterOutOfRange(format!("t = {t} must be positive")));
    }
    if eps < 0.0 || (eps == 0.0 && !m.is_white_noise()) {
        return Err(PamError::InvalidRegularization(eps));
    }
    if d == 0 {
        return Ok(ChaosTerm { value: 1.0, std_err: 0.0 });
    }
    if lambda == 0.0 {
        return Ok(ChaosTerm { value: 0.0, std_err: 0.0 });
    }
    match mode {
        ChaosMode::Quadrature { nodes } => {
            if d > MAX_QUADRATURE_ORDER {
                return Err(PamError::OrderTooHigh(format!(
                    "quadrature mode supports d <= {MAX_QUADRATURE_ORDER}, got {d}"
                )));
            }
            if d == 1 {
                return Ok(ChaosTerm { value: first_term(m, t, eps, lambda)?, std_err: 0.0 });
            }
            if !m.is_white_noise() {
                return Err(PamError::OrderTooHigh(format!(
                    "quadrature mode for d = {d} needs white noise; use Monte Carlo mode"
                )));
            }
            let v = white_noise_quadrature(d, t, eps, nodes);
            Ok(ChaosTerm { value: lambda.powi(d as i32) * v, std_err: 0.0 })
        }
        ChaosMode::MonteCarlo { samples, seed } => {
            if eps == 0.0 {
                return Err(PamError::InvalidRegularization(eps));
            }
            if samples < 2 {
                return Err(PamError::InsufficientPoints { needed: 2, got: samples });
            }
            monte_carlo_term(d, t, m, eps, lambda, samples, seed.wrapping_add(d as u64))
        }
    }
}

/// Partial sum `Σ_{d ≤ D} I_d` with the geometric tail `I_D r/(1-r)`,
/// `r = I_D / I_{D-1}`.
pub fn second_moment_chaos(
    t: f64,
    m: &SpectralMeasure,
    eps: f64,
    lambda: f64,
    d_max: usize,
    mode: ChaosMode,
) -> Result<ChaosSeriesResult> {
    if d_max < 1 {
        return Err(PamError::InsufficientPoints { needed: 1, got: d_max });
    }
    let mut terms = Vec::with_capacity(d_max + 1);
    let mut errs = Vec::with_capacity(d_max + 1);
    for d in 0..=d_max {
        let term = chaos_term(d, t, m, eps, lambda, mode)?;
        terms.push(term.value);
        errs.push(term.std_err);
    }
    let last = terms[d_max];
    let prev = terms[d_max - 1];
    let ratio = if prev > 0.0 { last / prev } else { 0.0 };
    if ratio >= 0.9 {
        return Err(PamError::SeriesNotConverging(ratio));
    }
    let partial_sum: f64 = terms.iter().sum();
    let tail_bound = if ratio > 0.0 { last * ratio / (1.0 - ratio) } else { 0.0 };
    Ok(ChaosSeriesResult {
        t,
        eps,
        lambda,
        converged: tail_bound < 1e-3 * partial_sum,
        terms,
        term_errors: errs,
        partial_sum,
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUAD: ChaosMode = ChaosMode::Quadrature { nodes: 24 };

    #[test]
    fn first_term_closed_form() {
        let m = SpectralMeasure::white_noise();
        let v = chaos_term(1, 0.5, &m, 0.1, 2.0, QUAD).unwrap().value;
        let exact = 2.0 * ((0.6f64).sqrt() - (0.1f64).sqrt()) / PI.sqrt();
        assert!((v - exact).abs() < 1e-14);
        // the simplex quadrature reproduces it at d = 1
        let q = white_noise_quadrature(1, 0.5, 0.1, 24) * 2.0;
        assert!((q - exact).abs() < 1e-10, "{q} {exact}");
    }

    #[test]
    fn first_term_general_measure_matches_white_noise_path() {
        // fractional H = 1/2 is white noise through the generic quadrature
        let frac = SpectralMeasure::fractional(0.5).unwrap();
        let v = first_term(&frac, 0.5, 0.1, 1.0).unwrap();
        let exact = ((0.6f64).sqrt() - (0.1f64).sqrt()) / PI.sqrt();
        assert!((v - exact).abs() < 1e-9 * exact, "{v} {exact}");
    }

    #[test]
    fn unregularized_second_term() {
        // ε = 0: I_2 = (2π)^{-2} π ∫∫ (Δ1Δ2)^{-1/2} = t/2 (white noise, λ = 1)
        let m = SpectralMeasure::white_noise();
        let v = chaos_term(2, 0.8, &m, 0.0, 1.0, QUAD).unwrap().value;
        let exact = (2.0 * PI).powi(-2) * PI * PI * 0.8;
        assert!((v - exact).abs() < 1e-10 * exact, "{v} {exact}");
    }

    #[test]
    fn zero_noise_series() {
        let m = SpectralMeasure::white_noise();
        let r = second_moment_chaos(1.0, &m, 0.1, 0.0, 4, QUAD).unwrap();
        assert_eq!(r.partial_sum, 1.0);
        assert_eq!(r.tail_bound, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn order_limit() {
        let m = SpectralMeasure::white_noise();
        assert!(matches!(chaos_term(5, 0.2, &m, 0.1, 1.0, QUAD), Err(PamError::OrderTooHigh(_))));
        assert_eq!(chaos_term(0, 0.2, &m, 0.1, 1.0, QUAD).unwrap().value, 1.0);
    }

    #[test]
    fn quadrature_and_monte_carlo_agree() {
        let m = SpectralMeasure::white_noise();
        for d in 2..=3 {
            let q = chaos_term(d, 0.25, &m, 0.1, 1.0, QUAD).unwrap().value;
            let mc = chaos_term(d, 0.25, &m, 0.1, 1.0, ChaosMode::MonteCarlo { samples: 200_000, seed: 3 }).unwrap();
            assert!((q - mc.value).abs() < 3.0 * mc.std_err, "d={d}: {q} vs {mc:?}");
        }
    }

    #[test]
    fn series_increases_with_time() {
        let m = SpectralMeasure::white_noise();
        let sums: Vec<f64> = [0.1, 0.2, 0.3]
            .iter()
            .map(|t| second_moment_chaos(*t, &m, 0.1, 1.0, 4, QUAD).unwrap().partial_sum)
            .collect();
        assert!(sums[0] < sums[1] && sums[1] < sums[2]);
    }

    #[test]
    fn divergent_series_reported() {
        let m = SpectralMeasure::white_noise();
        assert!(matches!(second_moment_chaos(50.0, &m, 0.01, 5.0, 3, QUAD), Err(PamError::SeriesNotConverging(_))));
    }
}
