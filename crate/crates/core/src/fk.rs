//! Feynman–Kac Monte Carlo for the moments `E[∏ u(t, x^j)]` through
//! Brownian bridges or Brownian motions, accumulated in the log domain.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PamError, Result};
use crate::spectral::{KernelProfile, SpectralMeasure};

/// Samples handled by one task; partial sums are merged in chunk order.
const CHUNK: usize = 512;

/// Discretized Brownian bridge from `0` to `0` on `[0, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgePath {
    pub t: f64,
    pub times: Vec<f64>,
    /// `positions[i]` is the point of `R^ℓ` at `times[i]`.
    pub positions: Vec<Vec<f64>>,
}

fn uniform_times(t: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|i| if i == k { t } else { t * i as f64 / k as f64 }).collect()
}

/// Brownian path at the `k + 1` uniform times, started at the origin.
fn brownian<R: Rng>(t: f64, k: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let sd = (t / k as f64).sqrt();
    let mut pos = vec![vec![0.0; dim]];
    for i in 0..k {
        let next: Vec<f64> = (0..dim).map(|c| pos[i][c] + sd * rng.sample::<f64, _>(StandardNormal)).collect();
        pos.push(next);
    }
    pos
}

/// Exact bridge law at `k + 1` uniform times: `B(s) = W(s) - (s/t) W(t)`
/// per coordinate.
pub fn sample_bridge<R: Rng>(t: f64, k: usize, dim: usize, rng: &mut R) -> Result<BridgePath> {
    if k < 2 || !(t > 0.0) || dim == 0 {
        return Err(PamError::ParameterOutOfRange(format!(
            "bridge needs t > 0, at least 2 steps and dim >= 1 (t = {t}, k = {k}, dim = {dim})"
        )));
    }
    let times = uniform_times(t, k);
    let w = brownian(t, k, dim, rng);
    let end = w[k].clone();
    let mut positions: Vec<Vec<f64>> =
        w.into_iter().zip(&times).map(|(p, s)| p.iter().zip(&end).map(|(x, e)| x - s / t * e).collect()).collect();
    positions[0] = vec![0.0; dim];
    positions[k] = vec![0.0; dim];
    Ok(BridgePath { t, times, positions })
}

pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Initial condition `u₀`.
#[derive(Clone)]
pub enum InitialData {
    ConstantOne,
    /// Indicator of the closed ball of the given radius.
    CompactIndicator {
        radius: f64,
    },
    /// `C e^{-β|x|}`.
    Exponential {
        beta: f64,
        scale: f64,
    },
    Custom {
        label: String,
        func: PointFn,
    },
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ConstantOne => write!(f, "ConstantOne"),
            Self::CompactIndicator { radius } => write!(f, "CompactIndicator({radius})"),
            Self::Exponential { beta, scale } => write!(f, "Exponential(beta={beta}, C={scale})"),
            Self::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ConstantOne | Self::Custom { .. } => Ok(()),
            Self::CompactIndicator { radius } if *radius > 0.0 && radius.is_finite() => Ok(()),
            Self::Exponential { beta, scale } if *beta > 0.0 && *scale > 0.0 && scale.is_finite() => Ok(()),
            other => Err(PamError::UnsupportedInitialData(format!("{other:?}"))),
        }
    }

    /// `log u₀(x)`; `-∞` where `u₀` vanishes.
    pub fn log_value(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self {
            Self::ConstantOne => 0.0,
            Self::CompactIndicator { radius } => {
                if r <= *radius {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::Exponential { beta, scale } => scale.ln() - beta * r,
            Self::Custom { func, .. } => {
                let v = func(x);
                if v > 0.0 {
                    v.ln()
                } else if v == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::NAN
                }
            }
        }
    }
}

/// Log-domain Monte Carlo estimate of a moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub log_mean: f64,
    /// Delta-method standard error of `log_mean`.
    pub std_err: f64,
    pub samples: usize,
    pub t: f64,
    pub n: usize,
    pub eps: f64,
    pub seed: u64,
    pub steps: usize,
    pub warnings: Vec<String>,
}

/// Numerical settings shared by the estimators.
#[derive(Debug, Clone, Copy)]
pub struct McSettings {
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
}

/// Running `(max, Σe^{w-max}, Σe^{2(w-max)}, count)` of log weights.
#[derive(Debug, Clone, Copy)]
struct LogAccumulator {
    max: f64,
    s1: f64,
    s2: f64,
    count: usize,
    bad: usize,
}

impl LogAccumulator {
    fn new() -> Self {
        Self { max: f64::NEG_INFINITY, s1: 0.0, s2: 0.0, count: 0, bad: 0 }
    }

    fn push(&mut self, w: f64) {
        self.count += 1;
        if w.is_nan() || w == f64::INFINITY {
            self.bad += 1;
            return;
        }
        if w == f64::NEG_INFINITY {
            return;
        }
        if w > self.max {
            let r = (self.max - w).exp();
            self.s1 = self.s1 * r + 1.0;
            self.s2 = self.s2 * r * r + 1.0;
            self.max = w;
        } else {
            let e = (w - self.max).exp();
            self.s1 += e;
            self.s2 += e * e;
        }
    }

    fn merge(mut self, o: Self) -> Self {
        self.count += o.count;
        self.bad += o.bad;
        if o.max == f64::NEG_INFINITY {
            return self;
        }
        if self.max == f64::NEG_INFINITY {
            return Self { count: self.count, bad: self.bad, ..o };
        }
        if o.max > self.max {
            let r = (self.max - o.max).exp();
            self.s1 = self.s1 * r + o.s1;
            self.s2 = self.s2 * r * r + o.s2;
            self.max = o.max;
        } else {
            let r = (o.max - self.max).exp();
            self.s1 += o.s1 * r;
            self.s2 += o.s2 * r * r;
        }
        self
    }

    /// `(log mean, delta-method std err)`.
    fn finish(&self) -> Result<(f64, f64)> {
        if self.bad > 0 {
            return Err(PamError::OverflowGuard { saturated: self.bad });
        }
        if self.max == f64::NEG_INFINITY {
            return Err(PamError::ParameterOutOfRange(
                "every sampled weight vanished; increase the number of samples".into(),
            ));
        }
        let n = self.count as f64;
        let m1 = self.max + (self.s1 / n).ln();
        let m2 = 2.0 * self.max + (self.s2 / n).ln();
        let rel_var = ((m2 - 2.0 * m1).exp() - 1.0).max(0.0);
        Ok((m1, (rel_var / (n - 1.0)).sqrt()))
    }
}

/// Pair kernel evaluated along paths.
pub struct PathKernel {
    profile: KernelProfile,
    lambda: f64,
}

impl PathKernel {
    /// `r_max` bounds the pair distances tabulated in advance.
    pub fn new(m: &SpectralMeasure, eps: f64, lambda: f64, r_max: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(PamError::InvalidRegularization(eps));
        }
        Ok(Self { profile: KernelProfile::new(m, eps, r_max)?, lambda })
    }

    /// Trapezoid rule for `λ ∫_0^t Σ_{j<k} γ_ε(z^j(s) - z^k(s)) ds` where
    /// `z^j(s_i) = paths[j][i] + x^j + (s_i/t) y^j`.
    pub fn integral(&self, paths: &[Vec<Vec<f64>>], x: &[Vec<f64>], y: &[Vec<f64>], t: f64) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        let n = paths.len();
        let k = paths[0].len() - 1;
        let dim = paths[0][0].len();
        let mut total = 0.0;
        let mut d = vec![0.0; dim];
        #[allow(clippy::needless_range_loop)]
        for i in 0..=k {
            let frac = i as f64 / k as f64;
            let mut slice = 0.0;
            for a in 0..n {
                for b in a + 1..n {
                    for c in 0..dim {
                        d[c] = paths[a][i][c] - paths[b][i][c] + x[a][c] - x[b][c] + frac * (y[a][c] - y[b][c]);
                    }
                    slice += self.profile.eval_vec(&d);
                }
            }
            total += if i == 0 || i == k { 0.5 * slice } else { slice };
        }
        self.lambda * total * t / k as f64
    }
}

fn pair_range(t: f64, x: &[Vec<f64>], y_scale: f64) -> f64 {
    let spread = x
        .iter()
        .flat_map(|a| x.iter().map(move |b| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()))
        .fold(0.0, f64::max);
    spread + 12.0 * (2.0 * t).sqrt() + y_scale
}

/// Trapezoid-in-time interaction `λ ∫_0^t Σ_{j<k} γ_ε(B^j - B^k + x^j - x^k
/// + (s/t)(y^j - y^k)) ds` for bridges `B^j` sharing one time grid.
pub fn interaction_integral(
    paths: &[BridgePath],
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    m: &SpectralMeasure,
    eps: f64,
    lambda: f64,
) -> Result<f64> {
    if paths.is_empty() || x.len() != paths.len() || y.len() != paths.len() {
        return Err(PamError::DimensionMismatch("one offset pair per path is required".into()));
    }
    let t = paths[0].t;
    let kernel = PathKernel::new(m, eps, lambda, pair_range(t, x, 0.0) + pair_range(0.0, y, 0.0))?;
    let pos: Vec<Vec<Vec<f64>>> = paths.iter().map(|p| p.positions.clone()).collect();
    Ok(kernel.integral(&pos, x, y, t))
}

fn check_settings(n: usize, t: f64, eps: f64, s: &McSettings) -> Result<Vec<String>> {
    if s.samples < 100 {
        return Err(PamError::ParameterOutOfRange(format!("need at least 100 samples, got {}", s.samples)));
    }
    if n < 1 || !(t > 0.0) || s.steps < 2 {
        return Err(PamError::ParameterOutOfRange(format!("invalid n = {n}, t = {t}, steps = {}", s.steps)));
    }
    let mut warnings = Vec::new();
    let wanted = (4.0 * t / eps.sqrt()).ceil();
    if (s.steps as f64) < wanted {
        warnings.push(format!(
            "time grid of {} steps resolves the kernel correlation time sqrt(eps) with fewer than 4 slices (want {wanted})",
            s.steps
        ));
    }
    Ok(warnings)
}

fn run_samples<F>(s: &McSettings, log_weight: F) -> Result<(f64, f64)>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = s.samples.div_ceil(CHUNK);
    let partial: Vec<LogAccumulator> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = LogAccumulator::new();
            for i in c * CHUNK..((c + 1) * CHUNK).min(s.samples) {
                let mut rng = sample_rng(s.seed, i as u64);
                acc.push(log_weight(&mut rng));
            }
            acc
        })
        .collect();
    partial.into_iter().fold(LogAccumulator::new(), LogAccumulator::merge).finish()
}

/// Independent stream for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `E[∏_j u(t, x^j)]` from the bridge representation: the heat kernels
/// `p_t(y^j)` are the sampling law of the terminal offsets `y^j`.
pub fn moment_fk_bridge(
    t: f64,
    x: &[Vec<f64>],
    u0: &InitialData,
    m: &SpectralMeasure,
    eps: f64,
    lambda: f64,
    s: &McSettings,
) -> Result<McEstimate> {
    u0.validate()?;
    let n = x.len();
    let dim = m.dim();
    if x.iter().any(|p| p.len() != dim) {
        return Err(PamError::DimensionMismatch(format!("points must lie in R^{dim}")));
    }
    let warnings = check_settings(n, t, eps, s)?;
    let kernel = PathKernel::new(m, eps, lambda, pair_range(t, x, 16.0 * t.sqrt()))?;
    let sd = t.sqrt();
    let (log_mean, std_err) = run_samples(s, |rng| {
        let y: Vec<Vec<f64>> =
            (0..n).map(|_| (0..dim).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let init: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| {
                let p: Vec<f64> = a.iter().zip(b).map(|(u, v)| u + v).collect();
                u0.log_value(&p)
            })
            .sum();
        if init == f64::NEG_INFINITY {
            return init;
        }
        let paths: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|_| {
                let w = brownian(t, s.steps, dim, rng);
                let end = w[s.steps].clone();
                w.into_iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let f = i as f64 / s.steps as f64;
                        p.iter().zip(&end).map(|(a, e)| a - f * e).collect()
                    })
                    .collect()
            })
            .collect();
        init + kernel.integral(&paths, x, &y, t)
    })?;
    Ok(McEstimate { log_mean, std_err, samples: s.samples, t, n, eps, seed: s.seed, steps: s.steps, warnings })
}

/// `E exp{λ ∫_0^t Σ_{j<k} γ_ε(B^j(s) - B^k(s) + y^j - y^k) ds}` with
/// independent Brownian motions sampled exactly at the grid times.
pub fn moment_fk_bm(
    t: f64,
    y: &[Vec<f64>],
    m: &SpectralMeasure,
    eps: f64,
    lambda: f64,
    s: &McSettings,
) -> Result<McEstimate> {
    let n = y.len();
    let dim = m.dim();
    if y.iter().any(|p| p.len() != dim) {
        return Err(PamError::DimensionMismatch(format!("points must lie in R^{dim}")));
    }
    let warnings = check_settings(n, t, eps, s)?;
    let kernel = PathKernel::new(m, eps, lambda, pair_range(t, y, 0.0))?;
    let zeros = vec![vec![0.0; dim]; n];
    let (log_mean, std_err) = run_samples(s, |rng| {
        let paths: Vec<Vec<Vec<f64>>> = (0..n).map(|_| brownian(t, s.steps, dim, rng)).collect();
        kernel.integral(&paths, y, &zeros, t)
    })?;
    Ok(McEstimate { log_mean, std_err, samples: s.samples, t, n, eps, seed: s.seed, steps: s.steps, warnings })
}

/// Weighted least-squares slope of `log_moment` against `t` over the larger
/// half of the points (at least two). Returns `(slope, standard error)`.
pub fn lyapunov_slope(points: &[(f64, f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(PamError::InsufficientPoints { needed: 3, got: points.len() });
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(PamError::ParameterOutOfRange("times must be strictly increasing".into()));
    }
    let keep = points.len().div_ceil(2).max(2);
    let tail = &points[points.len() - keep..];
    let weighted = tail.iter().all(|p| p.2 > 0.0);
    let w: Vec<f64> = tail.iter().map(|p| if weighted { 1.0 / (p.2 * p.2) } else { 1.0 }).collect();
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(tail).map(|(w, p)| w * p.0).sum();
    let sy: f64 = w.iter().zip(tail).map(|(w, p)| w * p.1).sum();
    let sxx: f64 = w.iter().zip(tail).map(|(w, p)| w * p.0 * p.0).sum();
    let sxy: f64 = w.iter().zip(tail).map(|(w, p)| w * p.0 * p.1).sum();
    let det = sw * sxx - sx * sx;
    let slope = (sw * sxy - sx * sy) / det;
    let err = if weighted {
        (sw / det).sqrt()
    } else if tail.len() > 2 {
        let icpt = (sy - slope * sx) / sw;
        let rss: f64 = tail.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
        (rss / (tail.len() as f64 - 2.0) * sw / det).sqrt()
    } else {
        0.0
    };
    Ok((slope, err))
}
