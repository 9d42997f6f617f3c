//! Growth indices of the high peaks, the Laplace rate of the Gaussian strip
//! integral, phase-transition predicates and finite-time checks of the
//! moment bounds.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{PamError, Result};
use crate::fk::McEstimate;
use crate::quadrature::GaussLegendre;
use crate::special::erfc;
use crate::spectral::{check_h1, check_h2, default_probe_grid, QuadratureSpec, SpectralMeasure, Tail};

fn check_en(en: f64) -> Result<()> {
    if en < 0.0 || en.is_nan() {
        return Err(PamError::NegativeEn(en));
    }
    Ok(())
}

fn check_order(n: usize) -> Result<()> {
    if n < 1 {
        return Err(PamError::ParameterOutOfRange("moment order must be at least 1".into()));
    }
    Ok(())
}

/// Lower bound `√(2E_n/n)` on the lower growth index.
pub fn growth_lower(n: usize, en: f64) -> Result<f64> {
    check_order(n)?;
    check_en(en)?;
    Ok((2.0 * en / n as f64).sqrt())
}

/// `inf_{0<β<β_sup} (β/2 + E_n/(nβ))`, the upper bound on the upper growth
/// index for data dominated by `e^{-β|x|}` for every `β < β_sup`.
pub fn growth_upper(n: usize, en: f64, beta_sup: f64) -> Result<f64> {
    check_order(n)?;
    check_en(en)?;
    if !(beta_sup > 0.0) {
        return Err(PamError::ParameterOutOfRange(format!("beta_sup = {beta_sup} must be positive")));
    }
    let star = (2.0 * en / n as f64).sqrt();
    if star < beta_sup {
        Ok(star)
    } else {
        Ok(beta_sup / 2.0 + en / (n as f64 * beta_sup))
    }
}

/// Both growth indices for data comparable to `e^{-β|x|}`:
/// `β/2 + E_n/(nβ)` below `β* = √(2E_n/n)`, `β*` above.
pub fn growth_exponential_case(n: usize, en: f64, beta: f64) -> Result<(f64, f64)> {
    check_order(n)?;
    check_en(en)?;
    if !(beta > 0.0) {
        return Err(PamError::ParameterOutOfRange(format!("beta = {beta} must be positive")));
    }
    let star = (2.0 * en / n as f64).sqrt();
    let v = if beta < star { beta / 2.0 + en / (n as f64 * beta) } else { star };
    Ok((v, v))
}

/// `(β, β/2 + E_n/(nβ))` rows, the function minimized by [`growth_upper`].
pub fn growth_upper_table(n: usize, en: f64, betas: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_order(n)?;
    check_en(en)?;
    betas
        .iter()
        .map(|&b| {
            if b > 0.0 {
                Ok((b, b / 2.0 + en / (n as f64 * b)))
            } else {
                Err(PamError::ParameterOutOfRange(format!("beta = {b} must be positive")))
            }
        })
        .collect()
}

/// Decay class of the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GrowthRegime {
    /// Nontrivial with compact support.
    Compact,
    /// Bounded above and below by multiples of `e^{-β|x|}`.
    Exponential { beta: f64 },
    /// Bounded by `C_β e^{-β|x|}` for every `β < beta_sup`.
    Generic { beta_sup: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthIndexReport {
    pub n: usize,
    pub en: f64,
    pub en_err: f64,
    pub lower_star: f64,
    pub upper_star: f64,
    pub regime: GrowthRegime,
    pub equal: bool,
}

pub fn growth_index_report(n: usize, en: f64, en_err: f64, regime: GrowthRegime) -> Result<GrowthIndexReport> {
    let (lower_star, upper_star) = match regime {
        GrowthRegime::Compact => {
            let v = growth_lower(n, en)?;
            (v, growth_upper(n, en, f64::INFINITY)?)
        }
        GrowthRegime::Exponential { beta } => growth_exponential_case(n, en, beta)?,
        GrowthRegime::Generic { beta_sup } => (growth_lower(n, en)?, growth_upper(n, en, beta_sup)?),
    };
    Ok(GrowthIndexReport { n, en, en_err, lower_star, upper_star, regime, equal: lower_star == upper_star })
}

/// Exponential rate of the Gaussian strip integral
/// `∫_{A_M⁺} exp{-Σ_j (|y^j - αt e₁|²/(2t) + β|y^j|)} dy`:
/// `nβ²/2 - nβα` when `α > β`, `-nα²/2` otherwise.
pub fn ldev_rate(alpha: f64, beta: f64, n: usize) -> Result<f64> {
    check_order(n)?;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(PamError::ParameterOutOfRange(format!("alpha = {alpha}, beta = {beta} must be positive")));
    }
    let n = n as f64;
    Ok(if alpha > beta { n * beta * beta / 2.0 - n * beta * alpha } else { -n * alpha * alpha / 2.0 })
}

/// `ln erfc(x)`, continued past the underflow of `erfc`.
fn ln_erfc(x: f64) -> f64 {
    if x < 20.0 {
        return erfc(x).ln();
    }
    let x2 = x * x;
    let series = 1.0 - 0.5 / x2 + 0.75 / (x2 * x2) - 1.875 / (x2 * x2 * x2);
    -x2 - (x * PI.sqrt()).ln() + series.ln()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `(1/t) log ∫_{A_M⁺} exp{-Σ_j ((y^j - αt)²/(2t) + β y^j)} dy` in one
/// dimension, `A_M⁺ = {y ∈ [0,∞)^n : |y^j - y^k| ≤ M}`.
///
/// Coordinates `y^1 = u`, `y^j = u + v_j`: the `u` integral is Gaussian and
/// done in closed form; the offsets `v` are integrated by composite
/// Gauss–Legendre with panel doubling.
pub fn ldev_numeric(alpha: f64, beta: f64, n: usize, strip: f64, t: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(PamError::InstanceTooLarge(format!("strip integral supports n <= 3, got {n}")));
    }
    if !(alpha > 0.0 && beta > 0.0 && strip > 0.0 && t > 0.0) {
        return Err(PamError::ParameterOutOfRange(format!(
            "alpha = {alpha}, beta = {beta}, M = {strip}, t = {t} must be positive"
        )));
    }
    let nf = n as f64;
    let a_coef = nf / (2.0 * t);
    // log ∫_{lo}^∞ exp{-Σ_j ((u + v_j - αt)²/(2t) + β(u + v_j))} du
    let log_u = |v: &[f64]| -> f64 {
        let lo = v.iter().fold(0.0f64, |m, x| m.max(-x));
        let sa: f64 = v.iter().map(|x| x - alpha * t).sum();
        let sa2: f64 = v.iter().map(|x| (x - alpha * t).powi(2)).sum();
        let sv: f64 = v.iter().sum();
        let b = -(sa / t + nf * beta);
        let c = -sa2 / (2.0 * t) - beta * sv;
        c + b * b / (4.0 * a_coef)
            + (0.5 * (PI / a_coef).sqrt()).ln()
            + ln_erfc(a_coef.sqrt() * (lo - b / (2.0 * a_coef)))
    };
    let rule = GaussLegendre::new(quad.nodes_per_panel);
    let panels = |a: f64, b: f64, breaks: &[f64], per: usize| -> Vec<(f64, f64)> {
        let mut cuts = vec![a, b];
        cuts.extend(breaks.iter().filter(|x| **x > a && **x < b));
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut out = Vec::new();
        for w in cuts.windows(2) {
            for k in 0..per {
                let lo = w[0] + (w[1] - w[0]) * k as f64 / per as f64;
                let hi = w[0] + (w[1] - w[0]) * (k + 1) as f64 / per as f64;
                out.extend(rule.mapped(lo, hi));
            }
        }
        out
    };
    let eval = |per: usize| -> f64 {
        let mut logs = Vec::new();
        match n {
            1 => logs.push(log_u(&[0.0])),
            2 => {
                for (v, w) in panels(-strip, strip, &[0.0], per) {
                    logs.push(w.ln() + log_u(&[0.0, v]));
                }
            }
            _ => {
                for (v2, w2) in panels(-strip, strip, &[0.0], per) {
                    let lo = (-strip).max(v2 - strip);
                    let hi = strip.min(v2 + strip);
                    for (v3, w3) in panels(lo, hi, &[0.0, v2], per) {
                        logs.push(w2.ln() + w3.ln() + log_u(&[0.0, v2, v3]));
                    }
                }
            }
        }
        log_sum_exp(&logs)
    };
    let mut per = 1;
    let mut prev = eval(per);
    for _ in 0..quad.max_refinements {
        per *= 2;
        let next = eval(per);
        if (next - prev).abs() <= quad.rel_tol.max(1e-12) * next.abs().max(1.0) {
            return Ok(next / t);
        }
        prev = next;
    }
    Err(PamError::QuadratureNonconvergent(format!("strip integral: last log value {prev:e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occurs {
    Yes,
    No,
    Undetermined,
}

/// Phase-transition verdict and the critical-strength bounds. Divergent
/// integrals and absent bounds are `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub occurs: Occurs,
    /// `∫ μ(dξ)/|ξ|²`.
    #[serde(with = "crate::serde_float")]
    pub criterion_value: f64,
    /// `ℓ(2π)^ℓ / (4 sup_s s∫e^{-s|ξ|²}μ(dξ))`, bounding `λ₂^c`.
    #[serde(with = "crate::serde_float")]
    pub lambda2c_upper: f64,
    /// `(2π)^ℓ e / (2∫μ(dξ)/|ξ|²)`, bounding every `λ_n^c`.
    #[serde(with = "crate::serde_float")]
    pub lambdanc_upper: f64,
    /// `∫ (f + f²)/|ξ|² dξ` for one-dimensional rough densities.
    #[serde(with = "crate::serde_float::option")]
    pub h1_criterion_value: Option<f64>,
}

/// `sup_{s>0} s ∫ e^{-s|ξ|²} μ(dξ)`: coarse scan in `log s`, then golden
/// section around the three best local maxima.
fn sup_gaussian_moment(m: &SpectralMeasure) -> Result<f64> {
    let f = |ls: f64| -> Result<f64> {
        let s = ls.exp();
        Ok(s * m.gaussian_mass(s)?)
    };
    let lo = (1e-8f64).ln();
    let hi = (1e8f64).ln();
    let count = 161;
    let step = (hi - lo) / (count - 1) as f64;
    let xs: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| f(*x)).collect::<Result<_>>()?;
    let mut seeds: Vec<usize> =
        (0..count).filter(|&i| (i == 0 || ys[i] >= ys[i - 1]) && (i + 1 == count || ys[i] >= ys[i + 1])).collect();
    seeds.sort_by(|a, b| ys[*b].partial_cmp(&ys[*a]).unwrap());
    seeds.truncate(3);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut best = ys.iter().cloned().fold(0.0, f64::max);
    for i in seeds {
        let (mut a, mut b) = (xs[i] - step, xs[i] + step);
        let mut c = b - golden * (b - a);
        let mut d = a + golden * (b - a);
        let (mut fc, mut fd) = (f(c)?, f(d)?);
        while (b - a) > 1e-6 * (1.0 + xs[i].abs()) {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - golden * (b - a);
                fc = f(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + golden * (b - a);
                fd = f(d)?;
            }
        }
        best = best.max(fc).max(fd);
    }
    Ok(best)
}

/// Whether `sup_s s∫e^{-s|ξ|²}μ(dξ)` is finite, from the tails:
/// the supremum behaves like `s^{1-(p+ℓ)/2}` at both ends.
fn sup_gaussian_moment_finite(m: &SpectralMeasure) -> Option<bool> {
    let l = m.dim() as f64;
    let t = m.tails();
    let zero = match t.at_zero {
        Tail::Vanishes => Some(true),
        Tail::Power(p) => Some(p + l >= 2.0),
        Tail::Unknown => None,
    };
    let inf = match t.at_infinity {
        Tail::Vanishes => Some(true),
        Tail::Power(p) => Some(p + l <= 2.0),
        Tail::Unknown => None,
    };
    Some(zero? && inf?)
}

/// `∫ μ(dξ)/|ξ|²`; `+∞` when the tails make it diverge.
fn front_criterion(m: &SpectralMeasure, quad: &QuadratureSpec) -> Result<f64> {
    match m.weighted_integral_finite(-2.0, -2.0) {
        None => Err(PamError::UndeterminedTails("integral of mu(dxi)/|xi|^2".into())),
        Some(false) => Ok(f64::INFINITY),
        Some(true) => match m.band_power_moment(-2.0) {
            Some(v) => Ok(v),
            None => m.radial_integral(&|r| 1.0 / (r * r), -2.0, -2.0, quad),
        },
    }
}

/// `∫ (f + f²)/ξ² dξ` in one dimension; `+∞` when divergent.
fn rough_criterion(m: &SpectralMeasure, quad: &QuadratureSpec) -> Result<f64> {
    let t = m.tails();
    let finite_sq = |tail: Tail, at_zero: bool| match tail {
        Tail::Vanishes => Some(true),
        Tail::Power(p) => Some(if at_zero { 2.0 * p - 1.0 > 0.0 } else { 2.0 * p - 1.0 < 0.0 }),
        Tail::Unknown => None,
    };
    let first = m.weighted_integral_finite(-2.0, -2.0);
    let sq = match (finite_sq(t.at_zero, true), finite_sq(t.at_infinity, false)) {
        (Some(a), Some(b)) => Some(a && b),
        (Some(false), _) | (_, Some(false)) => Some(false),
        _ => None,
    };
    match (first, sq) {
        (Some(true), Some(true)) => {
            // (1 + f)/ρ² with f ~ ρ^p at either end
            let w = |tail: Tail| match tail {
                Tail::Power(p) => p.max(0.0) - 2.0,
                _ => -2.0,
            };
            let w0 = match t.at_zero {
                Tail::Power(p) => p.min(0.0) - 2.0,
                _ => -2.0,
            };
            m.radial_integral(&|r| (1.0 + m.density(r)) / (r * r), w0, w(t.at_infinity), quad)
        }
        (Some(false), _) | (_, Some(false)) => Ok(f64::INFINITY),
        _ => Err(PamError::UndeterminedTails("integral of (f + f^2)/xi^2".into())),
    }
}

/// Phase-transition verdict. Under nonnegative covariance with Dalang's
/// condition it is decided by finiteness of `∫μ(dξ)/|ξ|²`; for
/// one-dimensional rough densities a finite `∫(f + f²)/ξ²` gives `yes` and
/// anything else stays undetermined.
pub fn phase_predicate(m: &SpectralMeasure) -> Result<PhaseReport> {
    let quad = QuadratureSpec::default();
    let l = m.dim() as f64;
    let criterion_value = front_criterion(m, &quad)?;
    let h2 = check_h2(m).h2_ok;
    let h1 = if m.dim() == 1 && !h2 {
        let r = check_h1(m, &default_probe_grid(), 1e6)?;
        r.h1a_ok && r.h1b_ok && r.dalang_ok
    } else {
        false
    };
    let h1_criterion_value = if h1 { Some(rough_criterion(m, &quad)?) } else { None };
    let occurs = if h2 {
        if criterion_value.is_finite() {
            Occurs::Yes
        } else {
            Occurs::No
        }
    } else if h1_criterion_value.is_some_and(f64::is_finite) {
        Occurs::Yes
    } else {
        Occurs::Undetermined
    };
    let (lambda2c_upper, lambdanc_upper) = if occurs == Occurs::Yes {
        let two_c = match sup_gaussian_moment_finite(m) {
            Some(true) => l * (2.0 * PI).powi(m.dim() as i32) / (4.0 * sup_gaussian_moment(m)?),
            _ => f64::INFINITY,
        };
        let n_c = if criterion_value.is_finite() {
            (2.0 * PI).powi(m.dim() as i32) * E / (2.0 * criterion_value)
        } else {
            f64::INFINITY
        };
        (two_c, n_c)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(PhaseReport { occurs, criterion_value, lambda2c_upper, lambdanc_upper, h1_criterion_value })
}

/// One moment measurement at time `t`, with `log ∏_j (p_t * u₀)(x^j)`
/// (zero for `u₀ = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPoint {
    pub t: f64,
    pub log_moment: f64,
    pub std_err: f64,
    pub log_heat: f64,
}

impl MomentPoint {
    /// Point from a constant-initial-data estimate.
    pub fn from_constant(e: &McEstimate) -> Self {
        Self { t: e.t, log_moment: e.log_mean, std_err: e.std_err, log_heat: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteTimeCheck {
    pub t: f64,
    /// `(1/t) log[moment / ∏(p_t * u₀)]`.
    pub normalized_rate: f64,
    /// `E_n + max(c, 0)/t + 3σ`.
    pub upper_threshold: f64,
    pub upper_violation: bool,
    /// `(1/t) log[moment / ∫_{A_M} ∏ p_t]` for `u₀ = 1`, `n = 2`.
    pub lower_rate: Option<f64>,
    pub lower_violation: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteTimeReport {
    pub n: usize,
    pub en: f64,
    pub en_err: f64,
    /// Weighted least-squares fit `log moment ≈ slope · t + intercept`.
    pub slope: f64,
    pub slope_err: f64,
    pub intercept: f64,
    pub slope_violation: bool,
    pub checks: Vec<FiniteTimeCheck>,
    pub any_violation: bool,
}

/// Checks the measured moments against the bound
/// `(1/t) log[moment / ∏(p_t * u₀)] ≤ E_n + c/t` with `c` the fitted
/// intercept, flagging only excesses beyond three combined standard errors
/// (Monte Carlo, `E_n`, and the fitted intercept).
///
/// `strip` (`M`) and `dim` enable the lower diagnostic for two points with
/// `u₀ = 1`; pass `None` to skip it.
pub fn finite_t_diagnostics(
    n: usize,
    en: f64,
    en_err: f64,
    estimates: &[McEstimate],
    lower: Option<(f64, usize)>,
) -> Result<FiniteTimeReport> {
    check_en(en)?;
    if let Some(e) = estimates.iter().find(|e| e.n != n) {
        return Err(PamError::ParameterMismatch(format!("estimate at t = {} has n = {}, expected {n}", e.t, e.n)));
    }
    if let Some(e) = estimates.iter().find(|e| e.eps != estimates[0].eps) {
        return Err(PamError::ParameterMismatch(format!(
            "estimate at t = {} has eps = {}, expected {}",
            e.t, e.eps, estimates[0].eps
        )));
    }
    let points: Vec<MomentPoint> = estimates.iter().map(MomentPoint::from_constant).collect();
    finite_t_diagnostics_points(n, en, en_err, &points, lower)
}

/// [`finite_t_diagnostics`] for points carrying their own heat normalization.
pub fn finite_t_diagnostics_points(
    n: usize,
    en: f64,
    en_err: f64,
    points: &[MomentPoint],
    lower: Option<(f64, usize)>,
) -> Result<FiniteTimeReport> {
    check_en(en)?;
    if points.len() < 2 {
        return Err(PamError::InsufficientPoints { needed: 2, got: points.len() });
    }
    let ys: Vec<f64> = points.iter().map(|p| p.log_moment - p.log_heat).collect();
    let w: Vec<f64> = points.iter().map(|p| 1.0 / p.std_err.max(1e-12).powi(2)).collect();
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(points).map(|(w, p)| w * p.t).sum();
    let sy: f64 = w.iter().zip(&ys).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(points).map(|(w, p)| w * p.t * p.t).sum();
    let sxy: f64 = w.iter().zip(points).zip(&ys).map(|((w, p), y)| w * p.t * y).sum();
    let det = sw * sxx - sx * sx;
    if !(det > 0.0) {
        return Err(PamError::ParameterOutOfRange("moment times must not all coincide".into()));
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    let slope_err = (sw / det).sqrt();
    let intercept_err = (sxx / det).sqrt();
    let slope_violation = slope > en + 3.0 * (slope_err.powi(2) + en_err.powi(2)).sqrt();
    let checks: Vec<FiniteTimeCheck> = points
        .iter()
        .zip(&ys)
        .map(|(p, y)| {
            let rate = y / p.t;
            let sigma = ((p.std_err / p.t).powi(2) + en_err.powi(2) + (intercept_err / p.t).powi(2)).sqrt();
            let upper_threshold = en + intercept.max(0.0) / p.t + 3.0 * sigma;
            let (lower_rate, lower_violation) = match lower {
                Some((strip, dim)) if n == 2 && p.log_heat == 0.0 => {
                    // Y¹ - Y² ~ N(0, 2t I_ℓ): P(|Y¹ - Y²| ≤ M)
                    let mass = gamma_lr(dim as f64 / 2.0, strip * strip / (4.0 * p.t));
                    let r = (p.log_moment - mass.ln()) / p.t;
                    (Some(r), Some(r < en - intercept.abs() / p.t - 3.0 * sigma))
                }
                _ => (None, None),
            };
            FiniteTimeCheck {
                t: p.t,
                normalized_rate: rate,
                upper_threshold,
                upper_violation: rate > upper_threshold,
                lower_rate,
                lower_violation,
            }
        })
        .collect();
    let any_violation = slope_violation || checks.iter().any(|c| c.upper_violation || c.lower_violation == Some(true));
    Ok(FiniteTimeReport { n, en, en_err, slope, slope_err, intercept, slope_violation, checks, any_violation })
}
