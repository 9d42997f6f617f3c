//! The variational quantity
//! `E_n(γ) = sup_{‖g‖=1} { ∫ Σ_{j<k} γ(x^j - x^k) g²(x) dx - ½∫|∇g|² }`
//! computed as minus the ground energy of `-½Δ - λΓ_ε` on a lattice, with
//! extrapolation in grid spacing, box size and regularization.

pub mod eigen;
pub mod functional;
pub mod hartree;
pub mod operator;
pub mod reduce;

use serde::{Deserialize, Serialize};

use crate::error::{PamError, Result};
use crate::spectral::SpectralMeasure;

pub use eigen::ground_energy;
pub use functional::{energy_functional_fourier, energy_functional_real, to_fourier, FourierState};
pub use hartree::{solve_eh, HartreeOptions};
pub use operator::{assemble_hamiltonian, GridSpec, Hamiltonian};
pub use reduce::{reduce_center_of_mass, ReducedProblem};

/// `n` particles in `R^ℓ` interacting through `λγ_ε`.
#[derive(Debug, Clone)]
pub struct VariationalProblem {
    pub n: usize,
    pub ell: usize,
    pub measure: SpectralMeasure,
    pub noise_scale: f64,
    pub eps: f64,
}

impl VariationalProblem {
    /// `λ = 0` is accepted and stands for the zero covariance. `ε = 0` is
    /// accepted for white noise only.
    pub fn new(n: usize, measure: SpectralMeasure, noise_scale: f64, eps: f64) -> Result<Self> {
        if n < 2 {
            return Err(PamError::ParameterOutOfRange(format!("need n >= 2 particles, got {n}")));
        }
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(PamError::ParameterOutOfRange(format!("noise scale {noise_scale} must be >= 0")));
        }
        if eps < 0.0 || !eps.is_finite() || (eps == 0.0 && !measure.is_white_noise()) {
            return Err(PamError::InvalidRegularization(eps));
        }
        Ok(Self { n, ell: measure.dim(), measure, noise_scale, eps })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.n, self.measure.clone(), self.noise_scale, eps)
    }
}

/// Box sizes and per-axis point counts; every combination is solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSchedule {
    pub half_widths: Vec<f64>,
    pub points: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawValue {
    pub half_width: f64,
    pub spacing: f64,
    pub eps: f64,
    /// `-λ_min` of the lattice operator.
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Extrapolated,
    Unextrapolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnEstimate {
    pub value: f64,
    pub raw_values: Vec<RawValue>,
    /// Largest stage increment; NaN when unextrapolated.
    #[serde(with = "crate::serde_float")]
    pub error_bar: f64,
    #[serde(with = "crate::serde_float")]
    pub maximizer_norm_check: f64,
    /// Share of the finest maximizer's mass in the outer tenth of the box.
    #[serde(with = "crate::serde_float")]
    pub boundary_mass: f64,
    pub verdict: Verdict,
    /// Stage increments: grid spacing, box size, regularization.
    #[serde(with = "crate::serde_float::array")]
    pub increments: [f64; 3],
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200_000, seed: 0x5eed }
    }
}

/// `(L, Richardson value, finest raw value)` for one box.
type BoxValue = (f64, f64, f64);

/// Richardson extrapolation of order 2 from the two finest spacings.
fn richardson(points: &[(f64, f64)]) -> f64 {
    let mut v = points.to_vec();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if v.len() < 2 {
        return v[0].1;
    }
    let (h1, e1) = v[0];
    let (h2, e2) = v[1];
    e1 + (e1 - e2) * h1 * h1 / (h2 * h2 - h1 * h1)
}

/// `a + b e^{-cL}` through the three largest boxes (equal steps); falls back
/// to the largest box when the differences are negligible or not geometric.
fn box_limit(points: &[(f64, f64)]) -> f64 {
    let mut v = points.to_vec();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n = v.len();
    let last = v[n - 1].1;
    if n < 3 {
        return last;
    }
    let (l1, e1) = v[n - 3];
    let (l2, e2) = v[n - 2];
    let (l3, e3) = v[n - 1];
    let d1 = e2 - e1;
    let d2 = e3 - e2;
    let negligible = 1e-10 * e3.abs().max(1e-6);
    if d2.abs() <= negligible || d1.abs() <= negligible {
        return last;
    }
    let equal_steps = ((l3 - l2) - (l2 - l1)).abs() <= 1e-9 * (l3 - l1);
    let q = d2 / d1;
    if equal_steps && q > 0.0 && q < 1.0 {
        e3 + d2 * q / (1.0 - q)
    } else {
        last
    }
}

/// Power-law limit as `ε → 0` from the three smallest values
/// (`ε` geometric). `None` when the increments are not geometric.
fn eps_limit(points: &[(f64, f64)]) -> Option<f64> {
    let mut v = points.to_vec();
    v.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let n = v.len();
    let (e1, e2, e3) = (v[n - 3].1, v[n - 2].1, v[n - 1].1);
    let d1 = e2 - e1;
    let d2 = e3 - e2;
    if d2.abs() <= 1e-12 * e3.abs().max(1e-6) {
        return Some(e3);
    }
    let r = d2 / d1;
    if r > 0.0 && r < 1.0 {
        Some(e3 + d2 * r / (1.0 - r))
    } else {
        None
    }
}

fn outer_mass(v: &[f64], op: &Hamiltonian) -> f64 {
    let side = op.side();
    let band = (side / 10).max(1);
    let outer = |i: usize| i < band || i >= side - band;
    let total: f64 = v.iter().map(|x| x * x).sum();
    let edge: f64 = v
        .iter()
        .enumerate()
        .filter(|(i, _)| match op.dim() {
            1 => outer(*i),
            _ => outer(i / side) || outer(i % side),
        })
        .map(|(_, x)| x * x)
        .sum();
    edge / total
}

/// Ground energy `-λ_min` and normalized maximizer for one lattice.
pub fn lattice_energy(
    p: &VariationalProblem,
    grid: &GridSpec,
    opts: &SolveOptions,
) -> Result<(f64, Vec<f64>, Hamiltonian)> {
    let op = assemble_hamiltonian(p, grid)?;
    let (lambda, v) = ground_energy(&op, opts.tol, opts.max_iter, opts.seed)?;
    Ok((-lambda, v, op))
}

/// Extrapolated `E_n`: Richardson in the spacing, exponential fit in the box
/// size, then a free-exponent power law in `ε`.
///
/// A single `ε` (including `[0]` for white noise, the on-site delta) gives
/// `E_n(γ_ε)` at that regularization and skips the last stage; otherwise at
/// least three values are needed for the limit. The lattice value is a lower bound for `E_n ≥ 0` that improves as
/// the box grows, so the extrapolated value is floored at zero.
pub fn solve_en(
    p: &VariationalProblem,
    grids: &GridSchedule,
    eps_schedule: &[f64],
    opts: &SolveOptions,
) -> Result<EnEstimate> {
    if grids.half_widths.is_empty() || grids.points.is_empty() || eps_schedule.is_empty() {
        return Err(PamError::InsufficientPoints { needed: 1, got: 0 });
    }
    let fixed_eps = eps_schedule.len() == 1;
    if !fixed_eps && eps_schedule.len() < 3 {
        return Err(PamError::InsufficientPoints { needed: 3, got: eps_schedule.len() });
    }
    let mut raw = Vec::new();
    let mut norm_check = f64::NAN;
    let mut boundary_mass = f64::NAN;
    let mut finest_spacing = f64::INFINITY;
    // per (ε, L): Richardson value and the finest raw value
    let mut by_eps: Vec<(f64, Vec<BoxValue>)> = Vec::new();
    for &eps in eps_schedule {
        let pe = p.with_eps(eps)?;
        let mut per_box = Vec::new();
        for &l in &grids.half_widths {
            let mut per_h = Vec::new();
            for &m in &grids.points {
                let grid = GridSpec::new(l, m)?;
                let (e, v, op) = lattice_energy(&pe, &grid, opts)?;
                raw.push(RawValue { half_width: l, spacing: grid.spacing(), eps, energy: e });
                per_h.push((grid.spacing(), e));
                if grid.spacing() <= finest_spacing {
                    finest_spacing = grid.spacing();
                    norm_check = (v.iter().map(|x| x * x).sum::<f64>() * op.cell()).sqrt();
                    boundary_mass = outer_mass(&v, &op);
                }
            }
            let finest = per_h.iter().cloned().fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a }).1;
            per_box.push((l, richardson(&per_h), finest));
        }
        by_eps.push((eps, per_box));
    }
    let last_raw =
        raw.iter().filter(|r| r.eps == *eps_schedule.iter().min_by(|a, b| a.partial_cmp(b).unwrap()).unwrap());
    let fallback = last_raw.map(|r| r.energy).fold(f64::NEG_INFINITY, f64::max);
    let unextrapolated = |raw: Vec<RawValue>| EnEstimate {
        value: fallback,
        raw_values: raw,
        error_bar: f64::NAN,
        maximizer_norm_check: norm_check,
        boundary_mass,
        verdict: Verdict::Unextrapolated,
        increments: [f64::NAN; 3],
    };
    // raw energies must not decrease as ε shrinks at a fixed lattice
    if !fixed_eps {
        for l in &grids.half_widths {
            for m in &grids.points {
                let mut seq: Vec<&RawValue> = raw
                    .iter()
                    .filter(|r| {
                        r.half_width == *l
                            && (r.spacing - GridSpec { half_width: *l, points: *m }.spacing()).abs() < 1e-15
                    })
                    .collect();
                seq.sort_by(|a, b| b.eps.partial_cmp(&a.eps).unwrap());
                if seq.windows(2).any(|w| w[1].energy < w[0].energy - 1e-10) {
                    return Ok(unextrapolated(raw));
                }
            }
        }
    }
    let mut inc_h: f64 = 0.0;
    let mut inc_l: f64 = 0.0;
    let mut per_eps = Vec::new();
    for (eps, per_box) in &by_eps {
        let largest = per_box.iter().cloned().fold((f64::NEG_INFINITY, 0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
        inc_h = (largest.1 - largest.2).abs();
        let limit = box_limit(&per_box.iter().map(|(l, e, _)| (*l, *e)).collect::<Vec<_>>());
        inc_l = (limit - largest.1).abs();
        per_eps.push((*eps, limit));
    }
    let (value, inc_e) = if fixed_eps {
        (per_eps[0].1, 0.0)
    } else {
        match eps_limit(&per_eps) {
            Some(v) => {
                let smallest = per_eps.iter().cloned().fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
                (v, (v - smallest.1).abs())
            }
            None => return Ok(unextrapolated(raw)),
        }
    };
    let increments = [inc_h, inc_l, inc_e];
    Ok(EnEstimate {
        value: value.max(0.0),
        raw_values: raw,
        error_bar: increments.iter().cloned().fold(0.0, f64::max),
        maximizer_norm_check: norm_check,
        boundary_mass,
        verdict: Verdict::Extrapolated,
        increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_removes_quadratic_error() {
        let pts = [(0.1, 1.0 + 0.01 * 3.0), (0.2, 1.0 + 0.04 * 3.0), (0.4, 1.0 + 0.16 * 3.0)];
        assert!((richardson(&pts) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn box_limit_recovers_exponential_model() {
        let f = |l: f64| 2.0 - 0.5 * (-0.7 * l).exp();
        let pts: Vec<(f64, f64)> = [4.0, 5.0, 6.0].iter().map(|l| (*l, f(*l))).collect();
        assert!((box_limit(&pts) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eps_limit_recovers_power_law() {
        let f = |e: f64| 0.25 - 0.3 * e.powf(0.5);
        let pts: Vec<(f64, f64)> = [0.04, 0.02, 0.01].iter().map(|e| (*e, f(*e))).collect();
        assert!((eps_limit(&pts).unwrap() - 0.25).abs() < 1e-12);
        let bad = [(0.04, 1.0), (0.02, 0.9), (0.01, 1.2)];
        assert!(eps_limit(&bad).is_none());
    }

    #[test]
    fn delta_well_two_particles() {
        let p = VariationalProblem::new(2, SpectralMeasure::white_noise(), 1.0, 0.0).unwrap();
        let grids = GridSchedule { half_widths: vec![8.0, 10.0, 12.0], points: vec![401, 801] };
        let est = solve_en(&p, &grids, &[0.0], &SolveOptions::default()).unwrap();
        assert_eq!(est.verdict, Verdict::Extrapolated);
        assert!((est.value - 0.25).abs() < 1e-3, "{est:?}");
        assert!((est.maximizer_norm_check - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_gives_zero() {
        let p = VariationalProblem::new(2, SpectralMeasure::white_noise(), 0.0, 0.1).unwrap();
        let grids = GridSchedule { half_widths: vec![4.0, 5.0, 6.0], points: vec![101, 201] };
        let est = solve_en(&p, &grids, &[0.1, 0.05, 0.025], &SolveOptions::default()).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(VariationalProblem::new(1, SpectralMeasure::white_noise(), 1.0, 0.1).is_err());
        let frac = SpectralMeasure::fractional(0.4).unwrap();
        assert!(matches!(VariationalProblem::new(2, frac, 1.0, 0.0), Err(PamError::InvalidRegularization(_))));
    }
}
